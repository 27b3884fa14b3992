"""Sampling targets: separable potentials with gradients and exact samplers.

A Target bundles the potential V(q), its gradient, the dimension, and
(when the target is a product of Gaussians) the oscillator frequencies
and an exact position sampler.  The kinetic energy is always |p|^2 / 2,
i.e. unit masses; experiments that want a different mass matrix should
rescale coordinates instead.

Each instance counts full-gradient evaluations, which is the work unit
all benchmarks report.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Target", "gaussian_chain", "double_well", "diagonal_gaussian", "parse_target"]


class Target:
    def __init__(self, name, dim, value_fn, grad_fn, exact_sampler=None, omegas=None):
        self.name = str(name)
        self.dim = int(dim)
        self._value_fn = value_fn
        self._grad_fn = grad_fn
        self._exact_sampler = exact_sampler
        self.omegas = None if omegas is None else np.asarray(omegas, dtype=float)
        self.omega_sq = None if self.omegas is None else self.omegas * self.omegas
        self.gradient_evaluations = 0

    def value(self, q: np.ndarray) -> float:
        return float(self._value_fn(q))

    def grad(self, q: np.ndarray) -> np.ndarray:
        self.gradient_evaluations += 1
        return self._grad_fn(q)

    @property
    def has_exact_sampler(self) -> bool:
        return self._exact_sampler is not None

    def sample_exact(self, rng: np.random.Generator) -> np.ndarray:
        if self._exact_sampler is None:
            raise ValueError(f"target {self.name!r} has no exact position sampler")
        return self._exact_sampler(rng)

    def reset_gradient_count(self) -> None:
        self.gradient_evaluations = 0

    def __repr__(self) -> str:
        return f"Target({self.name!r}, dim={self.dim})"


def diagonal_gaussian(omegas, name: str | None = None) -> Target:
    """Product of unit-mass oscillators: V(q) = sum_j omega_j^2 q_j^2 / 2.

    The stationary marginal of q_j is N(0, 1/omega_j^2), which is what the
    exact sampler draws.
    """
    om = np.atleast_1d(np.asarray(omegas, dtype=float))
    if om.ndim != 1 or om.size == 0:
        raise ValueError("omegas must be a non-empty 1-D array")
    if not np.all(np.isfinite(om)) or np.any(om <= 0.0):
        raise ValueError("omegas must be finite and positive")
    om2 = om * om

    def value(q):
        return 0.5 * np.sum(om2 * q * q)

    def grad(q):
        return om2 * q

    def sample(rng):
        return rng.standard_normal(om.size) / om

    label = name if name is not None else "diag:" + ",".join(f"{w:g}" for w in om)
    return Target(label, om.size, value, grad, exact_sampler=sample, omegas=om)


def gaussian_chain(d: int) -> Target:
    """d oscillators with frequencies 1, 2, ..., d.

    The usual stand-in for a multiscale Gaussian: the stiffest coordinate
    fixes the step size while the softest sets the travel distance.
    """
    d = int(d)
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    t = diagonal_gaussian(np.arange(1.0, d + 1.0), name=f"chain:{d}")
    return t


def double_well(name: str = "dwell") -> Target:
    """One-dimensional quartic double well V(q) = q^4 - q^2.

    Minima at q = +-sqrt(1/2) with V = -1/4 and a barrier at the origin.
    No exact sampler; chains need burn-in.
    """

    def value(q):
        return np.sum(q ** 4 - q ** 2)

    def grad(q):
        return 4.0 * q ** 3 - 2.0 * q

    return Target(name, 1, value, grad)


def parse_target(text: str) -> Target:
    """Build a target from a CLI spec: chain:<d>, dwell, or diag:<w1,w2,...>."""
    s = text.strip()
    if s == "dwell":
        return double_well()
    if s.startswith("chain:"):
        try:
            d = int(s.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad chain dimension in {text!r}") from None
        return gaussian_chain(d)
    if s.startswith("diag:"):
        try:
            ws = [float(w) for w in s.split(":", 1)[1].split(",") if w.strip()]
        except ValueError:
            raise ValueError(f"bad frequency list in {text!r}") from None
        return diagonal_gaussian(ws)
    raise ValueError(
        f"unknown target {text!r}; expected chain:<d>, dwell, or diag:<w1,w2,...>"
    )
