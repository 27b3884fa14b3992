"""Hybrid Monte Carlo driven by palindromic splitting integrators.

One Markov step: draw a fresh momentum p ~ N(0, I), jitter the step size
once (h = h0 * (1 + u), u uniform on +-jitter), integrate a fixed number
of steps, and accept with probability min(1, exp(-delta)) where delta is
the energy error of the proposal.  Momenta are discarded afterwards, so
the usual flip on rejection has no effect and is omitted.

Gradient accounting: the gradient at the current state is carried across
proposals, so a proposal costs exactly stage_count * steps_per_proposal
full-gradient evaluations whether the scheme leads with a kick or a
drift.  Kick-leading schemes pay one extra seed evaluation per chain.

Diagonal Gaussian targets can run through a fused numba kernel; it is
arithmetically identical to the numpy path, element for element, and is
used automatically when numba is importable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import harmonic
from .rng import make_rng
from .schemes import KIND_DRIFT, KIND_KICK, SplittingScheme
from .targets import Target

__all__ = [
    "HmcConfig",
    "ChainSummary",
    "StepRecord",
    "NonFiniteStateError",
    "hamiltonian",
    "integrate",
    "hmc_run",
    "expected_energy_error_harmonic",
    "jitter_averaged_energy_error",
    "reversibility_check",
    "volume_check",
]


class NonFiniteStateError(RuntimeError):
    """The integrator state left the representable range."""

    def __init__(self, step: int, message: str | None = None):
        self.step = int(step)
        super().__init__(message or f"state became non-finite during step {step}")


class StepRecord(NamedTuple):
    step: int
    h_used: float
    delta: float
    accepted: bool


@dataclass(frozen=True)
class HmcConfig:
    h0: float
    steps_per_proposal: int
    chain_length: int
    jitter: float = 0.2
    burn_in: int = 0
    seed: int = 0
    stream: int = 0
    start: np.ndarray | None = None

    def __post_init__(self):
        if not (self.h0 > 0.0 and math.isfinite(self.h0)):
            raise ValueError(f"h0 must be positive and finite, got {self.h0!r}")
        if not (0.0 <= self.jitter < 1.0):
            raise ValueError(f"jitter must lie in [0, 1), got {self.jitter!r}")
        if self.steps_per_proposal < 1:
            raise ValueError("steps_per_proposal must be at least 1")
        if self.chain_length < 1:
            raise ValueError("chain_length must be at least 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")


@dataclass(frozen=True)
class ChainSummary:
    """Post-burn-in chain statistics.

    Energy-error means run over proposals with finite delta;
    divergent_proposals counts the rest (each of those was rejected).
    per_step_records is a tuple of StepRecord or None when not recorded.
    """

    accepted_fraction: float
    mean_energy_error: float
    mean_squared_energy_error: float
    gradient_evaluations: int
    n_proposals: int
    divergent_proposals: int
    per_step_records: tuple | None = None

    def as_dict(self) -> dict:
        def clean(x):
            return float(x) if math.isfinite(x) else None

        return {
            "accepted_fraction": float(self.accepted_fraction),
            "mean_energy_error": clean(self.mean_energy_error),
            "mean_squared_energy_error": clean(self.mean_squared_energy_error),
            "gradient_evaluations": int(self.gradient_evaluations),
            "n_proposals": int(self.n_proposals),
            "divergent_proposals": int(self.divergent_proposals),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent)


def hamiltonian(target: Target, q: np.ndarray, p: np.ndarray) -> float:
    return target.value(q) + 0.5 * float(np.dot(p, p))


# ---------------------------------------------------------------------------
# stepping


def _fused_diag_steps(q, p, g, om2, coeffs, is_drift, n_steps, g_valid):
    evals = 0
    n = q.shape[0]
    for s in range(n_steps):
        for k in range(coeffs.shape[0]):
            t = coeffs[k]
            if is_drift[k]:
                for i in range(n):
                    q[i] = q[i] + t * p[i]
                g_valid = False
            else:
                if not g_valid:
                    for i in range(n):
                        g[i] = om2[i] * q[i]
                    evals += 1
                    g_valid = True
                for i in range(n):
                    p[i] = p[i] - t * g[i]
        ok = True
        for i in range(n):
            if not (math.isfinite(q[i]) and math.isfinite(p[i])):
                ok = False
                break
        if not ok:
            return evals, s, g_valid
    return evals, -1, g_valid


_FUSED_KERNEL = None
_FUSED_UNAVAILABLE = False


def _get_fused_kernel():
    global _FUSED_KERNEL, _FUSED_UNAVAILABLE
    if _FUSED_KERNEL is None and not _FUSED_UNAVAILABLE:
        try:
            from numba import njit
        except ImportError:
            _FUSED_UNAVAILABLE = True
            return None
        _FUSED_KERNEL = njit(cache=True)(_fused_diag_steps)
    return _FUSED_KERNEL


def _drive(scheme, target, q, p, h, n_steps, grad0=None, fast=None):
    """Advance n_steps steps.  Returns (q, p, grad_at_end_or_None, bad_step).

    bad_step is -1 on success, else the index of the first step after
    which the state stopped being finite.  grad_at_end is only non-None
    when the final substep was a kick, where it comes for free.
    """
    q = np.array(q, dtype=float).reshape(-1)
    p = np.array(p, dtype=float).reshape(-1)
    if q.shape != (target.dim,) or p.shape != (target.dim,):
        raise ValueError(
            f"state shape {q.shape}/{p.shape} does not match target dim {target.dim}"
        )
    can_fuse = target.omega_sq is not None and _get_fused_kernel() is not None
    if fast is True and not can_fuse:
        raise ValueError(
            "fast path needs a diagonal Gaussian target and an importable numba"
        )
    use_fast = can_fuse if fast is None else bool(fast)
    if use_fast:
        return _drive_fused(scheme, target, q, p, h, n_steps, grad0)
    return _drive_python(scheme, target, q, p, h, n_steps, grad0)


def _drive_python(scheme, target, q, p, h, n_steps, grad0):
    coeffs = [c * float(h) for c in scheme.coefficients]
    kinds = scheme.kinds
    g = grad0
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(n_steps):
            for kind, t in zip(kinds, coeffs):
                if kind == KIND_DRIFT:
                    q = q + t * p
                    g = None
                else:
                    if g is None:
                        g = target.grad(q)
                    p = p - t * g
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
                return q, p, None, s
    return q, p, g, -1


def _drive_fused(scheme, target, q, p, h, n_steps, grad0):
    kernel = _get_fused_kernel()
    coeffs = np.array(scheme.coefficients, dtype=float) * float(h)
    is_drift = np.array([k == KIND_DRIFT for k in scheme.kinds], dtype=np.bool_)
    if grad0 is not None:
        g = np.array(grad0, dtype=float).reshape(-1)
        valid = True
    else:
        g = np.zeros_like(q)
        valid = False
    evals, bad, valid = kernel(q, p, g, target.omega_sq, coeffs, is_drift,
                               int(n_steps), valid)
    target.gradient_evaluations += int(evals)
    g_out = g if (valid and bad < 0) else None
    return q, p, g_out, int(bad)


def integrate(scheme: SplittingScheme, target: Target, q, p, h: float,
              n_steps: int, fast: bool | None = None):
    """Endpoint (q, p) after n_steps steps of `scheme` at step size h.

    Raises NonFiniteStateError (carrying .step) if the state blows up.
    """
    qn, pn, _, bad = _drive(scheme, target, q, p, h, n_steps, None, fast)
    if bad >= 0:
        raise NonFiniteStateError(bad)
    return qn, pn


# ---------------------------------------------------------------------------
# the chain


def hmc_run(scheme: SplittingScheme, target: Target, config: HmcConfig,
            record: bool = False, fast: bool | None = None) -> ChainSummary:
    """Run burn_in + chain_length Markov steps and summarize the kept part.

    The start state is config.start when given, else an exact draw from
    the target when one exists, else the origin.  One uniform step-size
    jitter and one acceptance uniform are consumed per Markov step
    regardless of the outcome, so traces with equal seeds are comparable
    across schemes.
    """
    rng = make_rng(config.seed, config.stream)
    if config.start is not None:
        q = np.array(config.start, dtype=float).reshape(-1)
        if q.shape != (target.dim,):
            raise ValueError(
                f"start shape {q.shape} does not match target dim {target.dim}"
            )
    elif target.has_exact_sampler:
        q = target.sample_exact(rng)
    else:
        q = np.zeros(target.dim)

    leads_with_kick = scheme.kinds[0] == KIND_KICK
    ev_start = target.gradient_evaluations
    v_cur = target.value(q)
    g_cur = target.grad(q) if leads_with_kick else None

    n_kept = 0
    n_accepted = 0
    n_divergent = 0
    sum_delta = 0.0
    sum_delta_sq = 0.0
    n_finite = 0
    records = [] if record else None

    total = config.burn_in + config.chain_length
    for k in range(total):
        u = float(rng.uniform(-config.jitter, config.jitter))
        h = config.h0 * (1.0 + u)
        p = rng.standard_normal(target.dim)
        h0_energy = v_cur + 0.5 * float(np.dot(p, p))
        qn, pn, gn, bad = _drive(scheme, target, q, p, h,
                                 config.steps_per_proposal, g_cur, fast)
        if bad >= 0:
            delta = math.inf
            v_new = math.nan
        else:
            # Overflow in V at a wildly divergent endpoint is a rejection,
            # not a warning.
            with np.errstate(over="ignore", invalid="ignore"):
                v_new = target.value(qn)
            h1_energy = v_new + 0.5 * float(np.dot(pn, pn))
            delta = h1_energy - h0_energy
            if not math.isfinite(delta):
                delta = math.inf
        coin = float(rng.random())
        if delta <= 0.0:
            accept = True
        elif math.isfinite(delta):
            accept = coin < math.exp(-delta)
        else:
            accept = False
        if accept:
            q = qn
            v_cur = v_new
            if leads_with_kick:
                g_cur = gn
        if k >= config.burn_in:
            n_kept += 1
            if accept:
                n_accepted += 1
            if math.isfinite(delta):
                sum_delta += delta
                sum_delta_sq += delta * delta
                n_finite += 1
            else:
                n_divergent += 1
            if records is not None:
                records.append(StepRecord(k - config.burn_in, h, delta, accept))

    return ChainSummary(
        accepted_fraction=n_accepted / n_kept,
        mean_energy_error=(sum_delta / n_finite) if n_finite else math.nan,
        mean_squared_energy_error=(sum_delta_sq / n_finite) if n_finite else math.nan,
        gradient_evaluations=target.gradient_evaluations - ev_start,
        n_proposals=n_kept,
        divergent_proposals=n_divergent,
        per_step_records=tuple(records) if records is not None else None,
    )


# ---------------------------------------------------------------------------
# oracles and sanity checks


def expected_energy_error_harmonic(scheme: SplittingScheme, h: float,
                                   n_steps: int, omegas) -> float:
    """Exact stationary mean of delta for a diagonal Gaussian target.

    For each frequency the one-proposal mean is sin(n theta)^2 * rho at
    step size omega * h, and the coordinates add.  This is the quantity
    Metropolis acceptance actually responds to, and the oracle every
    sampler invariant is checked against.
    """
    total = 0.0
    for j, w in enumerate(np.atleast_1d(np.asarray(omegas, dtype=float))):
        d = harmonic.diagnostics(scheme, w * float(h))
        if not d.stable or not math.isfinite(d.rho):
            raise harmonic.InstabilityError(
                f"{scheme.label}: unstable at frequency index {j} "
                f"(omega*h={w * float(h)!r})"
            )
        s = math.sin(n_steps * d.theta)
        total += s * s * d.rho
    return total


def jitter_averaged_energy_error(scheme: SplittingScheme, h0: float,
                                 n_steps: int, omegas, jitter: float) -> float:
    """Stationary mean of delta with the step size jittered around h0.

    Averages expected_energy_error_harmonic over h = h0 (1 + u) with u
    uniform on [-jitter, jitter].  Per frequency: when the phase
    n_steps * theta sweeps many periods across the jitter window, the
    sin^2 factor equidistributes and the term reduces to half the
    averaged rho (the dropped oscillatory part is O(1/sweep)); slow
    phases are integrated by Gauss-Legendre with enough nodes for the
    sweep actually present.
    """
    if jitter == 0.0:
        return expected_energy_error_harmonic(scheme, h0, n_steps, omegas)
    if not (0.0 < jitter < 1.0):
        raise ValueError(f"jitter must lie in [0, 1), got {jitter!r}")
    total = 0.0
    base_x, base_w = np.polynomial.legendre.leggauss(32)
    for j, w in enumerate(np.atleast_1d(np.asarray(omegas, dtype=float))):
        lo = w * h0 * (1.0 - jitter)
        hi = w * h0 * (1.0 + jitter)
        d_lo = harmonic.diagnostics(scheme, lo)
        d_hi = harmonic.diagnostics(scheme, hi)
        for d in (d_lo, d_hi):
            if not d.stable or not math.isfinite(d.rho):
                raise harmonic.InstabilityError(
                    f"{scheme.label}: unstable inside jitter window at "
                    f"frequency index {j}"
                )
        sweep = n_steps * abs(d_hi.theta - d_lo.theta)
        if sweep >= 60.0:
            vals = []
            for x in base_x:
                h = w * h0 * (1.0 + jitter * x)
                vals.append(harmonic.diagnostics(scheme, h).rho)
            total += 0.25 * float(np.dot(base_w, vals))
        else:
            nodes = int(min(256, 48 + 4 * sweep))
            xs, ws = np.polynomial.legendre.leggauss(nodes)
            acc = 0.0
            for x, gw in zip(xs, ws):
                h = w * h0 * (1.0 + jitter * x)
                d = harmonic.diagnostics(scheme, h)
                s = math.sin(n_steps * d.theta)
                acc += gw * s * s * d.rho
            total += 0.5 * acc
    return total


def reversibility_check(scheme: SplittingScheme, target: Target, q, p,
                        h: float, n_steps: int = 8) -> float:
    """Max deviation of flip-integrate-flip-integrate from the identity."""
    q = np.asarray(q, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    q1, p1 = integrate(scheme, target, q, p, h, n_steps)
    q2, p2 = integrate(scheme, target, q1, -p1, h, n_steps)
    return max(float(np.max(np.abs(q2 - q))), float(np.max(np.abs(p2 + p))))


def volume_check(scheme: SplittingScheme, target: Target, q, p, h: float,
                 n_steps: int = 1, eps: float = 1e-5) -> float:
    """|det(Jacobian) - 1| of the n_steps-step map, by central differences."""
    q = np.asarray(q, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    d = q.size
    z0 = np.concatenate([q, p])
    jac = np.empty((2 * d, 2 * d))
    for k in range(2 * d):
        zp = z0.copy()
        zm = z0.copy()
        zp[k] += eps
        zm[k] -= eps
        qp, pp = integrate(scheme, target, zp[:d], zp[d:], h, n_steps)
        qm, pm = integrate(scheme, target, zm[:d], zm[d:], h, n_steps)
        jac[:, k] = (np.concatenate([qp, pp]) - np.concatenate([qm, pm])) / (2.0 * eps)
    return abs(float(np.linalg.det(jac)) - 1.0)
