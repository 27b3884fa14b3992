"""Coefficient optimization for palindromic splitting schemes.

Three minimax problems (minimize the sup of rho over a working range of
step sizes) and one error-constant problem (minimize a norm of the leading
modified-Hamiltonian coefficients):

* two-stage: one free coefficient a1, closed-form rho, scan plus
  golden-section;
* three-stage: restricted to the one-parameter family with a double
  stability root at h_hat, line search in h_hat over both branches;
* four-stage: three free coefficients reduced to the two-parameter
  tangency manifold A(h_hat) = -1, B(h_hat) + C(h_hat) = 0, searched by
  a coarse scan over (a1, h_hat) plus Nelder-Mead refinement;
* error metric: minimize k31^2 + k32^2 (or the starred variant) over the
  two-stage family using the closed-form constants.

Every entry point returns an OptimizationReport that serializes to JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from . import harmonic
from .schemes import (
    Branch,
    SplittingScheme,
    double_root_pair,
    make_four_stage,
    make_three_stage,
    make_three_stage_from_hhat,
    make_two_stage,
)

__all__ = [
    "BracketError",
    "ConvergenceError",
    "OptimizationReport",
    "TWO_STAGE_RANGE_SUP",
    "optimize_two_stage",
    "optimize_three_stage",
    "optimize_four_stage",
    "solve_double_root_three_stage",
    "minimize_error_metric_two_stage",
]

# No two-stage member is stable on (0, h_bar] once h_bar reaches 2*sqrt(2):
# the a1 = 1/4 member has the widest stability interval and that is it.
TWO_STAGE_RANGE_SUP = 2.0 * math.sqrt(2.0)


class BracketError(RuntimeError):
    """No feasible bracket for a 1-D search."""


class ConvergenceError(RuntimeError):
    """An iterative search stopped without meeting its tolerance."""


@dataclass(frozen=True)
class OptimizationReport:
    family: str
    argmin: tuple
    rho_norm_at_min: float
    h_bar: float
    double_root_location: float | None
    trace: tuple = field(default_factory=tuple)
    metric: str | None = None
    metric_value: float | None = None

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "argmin": [float(x) for x in self.argmin],
            "rho_norm_at_min": float(self.rho_norm_at_min),
            "h_bar": float(self.h_bar),
            "double_root_location": (
                None if self.double_root_location is None else float(self.double_root_location)
            ),
            "metric": self.metric,
            "metric_value": (None if self.metric_value is None else float(self.metric_value)),
            "trace": [dict(t) for t in self.trace],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent)


def _golden_min(f: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-10, max_iter: int = 200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > tol and it < max_iter:
        if f1 > f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        it += 1
    if f1 <= f2:
        return x1, f1
    return x2, f2


# ---------------------------------------------------------------------------
# two-stage family


def _two_stage_stability_bound(a1: float) -> float:
    """Right end of the stability interval of the two-stage member a1."""
    bounds = []
    if a1 > 0.0:
        bounds.append(math.sqrt(2.0 / a1))
    c = 0.5 - a1
    if c > 0.0:
        bounds.append(math.sqrt(2.0 / c))
    return min(bounds) if bounds else math.inf


def _two_stage_norm(a1: float, h_bar: float, n: int = 4096) -> float:
    """sup of the closed-form rho over (0, h_bar] for coefficient a1."""
    if h_bar >= _two_stage_stability_bound(a1):
        return math.inf
    hs = np.linspace(h_bar / n, h_bar, n)
    h2 = hs * hs
    c = 0.5 - a1
    den = 8.0 * (2.0 - a1 * h2) * (2.0 - c * h2) * (1.0 - a1 * c * h2)
    poly = 2.0 * a1 * a1 * c * h2 + 4.0 * a1 * a1 - 6.0 * a1 + 1.0
    rho = h2 * h2 * poly * poly / den
    i = int(np.argmax(rho))
    lo = hs[i - 1] if i > 0 else hs[0] * 0.5
    hi = hs[i + 1] if i + 1 < n else h_bar
    x, v = _golden_min(lambda h: -harmonic.rho_closed_form_two_stage(a1, h), lo, hi,
                       tol=1e-11 * h_bar)
    return max(float(rho[i]), -v)


def _double_root_location(scheme: SplittingScheme, h_bar: float) -> float | None:
    """Step size in (0, h_bar] where A_h grazes -1, if there is one."""
    n = 2048
    hs = np.linspace(h_bar / n, h_bar, n)
    a, _, _, _ = harmonic._update_entries_grid(scheme, hs)
    v = a + 1.0
    i = int(np.argmin(v))
    if v[i] > 1e-4:
        return None
    lo = hs[i - 1] if i > 0 else hs[0] * 0.5
    hi = hs[i + 1] if i + 1 < n else h_bar

    def depth(h: float) -> float:
        return harmonic.harmonic_update(scheme, h).a_h + 1.0

    x, val = _golden_min(depth, float(lo), float(hi), tol=1e-12 * h_bar)
    if abs(val) <= 1e-8:
        return float(x)
    return None


def optimize_two_stage(h_bar: float) -> OptimizationReport:
    """Coefficient a1 minimizing sup rho over (0, h_bar] in the two-stage family.

    Requires 0 < h_bar < 2*sqrt(2); outside that no member is stable on the
    whole range.  Coarse scan of the feasible a1 interval, then golden
    section on the bracketed minimum.
    """
    if not (0.0 < h_bar < TWO_STAGE_RANGE_SUP):
        raise ValueError(
            f"h_bar must lie in (0, {TWO_STAGE_RANGE_SUP!r}), got {h_bar!r}"
        )
    lo = max(0.0, 0.5 - 2.0 / (h_bar * h_bar))
    hi = min(0.5, 2.0 / (h_bar * h_bar))
    xs = np.linspace(lo, hi, 514)[1:-1]
    vals = np.array([_two_stage_norm(float(x), h_bar, n=1024) for x in xs])
    if not np.any(np.isfinite(vals)):
        raise BracketError(f"no stable two-stage member found for h_bar={h_bar!r}")
    k = int(np.argmin(vals))
    b_lo = xs[k - 1] if k > 0 else lo + 1e-12
    b_hi = xs[k + 1] if k + 1 < len(xs) else hi - 1e-12
    a_star, _ = _golden_min(lambda a: _two_stage_norm(a, h_bar), float(b_lo), float(b_hi),
                            tol=1e-10)
    scheme = make_two_stage(a_star)
    norm = harmonic.rho_norm(scheme, h_bar)
    trace = (
        {"phase": "scan", "params": [float(xs[k])], "value": float(vals[k])},
        {"phase": "golden", "params": [float(a_star)], "value": float(norm)},
    )
    return OptimizationReport(
        family="two_stage",
        argmin=(float(a_star),),
        rho_norm_at_min=float(norm),
        h_bar=float(h_bar),
        double_root_location=_double_root_location(scheme, h_bar),
        trace=trace,
    )


# ---------------------------------------------------------------------------
# three-stage double-root family


def solve_double_root_three_stage(h_hat: float, branch: Branch | str = Branch.MINUS):
    """(a1, b1) of the three-stage member whose A_h has a double root at h_hat.

    Double root means A(h_hat) = -1 with A'(h_hat) = 0, so the stability
    polynomial grazes the boundary instead of crossing it.  Both are
    verified numerically after the closed-form solve.
    """
    if isinstance(branch, str):
        branch = Branch(branch)
    a1, b1 = double_root_pair(h_hat, branch)
    scheme = make_three_stage(a1, b1)
    u = harmonic.harmonic_update(scheme, h_hat)
    if abs(u.a_h + 1.0) > 1e-9:
        raise ConvergenceError(
            f"double-root solve at h_hat={h_hat!r}: A residual {u.a_h + 1.0:.3e}"
        )
    d = 1e-4
    slope = (harmonic.harmonic_update(scheme, h_hat + d).a_h
             - harmonic.harmonic_update(scheme, h_hat - d).a_h) / (2.0 * d)
    if abs(slope) > 1e-6:
        raise ConvergenceError(
            f"double-root solve at h_hat={h_hat!r}: tangency slope {slope:.3e}"
        )
    return a1, b1


def optimize_three_stage(h_bar: float = 3.0) -> OptimizationReport:
    """Three-stage coefficients minimizing sup rho over (0, h_bar].

    The search space is the one-parameter double-root family (both
    branches): imposing the tangency A(h_hat) = -1 is what buys the wide
    stability interval, and the minimax point lies on that family.  Line
    search over h_hat: coarse scan, then golden section with the accurate
    sup on the winning bracket.
    """
    if h_bar <= 0.0:
        raise ValueError(f"h_bar must be positive, got {h_bar!r}")
    hh_lo, hh_hi = 1.5, 3.0
    grid = np.linspace(hh_lo, hh_hi, 181)
    best = (math.inf, None, None)  # (value, h_hat, branch)
    trace = []
    for branch in (Branch.MINUS, Branch.PLUS):
        for hh in grid:
            try:
                scheme = make_three_stage_from_hhat(float(hh), branch)
            except (ValueError, AssertionError):
                continue
            val = harmonic.rho_norm(scheme, h_bar, grid_points=512, refine=False)
            if val < best[0]:
                best = (val, float(hh), branch)
    if best[1] is None:
        raise BracketError(f"no stable double-root member on (0, {h_bar!r}]")
    _, hh0, branch = best
    trace.append({"phase": "scan", "branch": branch.value,
                  "params": [hh0], "value": float(best[0])})
    step = float(grid[1] - grid[0])
    b_lo = max(hh_lo, hh0 - step)
    b_hi = min(hh_hi, hh0 + step)

    def objective(hh: float) -> float:
        return harmonic.rho_norm(make_three_stage_from_hhat(hh, branch), h_bar)

    hh_star, val_star = _golden_min(objective, b_lo, b_hi, tol=1e-9)
    a1, b1 = double_root_pair(hh_star, branch)
    trace.append({"phase": "golden", "branch": branch.value,
                  "params": [float(hh_star)], "value": float(val_star)})
    return OptimizationReport(
        family="three_stage_double_root",
        argmin=(float(a1), float(b1)),
        rho_norm_at_min=float(val_star),
        h_bar=float(h_bar),
        double_root_location=float(hh_star),
        trace=tuple(trace),
    )


# ---------------------------------------------------------------------------
# four-stage family


def _four_stage_update(a1, a2, b1, h):
    """Update-matrix entries (m00, m01, m10) for the four-stage chain.

    Drift-first layout (a1, b1, a2, b2, a3, b2, a2, b1, a1) with b2 and a3
    fixed by consistency; palindromy makes the fourth entry equal m00.
    Accumulators start as plain floats so scalar arguments never touch
    numpy (the tangency solver calls this tens of thousands of times);
    array arguments promote on first contact and broadcast from there.
    """
    b2 = 0.5 - b1
    a3 = 1.0 - 2.0 * a1 - 2.0 * a2
    stages = ((True, a1), (False, b1), (True, a2), (False, b2), (True, a3),
              (False, b2), (True, a2), (False, b1), (True, a1))
    m00 = 1.0
    m11 = 1.0
    m01 = 0.0
    m10 = 0.0
    for is_drift, c in stages:
        t = c * h
        if is_drift:
            m00 = m00 + t * m10
            m01 = m01 + t * m11
        else:
            m10 = m10 - t * m00
            m11 = m11 - t * m01
    return m00, m01, m10


def _tangency_residual(x, a1: float, h_hat: float):
    a2, b1 = x
    a, b, c = _four_stage_update(float(a1), float(a2), float(b1), float(h_hat))
    return [float(a + 1.0), float(b + c)]


def _tangency_system(a2: float, b1: float, a1: float, h: float):
    """Residuals (A+1, B+C) and their exact Jacobian in (a2, b1).

    Forward-mode accumulation through the stage loop: each shear factor
    carries d(coefficient)/d(a2) and /d(b1) from the consistency relations
    b2 = 1/2 - b1, a3 = 1 - 2 a1 - 2 a2.  Near the root the two residual
    gradients are almost parallel, and a finite-difference Jacobian loses
    the independent component to truncation noise; the exact one keeps
    Newton quadratic all the way to the float floor.
    """
    b2 = 0.5 - b1
    a3 = 1.0 - 2.0 * a1 - 2.0 * a2
    # (is_drift, coefficient, d/da2, d/db1)
    stages = ((True, a1, 0.0, 0.0), (False, b1, 0.0, 1.0),
              (True, a2, 1.0, 0.0), (False, b2, 0.0, -1.0),
              (True, a3, -2.0, 0.0), (False, b2, 0.0, -1.0),
              (True, a2, 1.0, 0.0), (False, b1, 0.0, 1.0),
              (True, a1, 0.0, 0.0))
    m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
    p00 = p01 = p10 = p11 = 0.0  # d/da2
    q00 = q01 = q10 = q11 = 0.0  # d/db1
    for is_drift, c, dca, dcb in stages:
        t = c * h
        if is_drift:
            p00, p01 = p00 + dca * h * m10 + t * p10, p01 + dca * h * m11 + t * p11
            q00, q01 = q00 + dcb * h * m10 + t * q10, q01 + dcb * h * m11 + t * q11
            m00, m01 = m00 + t * m10, m01 + t * m11
        else:
            p10, p11 = p10 - dca * h * m00 - t * p00, p11 - dca * h * m01 - t * p01
            q10, q11 = q10 - dcb * h * m00 - t * q00, q11 - dcb * h * m01 - t * q01
            m10, m11 = m10 - t * m00, m11 - t * m01
    ra = m00 + 1.0
    rb = m01 + m10
    return (ra, rb), ((p00, q00), (p01 + p10, q01 + q10))


def _tangency_seeds(a1: float, h_hat: float, n: int = 24, keep: int = 4):
    """Approximate (a2, b1) roots of the tangency system from a grid scan."""
    g = np.linspace(0.03, 0.47, n)
    a2g, b1g = np.meshgrid(g, g, indexing="ij")
    a, b, c = _four_stage_update(a1, a2g, b1g, h_hat)
    res = np.abs(a + 1.0) + 0.3 * np.abs(b + c)
    res[1.0 - 2.0 * a1 - 2.0 * a2g <= 0.0] = np.inf
    out = []
    for k in np.argsort(res, axis=None):
        i, j = divmod(int(k), n)
        if not math.isfinite(res[i, j]):
            break
        if any(abs(g[i] - p[0]) < 0.04 and abs(g[j] - p[1]) < 0.04 for p in out):
            continue
        out.append((float(g[i]), float(g[j])))
        if len(out) >= keep:
            break
    return out


def _solve_tangency(a1: float, h_hat: float):
    """Positive-coefficient solutions of A(h_hat) = -1, B(h_hat) + C(h_hat) = 0.

    By the determinant identity A^2 - BC = 1 the pair is equivalent to a
    double root of A = -1 at h_hat, and zeroing B + C directly is what
    keeps rho finite through the tangency: a residual offset gamma in
    B + C puts a gamma^2 / (1 - A^2) spike on the norm there.

    Damped Newton from every scanned seed; each distinct root reached is
    reported.  The scan runs on every call so the result depends only on
    (a1, h_hat); a cheaper warm-started variant turned out to make
    downstream objectives history-dependent, which derails simplex
    refinement.
    """
    sols = []
    for x0 in _tangency_seeds(a1, h_hat):
        sol = _damped_newton_tangency(x0, a1, h_hat)
        if sol is None:
            continue
        a2, b1 = sol
        if min(a2, b1, 0.5 - b1, 1.0 - 2.0 * a1 - 2.0 * a2) <= 0.0:
            continue
        # Distinct branches sit >= 3e-2 apart; anything closer is the same
        # root reached along two paths through the ill-conditioned sliver.
        if any(abs(a2 - p[0]) < 1e-4 and abs(b1 - p[1]) < 1e-4 for p in sols):
            continue
        sols.append((a2, b1))
    return sols


def _damped_newton_tangency(x0, a1: float, h_hat: float, max_iter: int = 30):
    """Newton with halving line search on the two tangency equations.

    Driving both residuals to the float floor matters: the A + 1 residual
    bounds how far the dip of A sinks below -1 relative to the 1e-10
    stability slack, and any leftover B + C offset shows up squared in
    rho at the tangency.  No early exit on "small enough" either: the two
    equations are nearly dependent close to the root, which smears a
    sliver of points with residuals below any loose gate, and where a
    solver lands on that sliver would otherwise leak noise into the
    downstream sup-norm objective.
    """
    a2, b1 = float(x0[0]), float(x0[1])
    ra = rb = math.inf
    for _ in range(max_iter):
        (ra, rb), ((j11, j12), (j21, j22)) = _tangency_system(a2, b1, a1, h_hat)
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            break
        da = (ra * j22 - rb * j12) / det
        db = (rb * j11 - ra * j21) / det
        step = 1.0
        moved = False
        while step >= 1.0 / 64.0:
            na2, nb1 = a2 - step * da, b1 - step * db
            (nra, nrb), _ = _tangency_system(na2, nb1, a1, h_hat)
            if abs(nra) + abs(nrb) < abs(ra) + abs(rb):
                a2, b1, ra, rb = na2, nb1, nra, nrb
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    if abs(ra) <= 1e-12 and abs(rb) <= 1e-12:
        return (a2, b1)
    return None


def _manifold_value(a1: float, h_hat: float, h_bar: float,
                    grid_points: int = 768, refine: bool = False):
    """Best sup-norm over the tangency branches at (a1, h_hat)."""
    best = (math.inf, None)
    for a2, b1 in _solve_tangency(a1, h_hat):
        val = harmonic.rho_norm(make_four_stage(a1, a2, b1), h_bar,
                                grid_points=grid_points, refine=refine)
        if val < best[0]:
            best = (float(val), (a2, b1))
    return best


def _line_min_a1(hh: float, center: float, half_width: float, h_bar: float,
                 tol: float = 1e-7):
    """Minimize the manifold value over a1 on a line of fixed h_hat.

    The valley floor is a few 1e-4 wide in a1, so the bracket is sampled
    at 1e-4 spacing first and golden section then tightens around the
    best sample.  Returns (value, a1, (a2, b1)); value is inf and the
    rest None when no stable branch exists anywhere on the line.
    """
    n = max(9, int(round(2.0 * half_width / 1e-4)) + 1)
    xs = np.linspace(center - half_width, center + half_width, n)
    best = (math.inf, None, None)
    for x in xs:
        val, sol = _manifold_value(float(x), hh, h_bar)
        if sol is not None and val < best[0]:
            best = (float(val), float(x), sol)
    if best[1] is None:
        return best
    step = float(xs[1] - xs[0])

    def f(x: float) -> float:
        val, sol = _manifold_value(x, hh, h_bar)
        return val if sol is not None else math.inf

    x, fx = _golden_min(f, best[1] - step, best[1] + step, tol=tol)
    if math.isfinite(fx) and fx < best[0]:
        val, sol = _manifold_value(float(x), hh, h_bar)
        if sol is not None and val < best[0]:
            best = (float(val), float(x), sol)
    return best


def _march_valley(seed, h_bar: float):
    """Follow a valley floor in (a1, h_hat) by continuation in h_hat.

    Nelder-Mead funnels into a valley from grid seeds but stalls once
    progress means threading the curved floor, whose walls sit a few
    1e-4 apart in a1 while the floor itself crosses the whole search
    box.  From the stall point this walks h_hat in fixed steps, predicts
    a1 from the running floor slope, re-minimizes over a1 on each line,
    and keeps the best point seen.  A golden pass over h_hat at the end
    brings the minimum below the step size.  Deterministic throughout.
    """
    delta = 2e-3
    width = 8e-4
    boot_width = 4e-3
    val0, a1_0, hh_0, sol0 = (seed[0], seed[1], seed[2], seed[3])
    v, a, s = _line_min_a1(hh_0, a1_0, boot_width, h_bar)
    base = (v, a, hh_0, s) if a is not None and v < val0 else seed
    best = base
    slope_best = 0.0
    for direction in (1.0, -1.0):
        prev_v, prev_a, prev_h = base[0], base[1], base[2]
        slope = 0.0
        have_slope = False
        rises = 0
        for _ in range(64):
            hh = prev_h + direction * delta
            if not 0.05 * h_bar < hh < h_bar:
                break
            w = width if have_slope else boot_width
            v, a, s = _line_min_a1(hh, prev_a + slope * direction * delta,
                                   w, h_bar)
            if a is None and w < boot_width:
                v, a, s = _line_min_a1(hh, prev_a, boot_width, h_bar)
            if a is None:
                break
            slope = (a - prev_a) / (hh - prev_h)
            have_slope = True
            if v < best[0]:
                best = (v, a, hh, s)
                slope_best = slope
                rises = 0
            elif v > prev_v:
                rises += 1
                if rises >= 2:
                    break
            else:
                rises = 0
            prev_v, prev_a, prev_h = v, a, hh
    b_val, b_a1, b_hh = best[0], best[1], best[2]

    def g(hh: float) -> float:
        v, a, _ = _line_min_a1(hh, b_a1 + slope_best * (hh - b_hh),
                               width, h_bar)
        return v if a is not None else math.inf

    hh, _ = _golden_min(g, b_hh - delta, b_hh + delta, tol=1e-6)
    v, a, s = _line_min_a1(hh, b_a1 + slope_best * (hh - b_hh), width,
                           h_bar, tol=1e-8)
    if a is not None and v < best[0]:
        best = (v, a, hh, s)
    return best


# Failed or unstable points inside Nelder-Mead return a finite wall so
# the simplex contracts back toward feasible ground.
_MANIFOLD_WALL = 1e3


def _nm_refine(seed, h_bar: float, dx_a: float, dx_h: float,
               accurate: bool, maxiter: int = 600):
    _, a1_0, hh_0, _ = seed

    def objective(x) -> float:
        a1, hh = float(x[0]), float(x[1])
        if a1 <= 0.0 or hh <= 0.0:
            return _MANIFOLD_WALL
        val, sol = _manifold_value(a1, hh, h_bar,
                                   grid_points=2048 if accurate else 768,
                                   refine=accurate)
        if sol is None or not math.isfinite(val):
            return _MANIFOLD_WALL
        return val

    simplex = np.array([[a1_0, hh_0],
                        [a1_0 + dx_a, hh_0],
                        [a1_0, hh_0 + dx_h]])
    r = minimize(objective, np.array([a1_0, hh_0]), method="Nelder-Mead",
                 options={"initial_simplex": simplex, "xatol": 1e-10,
                          "fatol": 1e-15, "maxiter": maxiter, "adaptive": True})
    a1, hh = (float(v) for v in r.x)
    val, sol = _manifold_value(a1, hh, h_bar, grid_points=2048, refine=True)
    if sol is None or not math.isfinite(val):
        return seed
    return (float(val), a1, hh, sol)


def optimize_four_stage(h_bar: float = 4.0) -> OptimizationReport:
    """Four-stage coefficients (a1, a2, b1) minimizing sup rho over (0, h_bar].

    Direct search over the raw coefficients fails here: the minimax point
    keeps A(h) tangent to -1 at an interior h_hat, and off that tangency
    manifold the stable pocket around the optimum is only about 1e-3 wide,
    far too small for grid seeding to hit.  So the problem is reduced to
    two parameters: for trial (a1, h_hat), solve the tangency system for
    (a2, b1) and take the best branch.  A coarse grid over (a1, h_hat)
    locates candidate valleys, Nelder-Mead funnels each seed into its
    valley, a continuation march follows the valley floor down to its
    h_hat minimum (the floors are curved channels a few 1e-4 wide, which
    stall a simplex long before the bottom), and the winner gets a final
    Nelder-Mead polish on the accurately refined sup.
    """
    if h_bar <= 0.0:
        raise ValueError(f"h_bar must be positive, got {h_bar!r}")
    a1_grid = np.linspace(0.02, 0.18, 33)
    hh_grid = np.linspace(0.50 * h_bar, 0.95 * h_bar, 37)
    cells = []
    for a1 in a1_grid:
        for hh in hh_grid:
            val, sol = _manifold_value(float(a1), float(hh), h_bar, grid_points=512)
            if sol is not None and math.isfinite(val):
                cells.append((val, float(a1), float(hh), sol))
    if not cells:
        raise BracketError(f"no stable tangency member on (0, {h_bar!r}]")
    cells.sort(key=lambda t: t[0])
    step_a = float(a1_grid[1] - a1_grid[0])
    step_h = float(hh_grid[1] - hh_grid[0])

    # Top cells separated by at least two grid steps, so distinct valleys
    # get their own refinement rather than one valley eating every slot.
    seeds = []
    for cell in cells:
        if any(abs(cell[1] - s[1]) < 2.0 * step_a and abs(cell[2] - s[2]) < 2.0 * step_h
               for s in seeds):
            continue
        seeds.append(cell)
        if len(seeds) >= 5:
            break
    trace = [{"phase": "scan", "params": [s[1], s[2]], "value": float(s[0])}
             for s in seeds]

    # March endpoints carry the grid-sampled sup, so candidates are ranked
    # on an accurate re-evaluation: near a floor the two agree to several
    # digits, but ranking on the cheap value would let a valley whose
    # narrow features the grid happens to miss win on luck.
    best = (math.inf, None, None, None)  # value, a1, h_hat, (a2, b1)
    for seed in seeds:
        stepped = _nm_refine(seed, h_bar, 0.4 * step_a, 0.1 * step_h,
                             accurate=False, maxiter=400)
        marched = _march_valley(stepped, h_bar)
        val, sol = _manifold_value(marched[1], marched[2], h_bar,
                                   grid_points=2048, refine=True)
        if sol is None or not math.isfinite(val):
            val, sol = marched[0], marched[3]
        settled = (float(val), marched[1], marched[2], sol)
        trace.append({"phase": "refine",
                      "params": [settled[1], settled[2]],
                      "value": float(settled[0])})
        if settled[0] < best[0]:
            best = settled
    best = _nm_refine(best, h_bar, 1e-4, 1e-4, accurate=True, maxiter=300)
    trace.append({"phase": "polish",
                  "params": [best[1], best[2]],
                  "value": float(best[0])})
    val_star, a1_star, hh_star, (a2_star, b1_star) = best
    scheme = make_four_stage(a1_star, a2_star, b1_star)
    norm = harmonic.rho_norm(scheme, h_bar)
    return OptimizationReport(
        family="four_stage",
        argmin=(float(a1_star), float(a2_star), float(b1_star)),
        rho_norm_at_min=float(norm),
        h_bar=float(h_bar),
        double_root_location=float(hh_star),
        trace=tuple(trace),
    )


# ---------------------------------------------------------------------------
# error-constant metrics on the two-stage family


def _k31_two_stage(a1: float) -> float:
    return (6.0 * a1 * a1 - 6.0 * a1 + 1.0) / 12.0


def _k32_two_stage(a1: float) -> float:
    return (1.0 - 6.0 * a1) / 24.0


_METRICS = {
    "E": lambda a1: _k31_two_stage(a1) ** 2 + _k32_two_stage(a1) ** 2,
    "Estar": lambda a1: _k31_two_stage(a1) ** 2
    + (_k31_two_stage(a1) + _k32_two_stage(a1)) ** 2,
}


def minimize_error_metric_two_stage(metric: str = "E") -> OptimizationReport:
    """a1 minimizing an error-constant metric over the two-stage family.

    metric "E" is k31^2 + k32^2; "Estar" replaces k32 by k31 + k32 (the
    combination driving the energy-error expansion when positions and
    momenta are weighted together).  Closed-form constants, so the search
    is a scan plus golden section plus a secant polish on the central
    difference of the metric.
    """
    key = "Estar" if metric in ("Estar", "E*") else metric
    if key not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected 'E' or 'Estar'")
    f = _METRICS[key]
    xs = np.linspace(0.0, 0.5, 514)[1:-1]
    vals = np.array([f(float(x)) for x in xs])
    k = int(np.argmin(vals))
    a0, _ = _golden_min(f, float(xs[max(k - 1, 0)]), float(xs[min(k + 1, len(xs) - 1)]),
                        tol=1e-12)

    def slope(a: float, d: float = 1e-6) -> float:
        return (f(a + d) - f(a - d)) / (2.0 * d)

    a, g = a0, slope(a0)
    for _ in range(60):
        g2 = slope(a + 1e-7)
        curv = (g2 - g) / 1e-7
        if curv == 0.0:
            break
        step = -g / curv
        a_new = min(0.5 - 1e-9, max(1e-9, a + step))
        g_new = slope(a_new)
        if abs(g_new) >= abs(g) and abs(step) < 1e-13:
            break
        a, g = a_new, g_new
        if abs(step) < 1e-14:
            break
    a_star = a
    scheme = make_two_stage(a_star)
    h_bar = 2.0
    return OptimizationReport(
        family="two_stage",
        argmin=(float(a_star),),
        rho_norm_at_min=float(harmonic.rho_norm(scheme, h_bar)),
        h_bar=h_bar,
        double_root_location=None,
        metric=key,
        metric_value=float(f(a_star)),
        trace=(
            {"phase": "scan", "params": [float(xs[k])], "value": float(vals[k])},
            {"phase": "polish", "params": [float(a_star)], "value": float(f(a_star))},
        ),
    )
