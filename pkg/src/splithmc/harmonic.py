"""Exact analysis of splitting schemes on the unit harmonic oscillator.

For H = (p^2 + q^2)/2 every drift/kick substep is a 2x2 shear, so one
time-step of any scheme is a unit-determinant matrix

    M_h = [[A_h, B_h], [C_h, D_h]],   A_h = D_h for palindromes.

Stability means |A_h| <= 1.  Writing A_h = cos(theta_h) and
B_h = chi_h sin(theta_h) gives the rotation angle theta_h and the aspect
ratio chi_h of the conserved ellipse; the induced expected energy error
per proposal at stationarity is governed by

    rho(h) = (1/2) (chi_h - 1/chi_h)^2 = (B_h + C_h)^2 / (2 (1 - A_h^2)).

Everything here is pure and re-entrant; grid evaluation is vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .schemes import KIND_DRIFT, SplittingScheme

__all__ = [
    "HarmonicUpdate",
    "HarmonicDiagnostics",
    "ErrorConstants",
    "InstabilityError",
    "ExtrapolationError",
    "harmonic_update",
    "diagnostics",
    "rho_closed_form_two_stage",
    "rho_norm",
    "stability_interval",
    "error_constants",
    "rho_bound_multivariate",
]

# |A| may exceed 1 by this much before a point is treated as unstable;
# covers float noise at double roots where A dips to -1 and returns.
STABILITY_SLACK = 1e-10

# Below this value of 1 - A^2 the chi/rho formulas are evaluated in
# extended precision instead of float64.
_SIN2_FLOOR = 1e-10

# At a near-singular point, (B+C)^2 beyond this marks a genuine
# (non-removable) singularity: rho diverges there.
_REMOVABLE_CEIL = 1e-6

# Grid cells in rho_norm this close to sin(theta) = 0 are patched from
# their neighbors.  Float-rounded coefficients displace the simple zeros
# of B and C away from an A = -1 tangency by ~1e-8 in h, which leaves
# B + C ~ 1e-7 constant through it and puts a 1/(h - h*)^2 spike on top
# of the finite bump the exact scheme would have; the spike clears
# typical norm levels once 1 - A^2 drops below about this value.
_NORM_PATCH_FLOOR = 1e-7


class InstabilityError(ValueError):
    """A step size outside the scheme's stability interval was used."""


class ExtrapolationError(RuntimeError):
    """A Richardson ladder failed to settle."""


@dataclass(frozen=True)
class HarmonicUpdate:
    h: float
    a_h: float
    b_h: float
    c_h: float
    d_h: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a_h, self.b_h], [self.c_h, self.d_h]])


@dataclass(frozen=True)
class HarmonicDiagnostics:
    h: float
    stable: bool
    theta: float
    chi: float
    rho: float


@dataclass(frozen=True)
class ErrorConstants:
    k31: float
    k32: float

    @property
    def e_metric(self) -> float:
        return self.k31 * self.k31 + self.k32 * self.k32

    @property
    def estar_metric(self) -> float:
        s = self.k31 + self.k32
        return self.k31 * self.k31 + s * s


def harmonic_update(scheme: SplittingScheme, h: float) -> HarmonicUpdate:
    """One-step 2x2 map of `scheme` at step size h on the unit oscillator."""
    m00, m01, m10, m11 = 1.0, 0.0, 0.0, 1.0
    for kind, c in zip(scheme.kinds, scheme.coefficients):
        t = c * h
        if kind == KIND_DRIFT:
            m00 += t * m10
            m01 += t * m11
        else:
            m10 -= t * m00
            m11 -= t * m01
    return HarmonicUpdate(h=float(h), a_h=m00, b_h=m01, c_h=m10, d_h=m11)


def _update_entries_grid(scheme: SplittingScheme, hs: np.ndarray):
    """Vectorized harmonic_update over an array of step sizes."""
    hs = np.asarray(hs, dtype=float)
    m00 = np.ones_like(hs)
    m01 = np.zeros_like(hs)
    m10 = np.zeros_like(hs)
    m11 = np.ones_like(hs)
    for kind, c in zip(scheme.kinds, scheme.coefficients):
        t = c * hs
        if kind == KIND_DRIFT:
            m00 = m00 + t * m10
            m01 = m01 + t * m11
        else:
            m10 = m10 - t * m00
            m11 = m11 - t * m01
    return m00, m01, m10, m11


def _regular_point(scheme: SplittingScheme, h: float):
    """(theta, chi, rho) where |A| < 1 safely away from sin(theta) = 0."""
    u = harmonic_update(scheme, h)
    s2 = 1.0 - u.a_h * u.a_h
    if s2 <= _SIN2_FLOOR:
        return None
    theta = math.acos(u.a_h)
    if u.b_h < 0.0:
        theta = -theta
    chi = u.b_h / math.sin(theta)
    bc = u.b_h + u.c_h
    rho = bc * bc / (2.0 * s2)
    return theta, chi, rho


def _mp_point(scheme: SplittingScheme, h: float):
    """(theta, chi, rho) in extended precision, for near-singular h.

    Close to sin(theta) = 0 both B + C and 1 - A^2 vanish together at a
    removable singularity, and in float64 their ratio is cancellation
    noise; 40 digits resolve it exactly at the given h, no extrapolation
    involved.  Where |A| has truly crossed 1 (the slack band beyond a
    tangency) rho is +inf and chi is nan.
    """
    with mp.workdps(40):
        coeffs = _mp_coefficients(scheme)
        a, b, c = _mp_update(scheme.kinds, coeffs, mp.mpf(h))
        s2 = 1 - a * a
        if s2 <= 0:
            theta = mp.pi if a < 0 else mp.mpf(0)
            if b < 0:
                theta = -theta
            return float(theta), math.nan, math.inf
        theta = mp.acos(a)
        if b < 0:
            theta = -theta
        bc = b + c
        rho = bc * bc / (2 * s2)
        chi = abs(b) / mp.sqrt(s2)
        return float(theta), float(chi), float(rho)


def diagnostics(scheme: SplittingScheme, h: float) -> HarmonicDiagnostics:
    """Stability flag, theta, chi and rho of `scheme` at step size h.

    theta lies in (0, pi) when B_h > 0 and in (-pi, 0) when B_h < 0, so chi
    comes out positive on the stable range.  Where sin(theta) = 0 the
    0/0 in chi and rho is evaluated in extended precision: removable
    singularities (tangencies of A to -1 or +1) come out finite, genuine
    ones (weak instability, e.g. Verlet exactly at h = 2) give rho = +inf
    and chi = nan.  Once |A_h| exceeds 1 beyond the float slack all three
    are nan and stable is False.
    """
    h = float(h)
    u = harmonic_update(scheme, h)
    a = u.a_h
    if abs(a) > 1.0 + STABILITY_SLACK:
        return HarmonicDiagnostics(h=h, stable=False, theta=math.nan, chi=math.nan, rho=math.nan)
    stable = True
    pt = _regular_point(scheme, h)
    if pt is None:
        pt = _mp_point(scheme, h)
    theta, chi, rho = pt
    return HarmonicDiagnostics(h=h, stable=stable, theta=theta, chi=chi, rho=rho)


def rho_closed_form_two_stage(a1: float, h: float) -> float:
    """rho(h) for the 2-stage family member with free coefficient a1.

    Valid only while the denominator stays positive (that is exactly the
    stability condition); raises InstabilityError otherwise.
    """
    a1 = float(a1)
    h2 = float(h) * float(h)
    c = 0.5 - a1
    den = 8.0 * (2.0 - a1 * h2) * (2.0 - c * h2) * (1.0 - a1 * c * h2)
    if den <= 0.0:
        raise InstabilityError(
            f"two-stage family with a1={a1!r} is unstable at h={h!r}"
        )
    poly = 2.0 * a1 * a1 * c * h2 + 4.0 * a1 * a1 - 6.0 * a1 + 1.0
    return h2 * h2 * poly * poly / den


def _rho_point(scheme: SplittingScheme, h: float) -> float:
    """rho as a peak-refinement probe: -inf where it cannot be measured.

    Stability over the range is decided by the grid scan before refinement
    ever runs; a probe that lands on a sub-slack dip below -1 (tangency
    solves are only accurate to ~1e-13) must not convert the whole sup
    into +inf.  Genuine instability windows are still caught through
    their flanks, where rho grows without bound.
    """
    d = diagnostics(scheme, h)
    if not d.stable or not math.isfinite(d.rho):
        return -math.inf
    return d.rho


def _golden_max(f, lo: float, hi: float, tol: float = 1e-9, max_iter: int = 90):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > tol and it < max_iter:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        it += 1
    if f1 >= f2:
        return x1, f1
    return x2, f2


def rho_norm(
    scheme: SplittingScheme,
    h_bar: float,
    grid_points: int = 2048,
    refine: bool = True,
) -> float:
    """sup of rho over (0, h_bar]; +inf if the range contains unstable steps.

    Dense grid first, then golden-section refinement around every grid-local
    maximum.  Grid points sitting on a removable singularity are patched
    with their neighborhood before the peak search.  Each refined peak is
    capped by its values 1e-4 * h_bar to either side, which reports the
    rounding-induced spike at an A = -1 tangency (see _NORM_PATCH_FLOOR)
    at its flank level, i.e. at the bump height of the exact scheme.
    Peaks wider than the cap distance pass through unchanged.  A genuine
    instability window wider than the grid spacing still comes back +inf
    through the stability scan.  refine=False skips
    the peak polish and returns the raw grid sup; optimizer inner loops use
    that for speed and re-measure the winner accurately.
    """
    if h_bar <= 0.0:
        raise ValueError(f"h_bar must be positive, got {h_bar!r}")
    n = max(int(grid_points), 64)
    hs = np.linspace(h_bar / n, h_bar, n)
    a, b, c, _ = _update_entries_grid(scheme, hs)
    if np.any(np.abs(a) > 1.0 + 1e-9):
        return math.inf
    s2 = 1.0 - a * a
    bc2 = (b + c) ** 2
    regular = s2 > _NORM_PATCH_FLOOR
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(regular, bc2 / (2.0 * np.maximum(s2, 1e-300)), 0.0)
    bad = np.flatnonzero(~regular)
    for i in bad:
        if bc2[i] > _REMOVABLE_CEIL:
            return math.inf
        lo = rho[i - 1] if i > 0 else 0.0
        hi = rho[i + 1] if i + 1 < n else 0.0
        rho[i] = max(lo, hi)
    best = float(rho.max())
    if not refine:
        return best
    peaks = [i for i in range(n) if _is_local_max(rho, i)]
    cap_dist = 1e-4 * h_bar
    for i in peaks:
        lo = hs[i - 1] if i > 0 else hs[0] * 0.5
        hi = hs[i + 1] if i + 1 < n else h_bar
        x, val = _golden_max(lambda t: _rho_point(scheme, t), lo, hi, tol=1e-10 * h_bar)
        if val <= best:
            continue
        flank = -math.inf
        if x - cap_dist > 0.0:
            flank = _rho_point(scheme, x - cap_dist)
        if x + cap_dist <= h_bar:
            flank = max(flank, _rho_point(scheme, x + cap_dist))
        if flank > -math.inf:
            val = min(val, flank)
        if val > best:
            best = val
    return best


def _is_local_max(vals: np.ndarray, i: int) -> bool:
    n = len(vals)
    left = vals[i - 1] if i > 0 else -math.inf
    right = vals[i + 1] if i + 1 < n else -math.inf
    return vals[i] >= left and vals[i] >= right


def _trace_half_polynomial(scheme: SplittingScheme) -> np.ndarray:
    """Coefficients of A_h in ascending powers of h (degree 2r)."""
    pp = np.polynomial.polynomial

    def times_ch(p, c):
        # multiply a coefficient array by c*h
        return np.concatenate(([0.0], c * p))

    m00, m01 = np.array([1.0]), np.array([0.0])
    m10, m11 = np.array([0.0]), np.array([1.0])
    for kind, c in zip(scheme.kinds, scheme.coefficients):
        if kind == KIND_DRIFT:
            m00 = pp.polyadd(m00, times_ch(m10, c))
            m01 = pp.polyadd(m01, times_ch(m11, c))
        else:
            m10 = pp.polysub(m10, times_ch(m00, c))
            m11 = pp.polysub(m11, times_ch(m01, c))
    return 0.5 * pp.polyadd(m00, m11)


def stability_interval(scheme: SplittingScheme) -> float:
    """Length h_max of the first stability interval (0, h_max).

    A_h is a polynomial in h, so every candidate boundary is a real root
    of A_h -+ 1.  Between consecutive roots |A_h| - 1 cannot change sign,
    and one probe at each gap midpoint classifies the whole gap; the
    interval ends at the left edge of the first unstable gap.  Tangencies
    of A_h with -+1 (zero-width gaps, or dips shallower than
    STABILITY_SLACK: the double-root three-stage family has these by
    construction) do not end the interval.  A grid scan would miss
    narrow dips near the tangency manifolds; the root route cannot.
    """
    coeffs = _trace_half_polynomial(scheme)
    roots = []
    for shift in (1.0, -1.0):
        shifted = coeffs.copy()
        shifted[0] += shift
        for z in np.polynomial.polynomial.polyroots(shifted):
            # near-double roots surface as close complex pairs; keeping
            # their real parts is harmless because probes decide below
            if abs(z.imag) <= 1e-4 * max(1.0, abs(z.real)) and z.real > 0.0:
                roots.append(float(z.real))
    if not roots:
        return math.inf
    roots.sort()
    edges = [0.0] + roots
    for i in range(len(roots)):
        lo, hi = edges[i], edges[i + 1]
        if hi - lo <= 0.0:
            continue
        probe = harmonic_update(scheme, 0.5 * (lo + hi))
        if abs(probe.a_h) > 1.0 + STABILITY_SLACK:
            return lo
    # stable through the last root; beyond it |A_h| grows with no
    # further crossing, so the interval ends exactly there
    return roots[-1]


def _mp_update(kinds, coeffs, h):
    m00, m01, m10, m11 = mp.mpf(1), mp.mpf(0), mp.mpf(0), mp.mpf(1)
    for kind, coeff in zip(kinds, coeffs):
        t = coeff * h
        if kind == KIND_DRIFT:
            m00 += t * m10
            m01 += t * m11
        else:
            m10 -= t * m00
            m11 -= t * m01
    return m00, m01, m10


def _mp_coefficients(scheme: SplittingScheme):
    """Scheme coefficients as exact mpf values, renormalized so each kind
    sums to exactly 1.

    Float coefficients carry an O(1e-16) consistency defect (1 - 2*a1
    rounds), and that defect enters the small-h expansions as delta / h^2,
    which swamps a Richardson ladder.  The expansion is taken on the
    nearest exactly-consistent scheme instead; the coefficients move by
    O(1e-16), so the extracted constants do too, which is far below the
    ladder's own tolerance.
    """
    raw = [mp.mpf(c) for c in scheme.coefficients]
    drift_sum = mp.mpf(0)
    kick_sum = mp.mpf(0)
    for kind, c in zip(scheme.kinds, raw):
        if kind == KIND_DRIFT:
            drift_sum += c
        else:
            kick_sum += c
    out = []
    for kind, c in zip(scheme.kinds, raw):
        out.append(c / drift_sum if kind == KIND_DRIFT else c / kick_sum)
    return out


def error_constants(scheme: SplittingScheme, h0: float = 0.2, levels: int = 7) -> ErrorConstants:
    """Leading modified-Hamiltonian coefficients k31 and k32.

    Extracted from the small-h expansions theta_h = h (1 + t2 h^2 + ...)
    and chi_h = 1 + c2 h^2 + ... by a Richardson ladder over h0, h0/2, ...
    (corrections are even powers, so each halving gains a factor 4).  The
    ladder runs in extended precision; in float64 the smallest steps are
    pure cancellation noise.  The (t2, c2) -> (k31, k32) map is fixed by
    the velocity Verlet values k31 = 1/12, k32 = 1/24.
    """
    with mp.workdps(50):
        coeffs = _mp_coefficients(scheme)
        ts, cs = [], []
        for k in range(levels):
            h = mp.mpf(h0) / (1 << k)
            a, b, _ = _mp_update(scheme.kinds, coeffs, h)
            if abs(a) >= 1:
                raise InstabilityError(
                    f"{scheme.label}: unstable at h={float(h)!r}, cannot expand"
                )
            theta = mp.acos(a)
            chi = b / mp.sin(theta)
            ts.append((theta / h - 1) / h**2)
            cs.append((chi - 1) / h**2)
        t2, t_err = _richardson_ratio4(ts)
        c2, c_err = _richardson_ratio4(cs)
        scale = max(1.0, abs(float(t2)), abs(float(c2)))
        if max(float(t_err), float(c_err)) > 1e-12 * scale:
            raise ExtrapolationError(
                f"{scheme.label}: expansion ladder did not settle "
                f"(residuals {float(t_err):.3e}, {float(c_err):.3e})"
            )
        k31 = float((t2 + c2) / 2)
        k32 = float((c2 - t2) / 2)
    return ErrorConstants(k31=k31, k32=k32)


def _richardson_ratio4(vals):
    """Richardson ladder for sequences with even-power error terms."""
    row = list(vals)
    prev_last = row[-1]
    for j in range(1, len(vals)):
        f = mp.mpf(4) ** j
        row = [(f * row[i + 1] - row[i]) / (f - 1) for i in range(len(row) - 1)]
        err = abs(row[-1] - prev_last)
        prev_last = row[-1]
    return row[-1], err


def rho_bound_multivariate(scheme: SplittingScheme, h: float, omegas) -> float:
    """Sum of rho(omega_j * h): the stationary mean energy-error bound for a
    product of unit-mass oscillators with the given frequencies."""
    total = 0.0
    for j, w in enumerate(np.asarray(omegas, dtype=float)):
        d = diagnostics(scheme, w * h)
        if not d.stable or not math.isfinite(d.rho):
            raise InstabilityError(
                f"{scheme.label}: unstable at frequency index {j} "
                f"(omega={w!r}, omega*h={w * h!r})"
            )
        total += d.rho
    return total
