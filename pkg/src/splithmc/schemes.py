"""Palindromic splitting schemes for separable Hamiltonians.

A scheme is a palindromic sequence of 2r+1 coefficients whose substeps
alternate between position drifts (A-flows) and momentum kicks (B-flows).
Two layouts exist, named after the leading substep:

    DriftFirst:  (a1, b1, a2, ..., a2, b1, a1)
    KickFirst:   (b1, a1, b2, ..., b2, a1, b1)

The stage count r equals the number of gradient evaluations a time-step
costs once the trailing substep of one step is merged with the leading
substep of the next.  Velocity and position Verlet are the r=1 members.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

__all__ = [
    "LeadingKind",
    "Branch",
    "SplittingScheme",
    "make_two_stage",
    "make_three_stage",
    "make_three_stage_from_hhat",
    "make_four_stage",
    "double_root_pair",
    "concatenate",
    "mirror",
    "catalog",
    "catalog_names",
]

KIND_DRIFT = "drift"
KIND_KICK = "kick"

#: Coefficient sums must match 1 to this absolute tolerance.
CONSISTENCY_TOL = 1e-14


class LeadingKind(enum.Enum):
    DRIFT_FIRST = "DriftFirst"
    KICK_FIRST = "KickFirst"


class Branch(enum.Enum):
    """Sign choice in the square root of the double-root coefficient family."""

    PLUS = "Plus"
    MINUS = "Minus"


@dataclass(frozen=True)
class SplittingScheme:
    label: str
    leading_kind: LeadingKind
    coefficients: tuple[float, ...]
    stage_count: int = field(default=0)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        n = len(coeffs)
        if n < 3 or n % 2 == 0:
            raise ValueError(f"need an odd number >= 3 of coefficients, got {n}")
        r = (n - 1) // 2
        if self.stage_count == 0:
            object.__setattr__(self, "stage_count", r)
        elif self.stage_count != r:
            raise ValueError(
                f"stage_count {self.stage_count} inconsistent with {n} coefficients"
            )
        for i, c in enumerate(coeffs):
            if not math.isfinite(c):
                raise ValueError(f"coefficient {i} is not finite: {c!r}")
            if c != coeffs[n - 1 - i]:
                raise ValueError("coefficient sequence is not palindromic")
        lead_sum = math.fsum(coeffs[0::2])
        other_sum = math.fsum(coeffs[1::2])
        for name, s in (("leading", lead_sum), ("interleaved", other_sum)):
            if abs(s - 1.0) > CONSISTENCY_TOL:
                raise ValueError(
                    f"{name} coefficients sum to {s!r}, expected 1 "
                    f"(off by {s - 1.0:.3e})"
                )

    @property
    def kinds(self) -> tuple[str, ...]:
        """Substep kinds ('drift'/'kick') in application order."""
        first = KIND_DRIFT if self.leading_kind is LeadingKind.DRIFT_FIRST else KIND_KICK
        second = KIND_KICK if first == KIND_DRIFT else KIND_DRIFT
        return tuple(first if i % 2 == 0 else second for i in range(len(self.coefficients)))

    @property
    def drift_coefficients(self) -> tuple[float, ...]:
        if self.leading_kind is LeadingKind.DRIFT_FIRST:
            return self.coefficients[0::2]
        return self.coefficients[1::2]

    @property
    def kick_coefficients(self) -> tuple[float, ...]:
        if self.leading_kind is LeadingKind.DRIFT_FIRST:
            return self.coefficients[1::2]
        return self.coefficients[0::2]

    def with_label(self, label: str) -> "SplittingScheme":
        return replace(self, label=label)

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "leading_kind": self.leading_kind.value,
            "stage_count": self.stage_count,
            "coefficients": list(self.coefficients),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SplittingScheme":
        return cls(
            label=str(doc["label"]),
            leading_kind=LeadingKind(doc["leading_kind"]),
            coefficients=tuple(doc["coefficients"]),
            stage_count=int(doc["stage_count"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplittingScheme":
        return cls.from_dict(json.loads(text))


def make_two_stage(a1: float, label: str | None = None) -> SplittingScheme:
    """Member (a1, 1/2, 1-2*a1, 1/2, a1) of the one-parameter 2-stage family."""
    a1 = float(a1)
    coeffs = (a1, 0.5, 1.0 - 2.0 * a1, 0.5, a1)
    return SplittingScheme(
        label=label or f"two-stage(a1={a1:.12g})",
        leading_kind=LeadingKind.DRIFT_FIRST,
        coefficients=coeffs,
    )


def make_three_stage(a1: float, b1: float, label: str | None = None) -> SplittingScheme:
    """Member (a1, b1, 1/2-a1, 1-2*b1, 1/2-a1, b1, a1) of the 3-stage family."""
    a1 = float(a1)
    b1 = float(b1)
    coeffs = (a1, b1, 0.5 - a1, 1.0 - 2.0 * b1, 0.5 - a1, b1, a1)
    return SplittingScheme(
        label=label or f"three-stage(a1={a1:.12g}, b1={b1:.12g})",
        leading_kind=LeadingKind.DRIFT_FIRST,
        coefficients=coeffs,
    )


def make_four_stage(
    a1: float, a2: float, b1: float, label: str | None = None
) -> SplittingScheme:
    """4-stage scheme (a1,b1,a2,b2,a3,b2,a2,b1,a1); b2 and a3 follow by consistency."""
    a1 = float(a1)
    a2 = float(a2)
    b1 = float(b1)
    b2 = 0.5 - b1
    a3 = 1.0 - 2.0 * a1 - 2.0 * a2
    coeffs = (a1, b1, a2, b2, a3, b2, a2, b1, a1)
    return SplittingScheme(
        label=label or f"four-stage(a1={a1:.12g}, a2={a2:.12g}, b1={b1:.12g})",
        leading_kind=LeadingKind.DRIFT_FIRST,
        coefficients=coeffs,
    )


def double_root_pair(h_hat: float, branch: Branch) -> tuple[float, float]:
    """(a1, b1) of the 3-stage family whose oscillator map has A = -1 with a
    double root at h = h_hat.

    Both signs of the square root solve the system; `branch` picks one.
    """
    h_hat = float(h_hat)
    if not 0.0 < h_hat <= 3.0:
        raise ValueError(f"double root location must lie in (0, 3], got {h_hat!r}")
    hh2 = h_hat * h_hat
    root = math.sqrt(9.0 - hh2) / hh2
    if branch is Branch.PLUS:
        a1 = 0.5 - 3.0 / hh2 + root
        b1 = 3.0 / hh2 + root
    elif branch is Branch.MINUS:
        a1 = 0.5 - 3.0 / hh2 - root
        b1 = 3.0 / hh2 - root
    else:
        raise TypeError(f"branch must be a Branch member, got {branch!r}")
    return a1, b1


def make_three_stage_from_hhat(
    h_hat: float, branch: Branch, label: str | None = None
) -> SplittingScheme:
    """3-stage scheme built from the double-root location h_hat.

    The returned scheme is verified post hoc: its oscillator map at h_hat
    must satisfy |A+1| <= 1e-10 and |B|, |C| <= 1e-10.
    """
    a1, b1 = double_root_pair(h_hat, branch)
    scheme = make_three_stage(
        a1, b1, label=label or f"three-stage(hhat={h_hat:.12g}, {branch.value})"
    )
    from . import harmonic  # deferred: harmonic imports this module

    u = harmonic.harmonic_update(scheme, h_hat)
    if abs(u.a_h + 1.0) > 1e-10 or abs(u.b_h) > 1e-10 or abs(u.c_h) > 1e-10:
        raise AssertionError(
            f"double-root construction failed at h_hat={h_hat!r}: "
            f"A+1={u.a_h + 1.0:.3e}, B={u.b_h:.3e}, C={u.c_h:.3e}"
        )
    return scheme


def concatenate(scheme: SplittingScheme, times: int) -> SplittingScheme:
    """Scheme equivalent to `times` substeps of length h/times.

    Boundary substeps of adjacent copies are merged so the palindrome and
    alternation invariants keep holding; the stage count multiplies.
    """
    if times < 1:
        raise ValueError(f"times must be >= 1, got {times}")
    if times == 1:
        return scheme
    scaled = [c / times for c in scheme.coefficients]
    out = list(scaled)
    for _ in range(times - 1):
        out[-1] += scaled[0]
        out.extend(scaled[1:])
    return SplittingScheme(
        label=f"{scheme.label} x{times}",
        leading_kind=scheme.leading_kind,
        coefficients=tuple(out),
    )


def mirror(scheme: SplittingScheme) -> SplittingScheme:
    """Exchange drift and kick roles (velocity Verlet <-> position Verlet)."""
    flipped = (
        LeadingKind.KICK_FIRST
        if scheme.leading_kind is LeadingKind.DRIFT_FIRST
        else LeadingKind.DRIFT_FIRST
    )
    return SplittingScheme(
        label=f"{scheme.label} (mirrored)",
        leading_kind=flipped,
        coefficients=scheme.coefficients,
    )


# Named method constants.  MINRHO2_A1 minimizes the sup of rho over (0,2)
# within the 2-stage family up to the printed digits; MCLACHLAN2_A1 is the
# root of the optimality cubic 48*a^3 - 72*a^2 + 38*a - 5 = 0 for the
# leading-error metric E = k31^2 + k32^2 (verified by tests against the
# numerical minimizer).
MINRHO2_A1 = (3.0 - math.sqrt(3.0)) / 6.0
MCLACHLAN2_A1 = 0.19318332750378357
YOSHIDA4_A1 = 0.5 / (2.0 - 2.0 ** (1.0 / 3.0))
MINRHO3_A1 = 0.11888010966548
MINRHO3_B1 = 0.29619504261126
MINRHO4_A1 = 0.071353913450279725904
MINRHO4_A2 = 0.268548791161230105820
MINRHO4_B1 = 0.1916678


def _build_catalog() -> dict:
    verlet = (0.5, 1.0, 0.5)
    entries = {
        "VV": lambda: SplittingScheme("VV", LeadingKind.KICK_FIRST, verlet),
        "PV": lambda: SplittingScheme("PV", LeadingKind.DRIFT_FIRST, verlet),
        "MINRHO2": lambda: make_two_stage(MINRHO2_A1, label="MINRHO2"),
        "MCLACHLAN2": lambda: make_two_stage(MCLACHLAN2_A1, label="MCLACHLAN2"),
        "MCLACHLAN2_ESTAR": _mclachlan_estar,
        "MINRHO3": lambda: make_three_stage(MINRHO3_A1, MINRHO3_B1, label="MINRHO3"),
        "MINRHO4": lambda: make_four_stage(
            MINRHO4_A1, MINRHO4_A2, MINRHO4_B1, label="MINRHO4"
        ),
        "YOSHIDA4": lambda: make_three_stage(
            YOSHIDA4_A1, 2.0 * YOSHIDA4_A1, label="YOSHIDA4"
        ),
    }
    return entries


def _mclachlan_estar() -> SplittingScheme:
    # Derived, not hard-coded: argmin of E* = k31^2 + (k31+k32)^2.
    from . import optimize  # deferred: optimize imports this module

    report = optimize.minimize_error_metric_two_stage("Estar")
    return make_two_stage(report.argmin[0], label="MCLACHLAN2_ESTAR")


_CATALOG = _build_catalog()


def catalog_names() -> list[str]:
    return sorted(_CATALOG)


def catalog(name: str) -> SplittingScheme:
    """Look up a named method; raises ValueError listing the catalog on a miss."""
    try:
        build = _CATALOG[name]
    except KeyError:
        raise ValueError(
            f"unknown scheme {name!r}; available: {', '.join(catalog_names())}"
        ) from None
    return build()
