"""Palindromic splitting integrators for Hybrid Monte Carlo.

Scheme construction and a named catalog, exact harmonic-oscillator
analysis (stability, rotation angle, ellipse aspect, the energy-error
coefficient rho), coefficient optimization, sampling targets, an HMC
driver with per-proposal work accounting, and benchmark presets behind
the `splithmc` command.
"""

__version__ = "0.1.0"

from .harmonic import (
    ErrorConstants,
    ExtrapolationError,
    HarmonicDiagnostics,
    HarmonicUpdate,
    InstabilityError,
    diagnostics,
    error_constants,
    harmonic_update,
    rho_bound_multivariate,
    rho_closed_form_two_stage,
    rho_norm,
    stability_interval,
)
from .hmc import (
    ChainSummary,
    HmcConfig,
    NonFiniteStateError,
    StepRecord,
    expected_energy_error_harmonic,
    hamiltonian,
    hmc_run,
    integrate,
    jitter_averaged_energy_error,
    reversibility_check,
    volume_check,
)
from .optimize import (
    BracketError,
    ConvergenceError,
    OptimizationReport,
    minimize_error_metric_two_stage,
    optimize_four_stage,
    optimize_three_stage,
    optimize_two_stage,
    solve_double_root_three_stage,
)
from .rng import make_rng
from .schemes import (
    Branch,
    LeadingKind,
    SplittingScheme,
    catalog,
    catalog_names,
    concatenate,
    double_root_pair,
    make_four_stage,
    make_three_stage,
    make_three_stage_from_hhat,
    make_two_stage,
    mirror,
)
from .targets import Target, diagonal_gaussian, double_well, gaussian_chain, parse_target

__all__ = [
    "__version__",
    "Branch",
    "LeadingKind",
    "SplittingScheme",
    "catalog",
    "catalog_names",
    "concatenate",
    "double_root_pair",
    "make_four_stage",
    "make_three_stage",
    "make_three_stage_from_hhat",
    "make_two_stage",
    "mirror",
    "ErrorConstants",
    "ExtrapolationError",
    "HarmonicDiagnostics",
    "HarmonicUpdate",
    "InstabilityError",
    "diagnostics",
    "error_constants",
    "harmonic_update",
    "rho_bound_multivariate",
    "rho_closed_form_two_stage",
    "rho_norm",
    "stability_interval",
    "BracketError",
    "ConvergenceError",
    "OptimizationReport",
    "minimize_error_metric_two_stage",
    "optimize_four_stage",
    "optimize_three_stage",
    "optimize_two_stage",
    "solve_double_root_three_stage",
    "Target",
    "diagonal_gaussian",
    "double_well",
    "gaussian_chain",
    "parse_target",
    "ChainSummary",
    "HmcConfig",
    "NonFiniteStateError",
    "StepRecord",
    "expected_energy_error_harmonic",
    "hamiltonian",
    "hmc_run",
    "integrate",
    "jitter_averaged_energy_error",
    "reversibility_check",
    "volume_check",
    "make_rng",
]
