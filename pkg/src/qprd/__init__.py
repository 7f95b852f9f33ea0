"""Numerical laboratory for scalar reaction-diffusion equations driven by an
irrational torus rotation.

The package computes principal-direction cocycles and Lyapunov exponents,
pullback attractor boundaries, fine/singular fiber statistics, Li-Yorke pair
diagnostics, and parameter sweeps through the critical (zero-exponent) regime,
on a monotone finite-difference discretization of

    y_t = y_xx + (gamma + h(p.t, x)) y + g(p.t, x, y),   x in (0, 1),

with Neumann or Robin boundary conditions, where p.t is an irrational rotation
on the 2-torus.
"""

__version__ = "0.1.0"

from .attractor import AttractorConfig, classify_fiber, pullback_upper, scan_sections
from .baseflow import BasePoint, advance, ergodic_average, sample_base, torus_distance
from .bifurcation import homogeneous_oracle, pitchfork_report, sweep
from .chaos import ChaosConfig, fiber_chaos_scan, liyorke_stats
from .cocycle import (
    CocycleConfig,
    backward_sup,
    classify_boundedness,
    cocycle_trace,
    lyapunov_exponent,
)
from .coeffs import (
    LinearCoefficientSpec,
    NonlinearitySpec,
    TrigPoly,
    build_coboundary_h,
    build_unbounded_surrogate_h,
    calibrate_zero_exponent,
)
from .config import ExperimentConfig, load_config, validate_config
from .errors import (
    BlowupError,
    CalibrationError,
    ConfigurationError,
    EvaluationError,
    NumericalError,
    PreconditionError,
    SchemeViolationError,
    ValidationError,
)
from .solver import (
    BoundaryCondition,
    Grid,
    NEUMANN,
    ProblemSpec,
    Propagator,
    dt_max,
    evolve,
    first_eigenpair,
    invariant_box,
)

__all__ = [
    "__version__",
    "AttractorConfig",
    "BasePoint",
    "BlowupError",
    "BoundaryCondition",
    "CalibrationError",
    "ChaosConfig",
    "CocycleConfig",
    "ConfigurationError",
    "EvaluationError",
    "ExperimentConfig",
    "Grid",
    "LinearCoefficientSpec",
    "NEUMANN",
    "NonlinearitySpec",
    "NumericalError",
    "PreconditionError",
    "ProblemSpec",
    "Propagator",
    "SchemeViolationError",
    "TrigPoly",
    "ValidationError",
    "advance",
    "backward_sup",
    "build_coboundary_h",
    "build_unbounded_surrogate_h",
    "calibrate_zero_exponent",
    "classify_boundedness",
    "classify_fiber",
    "cocycle_trace",
    "dt_max",
    "ergodic_average",
    "evolve",
    "fiber_chaos_scan",
    "first_eigenpair",
    "homogeneous_oracle",
    "invariant_box",
    "liyorke_stats",
    "load_config",
    "lyapunov_exponent",
    "pitchfork_report",
    "pullback_upper",
    "sample_base",
    "scan_sections",
    "sweep",
    "torus_distance",
    "validate_config",
]
