"""Singular-kernel stochastic Volterra schemes and convergence harness."""

from .brownian import BrownianPath, coarsen, dump_path, generate, load_path, partial_sums
from .errors import NumericalError
from .harness import (
    ErrorReport,
    ExperimentConfig,
    HolderReport,
    MomentReport,
    fit_loglog,
    holder_exponent_estimate,
    moment_bound_check,
    run_convergence_study,
    strong_error,
    theoretical_rate,
)
from .kernels import (
    SingularKernel,
    difference_integral,
    segment_integral,
    weight_matrix,
    weight_vector,
)
from .problems import (
    PicardResult,
    SvieProblem,
    ValidationReport,
    picard_reference_solution,
    preset,
    preset_names,
    validate,
)
from .schemes import SchemeConfig, Trajectory, run_milstein, run_reference, run_theta_em
from .special import (
    GronwallInput,
    gamma_fn,
    gronwall_continuous_bound,
    gronwall_discrete_bound,
    mittag_leffler,
    mittag_leffler_log,
)

__version__ = "0.1.0"

__all__ = [
    "BrownianPath",
    "ErrorReport",
    "ExperimentConfig",
    "GronwallInput",
    "HolderReport",
    "MomentReport",
    "NumericalError",
    "PicardResult",
    "SchemeConfig",
    "SingularKernel",
    "SvieProblem",
    "Trajectory",
    "ValidationReport",
    "coarsen",
    "difference_integral",
    "dump_path",
    "fit_loglog",
    "gamma_fn",
    "generate",
    "gronwall_continuous_bound",
    "gronwall_discrete_bound",
    "holder_exponent_estimate",
    "load_path",
    "mittag_leffler",
    "mittag_leffler_log",
    "moment_bound_check",
    "partial_sums",
    "picard_reference_solution",
    "preset",
    "preset_names",
    "run_convergence_study",
    "run_milstein",
    "run_reference",
    "run_theta_em",
    "segment_integral",
    "strong_error",
    "theoretical_rate",
    "validate",
    "weight_matrix",
    "weight_vector",
]
