"""Numerical laboratory for Weyl laws, heat kernels and spectral multipliers."""

from .builder import PotentialBuilder, parse_potential
from .config import ExperimentConfig, load_config
from .duhamel import (
    CaseReport,
    OperatorPair,
    build_operator_pair,
    case_report,
    duhamel_coefficient,
    duhamel_identity_residual,
    fit_trace_envelope,
    trace_perturbation_sum,
    wave_kernel,
)
from .errors import (
    AccuracyError,
    CapacityError,
    FitFailureError,
    InvalidInputError,
    InvalidPairError,
    RangeError,
    SingularPointError,
    SolverError,
    SplitFailureError,
    UnsupportedDomainError,
    WeylLabError,
)
from .geometry import BoundaryCondition, BoundaryKind, DomainSpec, Grid, Shape, build_grid, distance, make_domain
from .heat import (
    check_long_time,
    fit_gaussian_bound,
    heat_kernel,
    heat_trace,
    heat_trace_exact,
    heat_trace_report,
    riesz_kernel,
)
from .multipliers import (
    DyadicDecomposition,
    MollifierSpec,
    WindowSpec,
    check_indicator_decay,
    dyadic_partition,
    lp_symbols,
    mollification_trace_error,
    smoothed_indicator,
    window,
)
from .operators import AssembledOperator, assemble_laplacian, assemble_schrodinger, load_operator, save_operator
from .potentials import PotentialSpec, cell_average, evaluate_potential, kato_norm, l1_norm, split_potential
from .report import Curve, emit_svg
from .spectrum import (
    ExactSpectrum,
    SpectralData,
    counting_function,
    eigendecompose,
    exact_disk_spectrum,
    exact_rectangle_spectrum,
    spectral_function,
)
from .suite import AcceptanceSuite, CheckResult
from .types import REPORT_SCHEMA_VERSION
from .weyl import (
    count_difference,
    fit_remainder_exponent,
    remainder_curve,
    robin_sandwich,
    short_interval_count,
    weyl_coefficients,
)

__all__ = [
    "AcceptanceSuite",
    "AccuracyError",
    "AssembledOperator",
    "BoundaryCondition",
    "BoundaryKind",
    "CapacityError",
    "CaseReport",
    "CheckResult",
    "Curve",
    "DomainSpec",
    "DyadicDecomposition",
    "ExactSpectrum",
    "ExperimentConfig",
    "FitFailureError",
    "Grid",
    "InvalidInputError",
    "InvalidPairError",
    "MollifierSpec",
    "OperatorPair",
    "PotentialBuilder",
    "PotentialSpec",
    "REPORT_SCHEMA_VERSION",
    "RangeError",
    "Shape",
    "SingularPointError",
    "SolverError",
    "SpectralData",
    "SplitFailureError",
    "UnsupportedDomainError",
    "WeylLabError",
    "WindowSpec",
    "assemble_laplacian",
    "assemble_schrodinger",
    "build_grid",
    "build_operator_pair",
    "case_report",
    "cell_average",
    "check_indicator_decay",
    "check_long_time",
    "count_difference",
    "counting_function",
    "distance",
    "duhamel_coefficient",
    "duhamel_identity_residual",
    "dyadic_partition",
    "eigendecompose",
    "emit_svg",
    "evaluate_potential",
    "exact_disk_spectrum",
    "exact_rectangle_spectrum",
    "fit_gaussian_bound",
    "fit_remainder_exponent",
    "fit_trace_envelope",
    "heat_kernel",
    "heat_trace",
    "heat_trace_exact",
    "heat_trace_report",
    "kato_norm",
    "l1_norm",
    "load_config",
    "load_operator",
    "lp_symbols",
    "make_domain",
    "mollification_trace_error",
    "parse_potential",
    "remainder_curve",
    "riesz_kernel",
    "robin_sandwich",
    "save_operator",
    "short_interval_count",
    "smoothed_indicator",
    "spectral_function",
    "split_potential",
    "trace_perturbation_sum",
    "wave_kernel",
    "weyl_coefficients",
    "window",
]
