"""Causal order estimation for nonlinear Gaussian SEMs, with the
empirical-process statistics, bound formulas, and Monte-Carlo experiments
that explain when and how fast the estimator works.
"""

from ._version import __version__
from .dictionary import (
    CUBIC_B_SPLINE,
    FAMILIES,
    PIECEWISE_CONSTANT,
    TRIGONOMETRIC,
    Dictionary,
    basis_matrix,
    design_matrix,
    eval_basis,
    moment_matrix,
    moment_vector,
)
from .empproc import (
    MomentPair,
    RademacherResult,
    RateReport,
    case5_tradeoff,
    check_eigenvalue_cond,
    check_incoherence,
    delta_n,
    entropy_bound_l1,
    inner_product_sup,
    j_integral_l1,
    lambda_min,
    loglog_slope,
    rademacher_diagnostic,
    rate_experiment,
    subgauss_product_sup,
    z_sup_ellipsoid,
    z_sup_l1,
)
from .errors import CapacityError, DegeneracyError, UsageError
from .order import (
    ConsistencyReport,
    OrderEstimate,
    conditional_sigma,
    consistency_experiment,
    estimate_order_exact,
    estimate_order_greedy,
    in_pi0,
    score,
)
from .regress import (
    ClassSpec,
    FitResult,
    MisspecReport,
    MisspecTruth,
    fit_l1,
    fit_over_subsets,
    fit_span,
    kkt_residual,
    misspec_experiment,
    population_projection,
)
from .semgen import (
    DataMatrix,
    EdgeFunction,
    GapReport,
    SemSpec,
    identifiability_gap,
    population_sigma,
    sample,
    topological_orders,
)

__all__ = [
    "__version__",
    "Dictionary",
    "eval_basis",
    "basis_matrix",
    "design_matrix",
    "moment_vector",
    "moment_matrix",
    "PIECEWISE_CONSTANT",
    "CUBIC_B_SPLINE",
    "TRIGONOMETRIC",
    "FAMILIES",
    "EdgeFunction",
    "SemSpec",
    "DataMatrix",
    "GapReport",
    "sample",
    "topological_orders",
    "population_sigma",
    "identifiability_gap",
    "ClassSpec",
    "FitResult",
    "MisspecTruth",
    "MisspecReport",
    "fit_span",
    "fit_l1",
    "kkt_residual",
    "population_projection",
    "fit_over_subsets",
    "misspec_experiment",
    "MomentPair",
    "RademacherResult",
    "RateReport",
    "z_sup_ellipsoid",
    "z_sup_l1",
    "inner_product_sup",
    "subgauss_product_sup",
    "rademacher_diagnostic",
    "entropy_bound_l1",
    "j_integral_l1",
    "delta_n",
    "lambda_min",
    "check_incoherence",
    "check_eigenvalue_cond",
    "rate_experiment",
    "case5_tradeoff",
    "loglog_slope",
    "OrderEstimate",
    "ConsistencyReport",
    "conditional_sigma",
    "score",
    "estimate_order_exact",
    "estimate_order_greedy",
    "in_pi0",
    "consistency_experiment",
    "UsageError",
    "CapacityError",
    "DegeneracyError",
]
