"""Nonsmooth Frank-Wolfe over simplex products with certified gaps and coresets."""

from .core import (
    FeasibleSet,
    ProblemInstance,
    SparseVector,
    capped_simplex_product,
    evaluate_objective,
    product_of_simplices,
    unit_simplex,
)
from .problems import (
    build_balanced_dev,
    build_graph_cut,
    build_l1svm,
    build_one_median,
    build_piecewise_linear,
    make_instance,
)
from .solver import (
    IterationRecord,
    SolverConfig,
    SolverError,
    estimate_curvature,
    run,
    smoothed_fw_baseline,
)

__all__ = [
    "FeasibleSet",
    "IterationRecord",
    "ProblemInstance",
    "SolverConfig",
    "SolverError",
    "SparseVector",
    "build_balanced_dev",
    "build_graph_cut",
    "build_l1svm",
    "build_one_median",
    "build_piecewise_linear",
    "capped_simplex_product",
    "estimate_curvature",
    "evaluate_objective",
    "make_instance",
    "product_of_simplices",
    "run",
    "smoothed_fw_baseline",
    "unit_simplex",
]
