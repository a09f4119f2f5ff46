"""Direct, iterative and multigrid solvers for tensor equations ``A U = B``."""

from .direct import DirectSolver, direct_solve, invert
from .iterative import SolveReport, cg, conjugate_gradients, inverse_diagonal, jacobi
from .maps import (
    DenseMap,
    DiagonalMap,
    GalerkinMap,
    LinearMap,
    SeparableMap,
    SumMap,
    as_linear_map,
)
from .multigrid import (
    Level,
    MultigridHierarchy,
    build_hierarchy,
    full_weighting,
    level_extents,
    linear_interpolation,
    tmg_solve,
    tmg_vcycle,
)

__all__ = [
    "DenseMap",
    "DiagonalMap",
    "DirectSolver",
    "GalerkinMap",
    "Level",
    "LinearMap",
    "MultigridHierarchy",
    "SeparableMap",
    "SolveReport",
    "SumMap",
    "as_linear_map",
    "build_hierarchy",
    "cg",
    "conjugate_gradients",
    "direct_solve",
    "full_weighting",
    "inverse_diagonal",
    "invert",
    "jacobi",
    "level_extents",
    "linear_interpolation",
    "tmg_solve",
    "tmg_vcycle",
]
