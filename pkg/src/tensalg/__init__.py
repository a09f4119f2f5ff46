"""Tensor algebra over ordered vector spaces.

Named, variance-tagged indices; a commutative generalized product that
merges and contracts indices; a contraction planner; separable operators;
and direct, iterative and multigrid solvers for tensor equations.
"""

from .errors import (
    BreakdownError,
    DivergenceError,
    FormatError,
    IndexSpecError,
    PlanError,
    RegistryError,
    ShapeMismatchError,
    SingularSystemError,
    TensalgError,
)
from .io import read_tensor, write_tensor
from .notation import IndexSpec, TensorIndex, Variance, parse_index_spec, print_index_spec
from .planner import cost_report, execute, plan
from .separable import SeparableOperator, laplacian
from .solvers import (
    build_hierarchy,
    conjugate_gradients,
    direct_solve,
    invert,
    jacobi,
    tmg_solve,
    tmg_vcycle,
)
from .spaces import SpaceRegistry
from .tensor import (
    DenseTensor,
    add,
    inner_product,
    make_delta,
    new_tensor,
    scale,
    subtract,
    tensor_product,
    zeros,
)

__version__ = "0.1.0"

__all__ = [
    "BreakdownError",
    "DenseTensor",
    "DivergenceError",
    "FormatError",
    "IndexSpec",
    "IndexSpecError",
    "PlanError",
    "RegistryError",
    "SeparableOperator",
    "ShapeMismatchError",
    "SingularSystemError",
    "SpaceRegistry",
    "TensalgError",
    "TensorIndex",
    "Variance",
    "add",
    "build_hierarchy",
    "conjugate_gradients",
    "cost_report",
    "direct_solve",
    "execute",
    "inner_product",
    "invert",
    "jacobi",
    "laplacian",
    "make_delta",
    "new_tensor",
    "parse_index_spec",
    "plan",
    "print_index_spec",
    "read_tensor",
    "scale",
    "subtract",
    "tensor_product",
    "tmg_solve",
    "tmg_vcycle",
    "write_tensor",
    "zeros",
]
