"""Dense direct solve and explicit inversion by LU with partial pivoting."""

import warnings

import numpy as np
import scipy.linalg

from ..errors import ShapeMismatchError, SingularSystemError
from ..notation import TensorIndex
from ..tensor import DenseTensor, _wrap
from .maps import as_linear_map

MAX_UNKNOWNS = 4096
PIVOT_TOLERANCE = 1e-12


class DirectSolver:
    """LU factorization of a linear map, reusable across right-hand sides.

    Parameters
    ----------
    system : LinearMap, SeparableOperator or DenseTensor
    max_unknowns : int
        Systems larger than this are refused (the dense matrix would not
        fit comfortably in memory).

    Raises
    ------
    SingularSystemError
        If a pivot falls below ``1e-12`` times the largest entry.
    """

    def __init__(self, system, max_unknowns=MAX_UNKNOWNS):
        self.map = as_linear_map(system)
        n_in, n_out = self.map.n_in, self.map.n_out
        if n_in != n_out:
            raise ShapeMismatchError(f"system is {n_out}x{n_in}, not square")
        if n_in > max_unknowns:
            raise ShapeMismatchError(
                f"{n_in} unknowns exceed the direct-solve limit of {max_unknowns}"
            )
        m = np.asarray(self.map.matrix(), dtype=float)
        scale = np.max(np.abs(m)) if m.size else 0.0
        if scale == 0.0 or not np.isfinite(scale):
            raise SingularSystemError("system matrix is zero or not finite")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self.lu, self.piv = scipy.linalg.lu_factor(m, check_finite=False)
        pivots = np.abs(np.diag(self.lu))
        k = int(np.argmin(pivots))
        if pivots[k] <= PIVOT_TOLERANCE * scale:
            raise SingularSystemError(
                f"pivot {k} is {pivots[k]:.3g}, below {PIVOT_TOLERANCE:g} x max |a|"
            )
        self.n = n_in

    def solve(self, b):
        self.map.check_output(b)
        x = scipy.linalg.lu_solve((self.lu, self.piv), b.components, check_finite=False)
        shape = [self.map.registry.extent(ix.space) for ix in self.map.input_indices]
        return DenseTensor(self.map.registry, self.map.input_indices, x.reshape(shape))

    def inverse_matrix(self):
        return scipy.linalg.lu_solve((self.lu, self.piv), np.eye(self.n), check_finite=False)


def direct_solve(system, b, max_unknowns=MAX_UNKNOWNS):
    """Solve ``system * U = b`` exactly (up to rounding)."""
    return DirectSolver(system, max_unknowns).solve(b)


def invert(system, max_unknowns=MAX_UNKNOWNS):
    """Explicit inverse as a tensor.

    For ``A^{x1}_{x}`` the result is ``Ainv^{x2}_{x1}``: it contracts
    against the outputs of ``A`` and produces the inputs relabelled into a
    fresh frame (past the largest frame used on that space), so that
    ``Ainv * A`` is the delta ``^{x2}_{x}``.
    """
    solver = DirectSolver(system, max_unknowns)
    amap = solver.map
    top = {}
    for ix in amap.input_indices + amap.output_indices:
        top[ix.space] = max(top.get(ix.space, 0), ix.frame)
    rows = []
    for ix in amap.input_indices:
        # one new frame per input index, so two inputs on a space stay apart
        top[ix.space] += 1
        rows.append(TensorIndex(ix.space, top[ix.space], ix.variance))
    cols = [ix.flipped() for ix in amap.output_indices]
    reg = amap.registry
    shape = [reg.extent(ix.space) for ix in rows + cols]
    return _wrap(reg, rows + cols, solver.inverse_matrix().reshape(shape))
