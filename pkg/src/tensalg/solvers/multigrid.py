"""Tensor multigrid: separable grid transfers and the V-cycle.

Coarse grids live on their own spaces.  A hierarchy therefore works in an
extended registry: the spaces of the original system, in their original
order, followed by one coarse space per dimension and level.  Tensors
passed in over the original registry are rebound on entry and on exit.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, ShapeMismatchError, TensalgError
from ..notation import TensorIndex
from ..separable import SeparableOperator
from ..spaces import SpaceRegistry
from ..tensor import DenseTensor, _wrap, add, inner_product, scale, subtract, tensor_product
from .direct import DirectSolver
from .iterative import DEFAULT_THRESHOLD, SolveReport, inverse_diagonal
from .maps import (
    DenseMap,
    DiagonalMap,
    GalerkinMap,
    SeparableMap,
    SumMap,
    as_linear_map,
)

DEFAULT_WEIGHT = 2.0 / 3.0
STAGNATION_RATIO = 0.99
STAGNATION_CYCLES = 3


def coarse_extent(n):
    return (n + 1) // 2


def full_weighting(n_fine):
    """Restriction ``[1/4, 1/2, 1/4]`` onto the even fine sites."""
    n_coarse = coarse_extent(n_fine)
    r = np.zeros((n_coarse, n_fine))
    for i in range(n_coarse):
        f = 2 * i
        r[i, f] = 0.5
        if f - 1 >= 0:
            r[i, f - 1] = 0.25
        if f + 1 < n_fine:
            r[i, f + 1] = 0.25
    return r


def linear_interpolation(n_fine):
    """Prolongation: twice the transpose of the full-weighting restriction."""
    return 2.0 * full_weighting(n_fine).T


def level_extents(extents, levels="auto"):
    """Extents per level: halve (rounded up) each axis above 3 until all are <= 3."""
    out = [tuple(extents)]
    while any(n > 3 for n in out[-1]):
        if levels != "auto" and len(out) >= levels:
            break
        out.append(tuple(coarse_extent(n) if n > 3 else n for n in out[-1]))
    return out


@dataclass
class Level:
    """One scale: its system, and transfers to the next coarser scale."""

    system: object
    extents: tuple
    restriction: SeparableOperator = None
    prolongation: SeparableOperator = None
    inverse_diagonal: DenseTensor = None
    weight: float = DEFAULT_WEIGHT
    solver: DirectSolver = None

    @property
    def coarsest(self):
        return self.restriction is None


class MultigridHierarchy:
    """Scales from fine (index 0) to coarse; the last one is solved directly."""

    def __init__(self, base_registry, registry, levels):
        self.base_registry = base_registry
        self.registry = registry
        self.levels = levels

    def __len__(self):
        return len(self.levels)

    @property
    def extents(self):
        return [lvl.extents for lvl in self.levels]

    @property
    def top(self):
        return self.levels[0].system

    def to_internal(self, t):
        if t.registry == self.registry:
            return t
        if t.registry != self.base_registry:
            raise ShapeMismatchError("tensor belongs to neither registry of the hierarchy")
        return DenseTensor(self.registry, t.indices, t.data)

    def to_external(self, t):
        return DenseTensor(self.base_registry, t.indices, t.data)


def _coarse_names(registry, spaces, depth):
    taken = {n.lower() for n in registry.names}
    names = []
    for lvl in range(1, depth):
        row = []
        for s in spaces:
            name = f"{s}L{lvl}"
            while name.lower() in taken:
                name += "L"
            taken.add(name.lower())
            row.append(name)
        names.append(row)
    return names


def _relabel(ix, space):
    return TensorIndex(space, ix.frame, ix.variance)


def _transfer(registry, src, dst, mats):
    """Single-term separable operator taking ``src`` indices to ``dst`` indices."""
    factors = [
        _wrap(registry, [d, s.flipped()], m) for s, d, m in zip(src, dst, mats)
    ]
    return SeparableOperator(registry, list(src), list(dst), [(1.0, factors)])


def _coarsen(system, r_mats, p_mats, fine_dims, coarse_dims, registry):
    """Galerkin coarse system ``R * system * P`` keeping the map's structure."""
    if isinstance(system, SeparableMap):
        terms = []
        for weight, mats in system.op.term_matrices():
            factors = []
            for k, ((ci, co), r, p) in enumerate(zip(coarse_dims, r_mats, p_mats)):
                inner = mats.get(k)
                m = r @ p if inner is None else r @ inner @ p
                factors.append(_wrap(registry, [co, ci.flipped()], m))
            terms.append((weight, factors))
        return SeparableMap(
            SeparableOperator(
                registry, [i for i, _ in coarse_dims], [o for _, o in coarse_dims], terms
            )
        )
    if isinstance(system, SumMap):
        return SumMap(
            [_coarsen(m, r_mats, p_mats, fine_dims, coarse_dims, registry) for m in system.maps]
        )
    if isinstance(system, GalerkinMap):
        r_old = [m for _, m in sorted(system.restriction.term_matrices()[0][1].items())]
        p_old = [m for _, m in sorted(system.prolongation.term_matrices()[0][1].items())]
        inner_dims = system.inner.dims
        restriction = _transfer(
            registry,
            [o for _, o in inner_dims],
            [o for _, o in coarse_dims],
            [r @ ro for r, ro in zip(r_mats, r_old)],
        )
        prolongation = _transfer(
            registry,
            [i for i, _ in coarse_dims],
            [i for i, _ in inner_dims],
            [po @ p for po, p in zip(p_old, p_mats)],
        )
        return GalerkinMap(system.inner, restriction, prolongation)
    if isinstance(system, (DiagonalMap, DenseMap)):
        restriction = _transfer(
            registry, [o for _, o in fine_dims], [o for _, o in coarse_dims], r_mats
        )
        prolongation = _transfer(
            registry, [i for i, _ in coarse_dims], [i for i, _ in fine_dims], p_mats
        )
        return GalerkinMap(system, restriction, prolongation)
    raise TensalgError(f"cannot coarsen a {type(system).__name__}")


def _power_weight(a, e, iters=30, seed=0):
    """``4 / (3 rho)`` with ``rho`` the spectral radius of ``E A`` (power iteration)."""
    rng = np.random.default_rng(seed)
    reg = a.registry
    shape = [reg.extent(ix.space) for ix in a.input_indices]
    v = DenseTensor(reg, a.input_indices, rng.standard_normal(shape))
    rho = 0.0
    for _ in range(iters):
        w = a.to_input(tensor_product([a.apply(v), e]))
        norm = float(np.linalg.norm(w.data))
        if norm == 0.0:
            break
        rho = norm / float(np.linalg.norm(v.data))
        v = DenseTensor(reg, w.indices, w.data / norm)
    if rho == 0.0:
        return DEFAULT_WEIGHT
    return 4.0 / (3.0 * rho)


def build_hierarchy(a, levels="auto", weight=DEFAULT_WEIGHT):
    """Build the multigrid hierarchy for a square system on a grid.

    Parameters
    ----------
    a : SeparableOperator or LinearMap
        Every dimension must map a space to itself with extent >= 3.
    levels : "auto" or int
        Maximum number of scales; ``"auto"`` coarsens until every extent
        is at most 3.
    weight : float or "auto"
        Damped-Jacobi smoothing weight.  ``"auto"`` uses ``4 / (3 rho)``
        per level, ``rho`` estimated by power iteration.

    Returns
    -------
    MultigridHierarchy
    """
    a = as_linear_map(a)
    base = a.registry
    dims = a.dims
    spaces = []
    for i, o in dims:
        if i.space != o.space:
            raise ShapeMismatchError(f"dimension {i}->{o} changes space")
        spaces.append(i.space)
    if len(set(spaces)) != len(spaces):
        raise ShapeMismatchError("multigrid needs one space per dimension")
    extents = [base.extent(s) for s in spaces]
    if any(n < 3 for n in extents):
        raise ShapeMismatchError(f"grid extents {extents} must all be >= 3")
    if levels != "auto" and (int(levels) != levels or levels < 1):
        raise TensalgError(f"levels must be 'auto' or a positive count, got {levels!r}")
    per_level = level_extents(extents, levels)
    names = _coarse_names(base, spaces, len(per_level))
    reg = SpaceRegistry(
        list(base.spaces)
        + [(n, e) for row, ext in zip(names, per_level[1:]) for n, e in zip(row, ext)]
    )
    system = a.rebind(reg)
    out = []
    level_dims = dims
    for lvl, ext in enumerate(per_level):
        level = Level(system=system, extents=ext)
        if lvl + 1 < len(per_level):
            coarse_dims = tuple(
                (_relabel(i, s), _relabel(o, s)) for (i, o), s in zip(dims, names[lvl])
            )
            r_mats, p_mats = [], []
            for n, nc in zip(ext, per_level[lvl + 1]):
                if nc == n:
                    r_mats.append(np.eye(n))
                    p_mats.append(np.eye(n))
                else:
                    r_mats.append(full_weighting(n))
                    p_mats.append(linear_interpolation(n))
            level.restriction = _transfer(
                reg, [o for _, o in level_dims], [o for _, o in coarse_dims], r_mats
            )
            level.prolongation = _transfer(
                reg, [i for i, _ in coarse_dims], [i for i, _ in level_dims], p_mats
            )
            level.inverse_diagonal = inverse_diagonal(system)
            if weight == "auto":
                level.weight = _power_weight(system, level.inverse_diagonal)
            else:
                level.weight = float(weight)
            system = _coarsen(system, r_mats, p_mats, level_dims, coarse_dims, reg)
            level_dims = coarse_dims
        else:
            level.solver = DirectSolver(system)
        out.append(level)
    return MultigridHierarchy(base, reg, out)


def smooth(level, u, b, sweeps):
    """Damped Jacobi sweeps ``U <- U - w * (R . E)``, ``R = A U - B``."""
    a = level.system
    for _ in range(sweeps):
        r = subtract(a.apply(u), b)
        u = subtract(u, scale(level.weight, a.to_input(tensor_product([r, level.inverse_diagonal]))))
    return u


def tmg_vcycle(h, scale_index, u, b, pre_sweeps=2, post_sweeps=2):
    """One V-cycle from ``scale_index`` down to the coarsest scale and back."""
    if not 0 <= scale_index < len(h.levels):
        raise TensalgError(f"scale {scale_index} outside 0..{len(h.levels) - 1}")
    external = u.registry != h.registry
    u = h.to_internal(u)
    b = h.to_internal(b)
    level = h.levels[scale_index]
    level.system.check_input(u)
    level.system.check_output(b)
    if not level.coarsest:
        u = smooth(level, u, b, pre_sweeps)
        r = subtract(b, level.system.apply(u))
        coarse_b = level.restriction.apply(r)
        coarse = h.levels[scale_index + 1].system
        coarse_u = tmg_vcycle(h, scale_index + 1, coarse.input_zeros(), coarse_b, pre_sweeps, post_sweeps)
        u = add(u, level.prolongation.apply(coarse_u))
        u = smooth(level, u, b, post_sweeps)
    else:
        u = level.solver.solve(b)
    return h.to_external(u) if external else u


def tmg_solve(
    h,
    b,
    threshold=DEFAULT_THRESHOLD,
    max_cycles=100,
    u0=None,
    relative=False,
    pre_sweeps=2,
    post_sweeps=2,
):
    """Repeat V-cycles until ``<R, R> <= threshold``.

    Stops early, unconverged, if the residual shrinks by less than a factor
    0.99 for three cycles in a row.

    Returns
    -------
    (DenseTensor, SolveReport)
    """
    a = h.top
    external = b.registry != h.registry
    b = h.to_internal(b)
    a.check_output(b)
    u = a.input_zeros() if u0 is None else h.to_internal(u0)
    a.check_input(u)
    start = time.perf_counter()
    r = subtract(a.apply(u), b)
    rho = inner_product(r, r)
    thr = threshold * rho if relative else threshold
    report = SolveReport("tmg", residual_history=[rho])
    cycles = 0
    slow = 0
    while rho > thr and cycles < max_cycles:
        u = tmg_vcycle(h, 0, u, b, pre_sweeps, post_sweeps)
        r = subtract(a.apply(u), b)
        rho_new = inner_product(r, r)
        cycles += 1
        if not math.isfinite(rho_new):
            raise DivergenceError(f"residual became non-finite at cycle {cycles}")
        report.residual_history.append(rho_new)
        slow = slow + 1 if rho_new > STAGNATION_RATIO * rho else 0
        rho = rho_new
        if slow >= STAGNATION_CYCLES and rho > thr:
            report.message = f"stagnation after {cycles} cycles"
            break
    report.iterations = cycles
    report.converged = rho <= thr
    report.wall_time = time.perf_counter() - start
    if not report.converged and not report.message:
        report.message = f"no convergence after {cycles} cycles"
    return (h.to_external(u) if external else u), report
