"""Scattered-data reconstruction on a 2D grid.

A smooth synthetic field is sampled at random grid points and recovered by
regularized least squares::

    (M + lam * L^T L) u = M f

``M`` is the 0/1 sampling mask (a diagonal map) and ``L`` the separable
Laplacian, so the regularizer is a biharmonic smoothness penalty.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import TensalgError
from .separable import laplacian
from .solvers import (
    DiagonalMap,
    SeparableMap,
    SumMap,
    build_hierarchy,
    conjugate_gradients,
    direct_solve,
    jacobi,
    tmg_solve,
)
from .solvers.iterative import SolveReport, inverse_diagonal
from .spaces import SpaceRegistry
from .tensor import DenseTensor, tensor_product

DEMO_SOLVERS = ("jacobi", "cg", "tmg", "direct")


def synthetic_field(n):
    """Sum of sine modes that vanish on the grid border."""
    s = np.linspace(0.0, 1.0, n)
    u, v = np.meshgrid(s, s, indexing="ij")
    return (
        np.sin(math.pi * u) * np.sin(math.pi * v)
        + 0.5 * np.sin(2 * math.pi * u) * np.sin(3 * math.pi * v)
        + 0.25 * np.sin(4 * math.pi * u) * np.sin(math.pi * v)
    )


@dataclass
class Problem:
    registry: SpaceRegistry
    system: SumMap
    rhs: DenseTensor
    truth: np.ndarray
    mask: np.ndarray


def build_problem(n, samples, seed=0, lam=1e-3):
    if n < 3:
        raise TensalgError(f"grid size must be >= 3, got {n}")
    if not 0 < samples <= n * n:
        raise TensalgError(f"sample count must be in 1..{n * n}, got {samples}")
    if lam <= 0:
        raise TensalgError(f"lambda must be positive, got {lam}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(n * n, size=samples, replace=False)
    mask = np.zeros(n * n)
    mask[picked] = 1.0
    mask = mask.reshape(n, n)
    truth = synthetic_field(n)

    reg = SpaceRegistry([("X", n), ("Y", n)])
    lap = laplacian(reg, "x^2,x_,y^2,y_")
    reg_term = lap.transpose("x^1,y^1").compose(lap).scaled(lam)
    m = DenseTensor(reg, reg_term.output_indices, mask)
    system = SumMap([DiagonalMap(m, "x^,y^"), SeparableMap(reg_term)])
    rhs = tensor_product([m, DenseTensor(reg, reg_term.output_indices, truth)])
    return Problem(reg, system, rhs, truth, mask)


def _jacobi_weight(system, iters=50):
    """``1 / rho(E A)``: safe damping for plain Jacobi on the biharmonic system."""
    e = inverse_diagonal(system)
    reg = system.registry
    rng = np.random.default_rng(0)
    shape = [reg.extent(ix.space) for ix in system.input_indices]
    v = DenseTensor(reg, system.input_indices, rng.standard_normal(shape))
    rho = 1.0
    for _ in range(iters):
        w = system.to_input(tensor_product([system.apply(v), e]))
        rho = float(np.linalg.norm(w.data) / np.linalg.norm(v.data))
        v = DenseTensor(reg, w.indices, w.data / np.linalg.norm(w.data))
    return 1.0 / rho


def solve_problem(problem, solver, threshold=1e-8, max_iterations=5000):
    """Solve with a relative threshold; returns (solution array, SolveReport)."""
    a, b = problem.system, problem.rhs
    if solver == "jacobi":
        u, rep = jacobi(a, b, threshold=threshold, max_iters=max_iterations,
                        weight=_jacobi_weight(a), relative=True)
    elif solver == "cg":
        u, rep = conjugate_gradients(a, b, threshold=threshold, max_iters=max_iterations, relative=True)
    elif solver == "tmg":
        h = build_hierarchy(a, weight="auto")
        u, rep = tmg_solve(h, b, threshold=threshold, max_cycles=max_iterations, relative=True)
    elif solver == "direct":
        u = direct_solve(a, b, max_unknowns=max(4096, a.n_in))
        rep = SolveReport("direct", iterations=1, converged=True)
    else:
        raise TensalgError(f"unknown solver {solver!r}; choose from {', '.join(DEMO_SOLVERS)}")
    return u.data, rep
