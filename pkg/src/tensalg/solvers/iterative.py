"""Stationary Jacobi iteration and Conjugate Gradients on tensor equations."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import BreakdownError, DivergenceError, SingularSystemError
from ..tensor import DenseTensor, add, inner_product, scale, subtract, tensor_product
from .maps import as_linear_map

DEFAULT_THRESHOLD = 1.0e-4


@dataclass
class SolveReport:
    """Outcome of an iterative solve.

    ``residual_history[0]`` is the initial ``<R, R>``, so the history has
    ``iterations + 1`` entries.
    """

    solver: str
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    message: str = ""

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else math.nan

    def table(self):
        lines = ["iteration  <R,R>"]
        for i, rho in enumerate(self.residual_history):
            lines.append(f"{i:9d}  {rho:.6e}")
        return "\n".join(lines)


def _check_finite(rho, it):
    if not math.isfinite(rho):
        raise DivergenceError(f"residual became non-finite at iteration {it}")


def _threshold(threshold, rho0, relative):
    return threshold * rho0 if relative else threshold


def inverse_diagonal(a):
    """Elementwise reciprocal of the main diagonal (over the output indices)."""
    d = a.diagonal()
    if np.any(d.data == 0):
        k = int(np.flatnonzero(d.components == 0)[0])
        raise SingularSystemError(f"main diagonal has a zero entry at flat position {k}")
    return DenseTensor(d.registry, d.indices, 1.0 / d.data)


def jacobi(a, b, u0=None, threshold=DEFAULT_THRESHOLD, max_iters=10000, weight=1.0, relative=False):
    """Jacobi iteration ``U <- U - w * (R . E)`` with ``R = A U - B``.

    ``E`` is the reciprocal main diagonal, multiplied elementwise into the
    residual (both carry the output indices); the product is bridged back
    to the input frames by deltas.

    Returns
    -------
    (DenseTensor, SolveReport)
    """
    a = as_linear_map(a)
    a.check_output(b)
    u = a.input_zeros() if u0 is None else u0
    a.check_input(u)
    e = inverse_diagonal(a)
    start = time.perf_counter()
    r = subtract(a.apply(u), b)
    rho = inner_product(r, r)
    _check_finite(rho, 0)
    thr = _threshold(threshold, rho, relative)
    report = SolveReport("jacobi", residual_history=[rho])
    it = 0
    while rho > thr and it < max_iters:
        step = a.to_input(tensor_product([r, e]))
        u = subtract(u, scale(weight, step)) if weight != 1.0 else subtract(u, step)
        r = subtract(a.apply(u), b)
        rho = inner_product(r, r)
        it += 1
        _check_finite(rho, it)
        report.residual_history.append(rho)
    report.iterations = it
    report.converged = rho <= thr
    report.wall_time = time.perf_counter() - start
    if not report.converged:
        report.message = f"no convergence after {it} iterations"
    return u, report


def conjugate_gradients(a, b, u0=None, threshold=DEFAULT_THRESHOLD, max_iters=10000, relative=False):
    """Conjugate Gradients for symmetric definite tensor systems.

    Follows the classic recurrence with ``<., .>`` evaluated by delta
    contractions; ``P . D`` relabels the search direction from output
    frames to input frames.  Terminates when ``<R, R> <= threshold``.

    Returns
    -------
    (DenseTensor, SolveReport)
    """
    a = as_linear_map(a)
    a.check_output(b)
    c = a.input_zeros() if u0 is None else u0
    a.check_input(c)
    start = time.perf_counter()
    r = subtract(b, a.apply(c))
    p = r
    rho = inner_product(r, r)
    _check_finite(rho, 0)
    thr = _threshold(threshold, rho, relative)
    report = SolveReport("cg", residual_history=[rho])
    it = 0
    while rho > thr and it < max_iters:
        pd = a.to_input(p)
        q = a.apply(pd)
        pq = inner_product(p, q)
        if pq == 0.0:
            raise BreakdownError(f"<P,Q> = 0 at iteration {it + 1}")
        alpha = rho / pq
        c = add(c, scale(alpha, pd))
        r = subtract(r, scale(alpha, q))
        rho1 = inner_product(r, r)
        it += 1
        _check_finite(rho1, it)
        p = add(r, scale(rho1 / rho, p))
        rho = rho1
        report.residual_history.append(rho)
    report.iterations = it
    report.converged = rho <= thr
    report.wall_time = time.perf_counter() - start
    if not report.converged:
        report.message = f"no convergence after {it} iterations"
    return c, report


cg = conjugate_gradients
