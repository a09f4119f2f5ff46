"""Command-line entry point: ``tensalg solve | bench-contraction | demo-recon``.

Exit status: 0 on success/convergence, 1 on input errors, 2 when a solver
does not converge (or a benchmark discrepancy exceeds its tolerance).
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .errors import TensalgError
from .planner import ExecutionStats, cost_report, execute, left_to_right_plan, plan
from .separable import laplacian, separable_convolution
from .solvers import (
    DenseMap,
    SeparableMap,
    SolveReport,
    build_hierarchy,
    conjugate_gradients,
    direct_solve,
    jacobi,
    tmg_solve,
)
from .tensor import DenseTensor, inner_product, scale, subtract

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2
BENCH_TOLERANCE = 1e-12


class InputError(Exception):
    pass


def _fail(msg):
    print(f"tensalg: error: {msg}", file=sys.stderr)
    return EXIT_INPUT


# ---------------------------------------------------------------------------
# solve


def _build_system(cfg, registry):
    spec = cfg.spec or cfg.default_spec()
    negate = False
    if cfg.operator == "laplacian":
        # raw [1,-2,1] is negative definite; flip system and rhs for CG
        op = -laplacian(registry, spec)
        negate = True
        return SeparableMap(op), negate
    if cfg.operator == "convolution":
        return SeparableMap(separable_convolution(registry, spec, cfg.kernel)), negate
    if not cfg.system.exists():
        raise InputError(f"system file not found: {cfg.system}")
    return DenseMap(io.read_tensor(cfg.system, registry)), negate


def _report_lines(cfg, report):
    lines = [report.table()]
    status = "converged" if report.converged else "NOT converged"
    lines.append(
        f"solver {report.solver} {status} after {report.iterations} iterations, "
        f"final <R,R> = {report.final_residual:.6e}"
    )
    if report.message:
        lines.append(report.message)
    return "\n".join(lines)


def cmd_solve(args):
    try:
        cfg = io.read_config(args.config)
        if args.threshold is not None:
            cfg.threshold = args.threshold
        if args.relative:
            cfg.relative = True
        if args.solver:
            cfg.solver = args.solver
        if not cfg.rhs.exists():
            raise InputError(f"rhs file not found: {cfg.rhs}")
        registry = cfg.registry()
        system, negate = _build_system(cfg, registry)
        b = io.read_tensor(cfg.rhs, registry)
        if b.indices != system.output_indices:
            raise InputError(
                f"rhs indices {b.spec!s} do not match the system outputs {system.output_spec!s}"
            )
        if negate:
            b = scale(-1.0, b)
        if cfg.solver == "tmg":
            hierarchy = build_hierarchy(system)
    except (InputError, TensalgError) as e:
        return _fail(str(e))

    kw = dict(threshold=cfg.threshold, relative=cfg.relative)
    try:
        if cfg.solver == "jacobi":
            u, report = jacobi(system, b, max_iters=cfg.max_iterations, **kw)
        elif cfg.solver == "cg":
            u, report = conjugate_gradients(system, b, max_iters=cfg.max_iterations, **kw)
        elif cfg.solver == "tmg":
            u, report = tmg_solve(
                hierarchy, b, max_cycles=cfg.max_iterations,
                pre_sweeps=cfg.pre_sweeps, post_sweeps=cfg.post_sweeps, **kw,
            )
        else:
            start = time.perf_counter()
            r0 = inner_product(b, b)
            u = direct_solve(system, b)
            r = subtract(system.apply(u), b)
            report = SolveReport("direct", 1, [r0, inner_product(r, r)], True)
            report.wall_time = time.perf_counter() - start
    except TensalgError as e:
        print(f"tensalg: solver {cfg.solver} failed: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    io.write_tensor(cfg.output, u)
    if args.history:
        rows = [f"{i} {rho:.17g}" for i, rho in enumerate(report.residual_history)]
        io.atomic_write(args.history, "\n".join(rows) + "\n")
    print(_report_lines(cfg, report))
    print(f"solution written to {cfg.output}")
    print(f"wall time {report.wall_time:.3f} s", file=sys.stderr)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# bench-contraction


def cmd_bench(args):
    try:
        expr = io.read_expression(args.expr)
    except TensalgError as e:
        return _fail(str(e))
    if len(expr.names) == 1:
        print("nothing to plan")
        return EXIT_OK
    sigs = expr.signatures()
    try:
        best = plan(sigs)
    except TensalgError as e:
        return _fail(str(e))
    ltr = left_to_right_plan(sigs)
    print(f"optimal plan: {best.render()}")
    print(cost_report(best))
    print(f"left-to-right plan: {ltr.render()}")
    print(cost_report(ltr))
    ratio = ltr.total_flops / best.total_flops if best.total_flops else float("inf")
    print(f"speedup (flops) {ratio:.4g}x")
    if not args.execute:
        return EXIT_OK
    rng = np.random.default_rng(args.random_seed)
    factors = []
    for sig in sigs:
        shape = [expr.registry.extent(ix.space) for ix in sig.indices]
        factors.append(DenseTensor(expr.registry, sig.indices, rng.standard_normal(shape)))
    s_best, s_ltr = ExecutionStats(), ExecutionStats()
    a = execute(best, factors, s_best)
    b = execute(ltr, factors, s_ltr)
    diff = float(np.max(np.abs(a.data - b.data))) if a.data.size else 0.0
    ref = float(np.max(np.abs(b.data))) if b.data.size else 0.0
    rel = diff / ref if ref > 0 else diff
    print(f"measured peak optimal={s_best.peak} left-to-right={s_ltr.peak}")
    print(f"discrepancy max-abs={diff:.3e} relative={rel:.3e}")
    return EXIT_OK if rel <= BENCH_TOLERANCE else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# demo-recon


def cmd_demo(args):
    from . import demo

    if args.seed < 0:
        return _fail(f"seed must be non-negative, got {args.seed}")
    solvers = list(demo.DEMO_SOLVERS[:3]) if args.compare else [args.solver]
    try:
        problem = demo.build_problem(args.grid, args.samples, args.seed, args.lam)
    except TensalgError as e:
        return _fail(str(e))
    print(f"grid {args.grid}x{args.grid}, {args.samples} samples, seed {args.seed}, lambda {args.lam:g}")
    print("solver  iterations  converged  max-abs error")
    result = None
    status = EXIT_OK
    for name in solvers:
        try:
            u, rep = demo.solve_problem(problem, name, args.threshold, args.max_iterations)
        except TensalgError as e:
            print(f"tensalg: solver {name} failed: {e}", file=sys.stderr)
            return EXIT_NOT_CONVERGED
        err = float(np.max(np.abs(u - problem.truth)))
        print(f"{name:6s}  {rep.iterations:10d}  {'yes' if rep.converged else 'no':9s}  {err:.4e}")
        print(f"wall time {name} {rep.wall_time:.3f} s", file=sys.stderr)
        if name == args.solver or result is None:
            result = u
        if name == args.solver and not rep.converged:
            status = EXIT_NOT_CONVERGED
    prefix = Path(args.output)
    out = DenseTensor(problem.registry, problem.system.input_indices, result)
    io.write_tensor(prefix.with_name(prefix.name + ".tns"), out)
    io.atomic_write(prefix.with_name(prefix.name + ".pgm"), io.format_pgm(result))
    print(f"wrote {prefix}.tns and {prefix}.pgm")
    return status


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (1), keeping 2 for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="tensalg", description="Tensor algebra solvers and tools")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a tensor equation described by a config file")
    s.add_argument("config")
    s.add_argument("--history", help="write (iteration, <R,R>) pairs to this file")
    s.add_argument("--threshold", type=float, help="override the convergence threshold")
    s.add_argument("--relative", action="store_true", help="threshold relative to <R0,R0>")
    s.add_argument("--solver", choices=io.SOLVERS, help="override the configured solver")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench-contraction", help="plan a product and compare with left-to-right")
    b.add_argument("expr")
    b.add_argument("--execute", action="store_true", help="run both plans on random data")
    b.add_argument("--random-seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("demo-recon", help="scattered-data reconstruction demo")
    d.add_argument("--grid", type=int, default=33)
    d.add_argument("--samples", type=int, default=200)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--solver", choices=("jacobi", "cg", "tmg", "direct"), default="tmg")
    d.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    d.add_argument("--threshold", type=float, default=1e-8, help="relative threshold")
    d.add_argument("--max-iterations", type=int, default=5000)
    d.add_argument("--compare", action="store_true", help="also run jacobi, cg and tmg")
    d.add_argument("--output", default="recon", help="output file prefix")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
