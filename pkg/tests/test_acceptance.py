"""Acceptance suite: one test per primary criterion.

Each test prints a single ``PASS``/``FAIL`` line (visible under ``pytest -v``
and when the file is run directly) before asserting, so a failing criterion
still reports its measured numbers.
"""

import itertools
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_product, rel_err
from oracle import dft_direct, reference_of
from test_planner import brute_min_flops, chain_instance
from test_tensor import central_jacobian
from tensalg import io
from tensalg.demo import build_problem, solve_problem
from tensalg.memory import track_allocations
from tensalg.notation import TensorIndex, Variance, parse_index_spec, print_index_spec
from tensalg.planner import plan, signature_of
from tensalg.separable import (
    SeparableOperator,
    dft_1d,
    finite_difference_1d,
    laplacian,
    resample_1d,
    separable_convolution,
    separable_dft,
)
from tensalg.solvers import (
    DiagonalMap,
    SeparableMap,
    SumMap,
    build_hierarchy,
    conjugate_gradients,
    direct_solve,
    jacobi,
    tmg_solve,
)
from tensalg.spaces import SpaceRegistry
from tensalg.tensor import (
    DenseTensor,
    as_matrix,
    derivative_of_linear_map,
    inner_product,
    inner_product_elementwise,
    make_delta,
    new_tensor,
    tensor_product,
)

UP, CO = Variance.CONTRA, Variance.CO
ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def criterion(capsys):
    def report(label, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return report


# 1 -----------------------------------------------------------------------


def test_product_oracle(criterion):
    start = time.perf_counter()
    worst, bad_layout = 0.0, 0
    for seed in range(500):
        rng = np.random.default_rng(seed)
        _, factors = random_product(rng, max_factors=4, max_extent=4)
        got = tensor_product(factors)
        idx, want = reference_of(factors)
        if [(ix.space, ix.frame, ix.variance is UP) for ix in got.indices] != idx:
            bad_layout += 1
        worst = max(worst, rel_err(got.data, want))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and bad_layout == 0 and elapsed < 30
    criterion(
        "product oracle",
        ok,
        f"500 products, max rel err {worst:.2e}, layout mismatches {bad_layout}, {elapsed:.1f} s",
    )


# 2 -----------------------------------------------------------------------


def test_commutativity(criterion):
    worst, layout = 0.0, 0
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        while True:
            _, factors = random_product(rng, max_factors=3)
            if len(factors) == 3:
                break
        ref = tensor_product(factors)
        for perm in itertools.permutations(factors):
            r = tensor_product(list(perm))
            layout += r.indices != ref.indices
            worst = max(worst, rel_err(r.data, ref.data))
    criterion(
        "commutativity",
        worst <= 1e-12 and layout == 0,
        f"100 x 6 orders, max rel err {worst:.2e}, layout mismatches {layout}",
    )


# 3 -----------------------------------------------------------------------


def _flip(v):
    return CO if v is UP else UP


def _random_tensor(rng):
    """Random tensor with at most one variance per (space, frame) group."""
    reg = SpaceRegistry([(s, int(rng.integers(1, 4))) for s in "XYZ"])
    indices = []
    for s in "XYZ":
        for f in range(3):
            if rng.random() < 0.4:
                indices.append(TensorIndex(s, f, UP if rng.random() < 0.5 else CO))
    t = new_tensor(reg, print_index_spec(indices))
    return DenseTensor(reg, t.indices, rng.standard_normal([reg.extent(ix.space) for ix in t.indices]))


def test_delta_and_inner_product_laws(criterion):
    failures, worst = [], 0.0
    for seed in range(100):
        rng = np.random.default_rng(20_000 + seed)
        t = _random_tensor(rng)
        reg = t.registry
        # relabel every index to a fresh frame
        relabel = [(ix.space, ix.frame + 10, ix.variance, ix.frame, _flip(ix.variance)) for ix in t.indices]
        moved = tensor_product([t, make_delta(reg, relabel)]) if relabel else t
        if not np.array_equal(moved.data, t.data):
            failures.append(f"relabel seed {seed}")
        # flip every variance to a fresh frame and back
        if t.indices:
            down = [(ix.space, ix.frame, _flip(ix.variance), ix.frame + 10, _flip(ix.variance)) for ix in t.indices]
            back = [(ix.space, ix.frame + 10, ix.variance, ix.frame, ix.variance) for ix in t.indices]
            flipped = tensor_product([t, make_delta(reg, down)])
            restored = tensor_product([flipped, make_delta(reg, back)])
            if restored != t:
                failures.append(f"flip seed {seed}")
            single = tensor_product([make_delta(reg, [p]) for p in relabel])
            if make_delta(reg, relabel) != single:
                failures.append(f"multi-pair seed {seed}")
        s = DenseTensor(reg, t.indices, rng.standard_normal(t.data.shape))
        via_delta = inner_product(t, s)
        via_elementwise = inner_product_elementwise(t, s)
        direct = float(np.sum(t.data * s.data))
        err = abs(via_delta - via_elementwise) / max(abs(via_elementwise), 1e-300)
        worst = max(worst, err, abs(via_delta - direct) / max(abs(direct), 1e-300))
        if inner_product(t, t) < 0:
            failures.append(f"negative <T,T> seed {seed}")
    criterion(
        "delta and inner-product laws",
        not failures and worst <= 1e-12,
        f"100 instances, exact-law failures {failures or 'none'}, inner-product rel err {worst:.2e}",
    )


# 4 -----------------------------------------------------------------------


def test_derivative_finite_differences(criterion):
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(30_000 + seed)
        nx, ny = (int(v) for v in rng.integers(1, 4, size=2))
        w = SpaceRegistry([("X", nx), ("Y", ny)])
        a = new_tensor(w, "x^1,x_,y^1,y_", rng.standard_normal((nx, nx, ny, ny)))
        u = new_tensor(w, "x^,y^", rng.standard_normal((nx, ny)))
        d = derivative_of_linear_map(a, "x^,y^")
        jac = as_matrix(d, "x^1,y^1", "x_,y_")
        worst = max(worst, float(np.max(np.abs(jac - central_jacobian(a, u)))))
    criterion("derivative check", worst <= 1e-6, f"20 maps, max abs err {worst:.2e}")


# 5 -----------------------------------------------------------------------


def test_planner_optimality(criterion):
    start = time.perf_counter()
    _, sigs = chain_instance()
    chain = plan(sigs).render()
    worse = 0
    count = 0
    seed = 40_000
    while count < 50:
        rng = np.random.default_rng(seed)
        seed += 1
        _, factors = random_product(rng, max_factors=6, max_order=3)
        if not 4 <= len(factors) <= 6:
            continue
        count += 1
        sigs = [signature_of(t, f"F{k}") for k, t in enumerate(factors)]
        worse += plan(sigs).total_flops > brute_min_flops(sigs)
    elapsed = time.perf_counter() - start
    ok = chain == "C·(B·(A·T))" and worse == 0 and elapsed < 60
    criterion(
        "planner optimality",
        ok,
        f"chain plan {chain}, 50 random signatures with a cheaper exhaustive plan: {worse}, {elapsed:.1f} s",
    )


# 6 -----------------------------------------------------------------------


def test_separable_vs_dense(criterion):
    worst, parseval = 0.0, 0.0
    for seed in range(10):
        rng = np.random.default_rng(50_000 + seed)
        ext = [int(v) for v in rng.integers(2, 7, size=3)]
        w = SpaceRegistry(list(zip("XYZ", ext)) + [("U", 2 * ext[0]), ("V", 2 * ext[1])])
        spec = "x^1,x_,y^1,y_,z^1,z_"
        u = new_tensor(w, "x^,y^,z^", rng.standard_normal(ext))
        re = [dft_1d(w, s, (1, 0))[0] for s in "XYZ"]
        im = [dft_1d(w, s, (1, 0))[1] for s in "XYZ"]
        ops = [
            laplacian(w, spec),
            separable_convolution(w, spec, rng.standard_normal(3)),
            SeparableOperator(
                w, "x^,y^,z^", "x^1,y^1,z^1",
                [(1.0, [finite_difference_1d(w, s, (1, 0), v)]) for s, v in zip("XYZ", ("forward", "backward", "central"))],
            ),
            SeparableOperator(
                w, "x^,y^,z^", "x^1,y^1,z^1",
                [(1.0, re), (-1.0, [re[0], im[1], im[2]]), (-1.0, [im[0], re[1], im[2]]), (-1.0, [im[0], im[1], re[2]])],
            ),
        ]
        for op in ops:
            dense = tensor_product([op.to_dense(), u])
            worst = max(worst, rel_err(op.apply(u).data, dense.data))
        worst = max(worst, rel_err(ops[-1].apply(u).data, np.fft.fftn(u.data).real))
        v = new_tensor(w, "x^,y^", rng.standard_normal(ext[:2]))
        rs = SeparableOperator(
            w, "x^,y^", "u^,v^",
            [(1.0, [resample_1d(w, "X", "U", (0, 0), "up", 2), resample_1d(w, "Y", "V", (0, 0), "up", 2)])],
        )
        worst = max(worst, rel_err(rs.apply(v).data, tensor_product([rs.to_dense(), v]).data))
        x = rng.standard_normal(ext[0])
        xr, xi = separable_dft(new_tensor(w, "x^", x))
        worst = max(worst, rel_err(xr.data + 1j * xi.data, dft_direct(x)))
        energy = float(np.sum(x**2))
        parseval = max(parseval, abs(energy - float(np.sum(xr.data**2 + xi.data**2)) / ext[0]) / energy)
    criterion(
        "separable vs dense",
        worst <= 1e-12 and parseval <= 1e-10,
        f"max rel err {worst:.2e}, Parseval rel err {parseval:.2e}",
    )


# 7 -----------------------------------------------------------------------


def _systems():
    out = []
    for dims, n in ((1, 40), (2, 12), (3, 16)):
        names = "XYZ"[:dims]
        w = SpaceRegistry([(s, n) for s in names])
        spec = ",".join(f"{s.lower()}^1,{s.lower()}_" for s in names)
        op = -laplacian(w, spec)
        rng = np.random.default_rng(n)
        shape = [n] * dims
        b = DenseTensor(w, op.output_indices, rng.standard_normal(shape))
        out.append((f"Poisson {n}^{dims}", SeparableMap(op), b))
    # shifted system with a variable diagonal
    w = SpaceRegistry([("X", 20), ("Y", 20)])
    op = -laplacian(w, "x^1,x_,y^1,y_")
    rng = np.random.default_rng(1)
    field = DenseTensor(w, op.output_indices, rng.uniform(0.5, 2.0, (20, 20)))
    system = SumMap([DiagonalMap(field, "x^,y^"), SeparableMap(op)])
    out.append(("Poisson+diag 20^2", system, DenseTensor(w, op.output_indices, rng.standard_normal((20, 20)))))
    return out


def test_solver_correctness(criterion):
    rows, worst = [], 0.0
    for name, a, b in _systems():
        ref = direct_solve(a, b)
        sols = {
            "jacobi": jacobi(a, b, threshold=1e-20, max_iters=20000)[0],
            "cg": conjugate_gradients(a, b, threshold=1e-24)[0],
            "tmg": tmg_solve(build_hierarchy(a), b, threshold=1e-24, max_cycles=100)[0],
        }
        errs = {k: float(np.max(np.abs(u.data - ref.data))) for k, u in sols.items()}
        worst = max(worst, *errs.values())
        rows.append(f"{name} ({a.n_in} unknowns) " + " ".join(f"{k}={v:.1e}" for k, v in errs.items()))
    w = SpaceRegistry([("X", 3)])
    tri = new_tensor(w, "x^1,x_", [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])
    u, rep = conjugate_gradients(tri, new_tensor(w, "x^1", [1, 1, 1]), threshold=1e-24)
    cg_ok = rep.iterations <= 3 and np.allclose(u.components, [1.5, 2.0, 1.5], atol=1e-12)
    criterion(
        "solver correctness",
        worst <= 1e-6 and cg_ok,
        f"max abs deviation from direct {worst:.1e} [{'; '.join(rows)}]; "
        f"CG N=3 -> {np.round(u.components, 12).tolist()} in {rep.iterations} iterations",
    )


# 8 -----------------------------------------------------------------------


def test_matrix_free_memory(criterion):
    n = 32
    w = SpaceRegistry([("X", n), ("Y", n), ("Z", n)])
    op = -laplacian(w, "x^1,x_,y^1,y_,z^1,z_")
    rng = np.random.default_rng(0)
    b = DenseTensor(w, op.output_indices, rng.standard_normal((n, n, n)))
    start = time.perf_counter()
    with track_allocations() as tracker:
        u, rep = conjugate_gradients(op, b, threshold=1e-10, relative=True)
    elapsed = time.perf_counter() - start
    limit = (n**3) ** 2
    ok = rep.converged and tracker.largest < limit and elapsed < 60
    criterion(
        "matrix-free memory",
        ok,
        f"32^3 CG {rep.iterations} iterations, largest allocation {tracker.largest} components "
        f"(limit {limit}), {elapsed:.1f} s",
    )


# 9 -----------------------------------------------------------------------


def _cycles(n):
    w = SpaceRegistry([("X", n), ("Y", n)])
    op = -laplacian(w, "x^1,x_,y^1,y_")
    rng = np.random.default_rng(n)
    b = DenseTensor(w, op.output_indices, rng.standard_normal((n, n)))
    _, rep = tmg_solve(build_hierarchy(op), b, threshold=1e-8, relative=True, max_cycles=100)
    return rep.iterations if rep.converged else None


def test_multigrid_mesh_independence(criterion):
    counts = {n: _cycles(n) for n in (17, 33, 65)}
    grid_ok = None not in counts.values() and counts[65] <= 2 * counts[17]
    problem = build_problem(33, 200, seed=0)
    iters = {}
    for name in ("tmg", "jacobi"):
        _, rep = solve_problem(problem, name, threshold=1e-8, max_iterations=5000)
        iters[name] = (rep.iterations, rep.converged)
    demo_ok = iters["tmg"][1] and iters["tmg"][0] < iters["jacobi"][0]
    criterion(
        "multigrid mesh independence",
        grid_ok and demo_ok,
        f"V-cycles to 1e-8: {counts}; demo 33^2/200 samples: tmg {iters['tmg'][0]} cycles "
        f"vs jacobi {iters['jacobi'][0]} sweeps (jacobi converged={iters['jacobi'][1]})",
    )


# 10 ----------------------------------------------------------------------


def _cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "tensalg.cli", *args], cwd=cwd, capture_output=True, check=False
    )


def test_round_trips_and_determinism(criterion, tmp_path):
    problems = []
    for seed in range(50):
        rng = np.random.default_rng(60_000 + seed)
        t = _random_tensor(rng)
        t = DenseTensor(t.registry, t.indices, t.data * 10.0 ** rng.integers(-200, 200, t.data.shape))
        path = tmp_path / f"t{seed}.tns"
        io.write_tensor(path, t)
        back = io.read_tensor(path)
        if back.indices != t.indices or not np.array_equal(back.data, t.data):
            problems.append(f"tensor file seed {seed}")
        spec = print_index_spec(t.indices)
        if print_index_spec(parse_index_spec(t.registry, spec)) != spec:
            problems.append(f"spec string {spec!r}")

    runs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        demo = _cli(["demo-recon", "--grid", "17", "--samples", "60", "--seed", "5", "--output", "r"], d)
        bench = _cli(["bench-contraction", str(ROOT / "samples" / "chain.expr"), "--execute", "--random-seed", "9"], d)
        w = SpaceRegistry([("X", 8), ("Y", 8)])
        io.write_tensor(d / "b.tns", new_tensor(w, "x^1,y^1", np.random.default_rng(3).standard_normal((8, 8))))
        (d / "p.ini").write_text(
            "[spaces]\nX = 8\nY = 8\n[problem]\noperator = laplacian\nrhs = b.tns\noutput = u.tns\n"
            "[solver]\nname = tmg\nthreshold = 1e-12\n"
        )
        solve = _cli(["solve", "p.ini", "--history", "h.txt"], d)
        codes = (demo.returncode, bench.returncode, solve.returncode)
        files = [(d / f).read_bytes() for f in ("r.tns", "r.pgm", "u.tns", "h.txt")]
        runs.append((codes, demo.stdout, bench.stdout, solve.stdout, files))
    if runs[0][0] != (0, 0, 0):
        problems.append(f"CLI exit codes {runs[0][0]}")
    if runs[0] != runs[1]:
        problems.append("CLI output differs between runs")
    criterion(
        "round trips and determinism",
        not problems,
        f"50 tensor files + spec strings, 3 CLI subcommands run twice; problems: {problems or 'none'}",
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
