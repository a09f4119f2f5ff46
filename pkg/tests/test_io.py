import numpy as np
import pytest

from tensalg import io
from tensalg.errors import FormatError
from tensalg.notation import parse_index_spec, print_index_spec
from tensalg.spaces import SpaceRegistry
from tensalg.tensor import DenseTensor, new_tensor


def test_tensor_round_trip(tmp_path, rng):
    w = SpaceRegistry([("X", 3), ("Y", 4)])
    t = new_tensor(w, "x^,y_", rng.standard_normal((3, 4)) * 10.0 ** rng.integers(-300, 300, (3, 4)))
    path = tmp_path / "t.tns"
    io.write_tensor(path, t)
    back = io.read_tensor(path)
    assert back.registry == w
    assert back.indices == t.indices
    assert np.array_equal(back.data, t.data)
    assert io.format_tensor(back) == path.read_text()


def test_round_trip_special_values(tmp_path):
    w = SpaceRegistry([("X", 4)])
    t = new_tensor(w, "x^1", [0.1, -0.0, 5e-324, 1.7976931348623157e308])
    io.write_tensor(tmp_path / "s.tns", t)
    assert np.array_equal(io.read_tensor(tmp_path / "s.tns").data, t.data)


def test_file_layout():
    w = SpaceRegistry([("X", 2), ("Y", 3)])
    text = io.format_tensor(new_tensor(w, "x^,y_", np.arange(6.0).reshape(2, 3)))
    assert text.splitlines() == [
        "tensorfile 1", "space X 2", "space Y 3", "indices x^,y_", "data", "0 1 2", "3 4 5",
    ]


def test_count_mismatch():
    text = "tensorfile 1\nspace X 3\nspace Y 4\nindices x^,y^\ndata\n" + " ".join(["1"] * 11) + "\n"
    with pytest.raises(FormatError, match="expected 12 components, found 11") as exc:
        io.parse_tensor(text)
    assert exc.value.line == 4


def test_scalar_file(tmp_path):
    text = "tensorfile 1\nspace X 3\nindices\ndata\n2.5\n"
    t = io.parse_tensor(text)
    assert t.order == 0 and float(t.data) == 2.5
    io.write_tensor(tmp_path / "z.tns", t)
    assert float(io.read_tensor(tmp_path / "z.tns").data) == 2.5


def test_errors_carry_line_numbers():
    with pytest.raises(FormatError) as exc:
        io.parse_tensor("tensorfile 2\n")
    assert exc.value.line == 1
    with pytest.raises(FormatError, match="unknown space") as exc:
        io.parse_tensor("tensorfile 1\nspace X 2\nindices z^\ndata\n1 2\n")
    assert exc.value.line == 3
    with pytest.raises(FormatError) as exc:
        io.parse_tensor("tensorfile 1\nspace X two\nindices x^\ndata\n1 2\n")
    assert exc.value.line == 2
    with pytest.raises(FormatError) as exc:
        io.parse_tensor("tensorfile 1\nspace X 2\nindices x^\n1 2\n")
    assert exc.value.line == 4
    with pytest.raises(FormatError, match="f.tns:5") as exc:
        io.parse_tensor("tensorfile 1\nspace X 2\nindices x^\ndata\n1 zz\n", path="f.tns")
    assert exc.value.line == 5


def test_registry_must_match():
    w = SpaceRegistry([("X", 3)])
    text = "tensorfile 1\nspace X 2\nindices x^\ndata\n1 2\n"
    with pytest.raises(FormatError, match="do not match"):
        io.parse_tensor(text, w)
    ok = io.parse_tensor("tensorfile 1\nspace X 3\nindices x^\ndata\n1 2 3\n", w)
    assert ok.registry is w


def test_missing_file(tmp_path):
    with pytest.raises(FormatError, match="cannot read"):
        io.read_tensor(tmp_path / "nope.tns")


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write(tmp_path / "a.txt", "hello\n")
    io.atomic_write(tmp_path / "b.bin", b"\x00\x01")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt", "b.bin"]


@pytest.mark.parametrize(
    "spec", ["x^", "x^1,x_", "x_,x^2,y_1,y^2", "y^3", ""],
)
def test_spec_string_round_trip(spec):
    w = SpaceRegistry([("X", 2), ("Y", 2)])
    assert print_index_spec(parse_index_spec(w, spec)) == spec


# expression files -------------------------------------------------------


def test_expression_formats():
    a = io.parse_expression("extent X 2\nextent Y 3\nA : x^1,x_\nB : x^,y^\n")
    b = io.parse_expression("extents: X=2 Y=3\nA : x^1,x_\n# comment\nB : x^,y^\n")
    assert a.registry == b.registry
    assert a.names == ["A", "B"] and [len(s.indices) for s in a.signatures()] == [2, 2]


def test_expression_errors():
    with pytest.raises(FormatError) as exc:
        io.parse_expression("extent X 2\nA x^\n")
    assert exc.value.line == 2
    with pytest.raises(FormatError) as exc:
        io.parse_expression("extent X 2\nA : x^\nA : x_\n")
    assert exc.value.line == 3
    with pytest.raises(FormatError) as exc:
        io.parse_expression("extent X 2\nA : q^\n")
    assert exc.value.line == 2
    with pytest.raises(FormatError, match="no factors"):
        io.parse_expression("extent X 2\n")


def test_sample_chain_file():
    expr = io.read_expression("samples/chain.expr")
    assert list(expr.registry.spaces) == [("X", 2), ("Y", 3), ("Z", 4), ("T", 5)]
    assert expr.names == ["A", "B", "C", "T"]


# configs ----------------------------------------------------------------


CONFIG = """
[spaces]
X = 4
Y = 5

[problem]
operator = laplacian
rhs = rhs.tns
output = out/u.tns

[solver]
name = cg
threshold = 1e-9
threshold-mode = relative
max-iterations = 50
"""


def test_config_parsing(tmp_path):
    cfg = io.parse_config(CONFIG, "p.ini", tmp_path)
    assert list(cfg.spaces) == [("X", 4), ("Y", 5)]
    assert cfg.solver == "cg" and cfg.threshold == 1e-9 and cfg.relative
    assert cfg.max_iterations == 50
    assert cfg.rhs == tmp_path / "rhs.tns"
    assert cfg.default_spec() == "x^1,x_,y^1,y_"


def test_config_defaults():
    cfg = io.parse_config("[spaces]\nX = 3\n[problem]\noperator = laplacian\nrhs = b\noutput = u\n")
    assert cfg.solver == "jacobi" and cfg.threshold == 1.0e-4 and not cfg.relative


@pytest.mark.parametrize(
    "text, match",
    [
        ("[problem]\noperator=laplacian\nrhs=a\noutput=b\n", r"\[spaces\]"),
        ("[spaces]\nX = 3\n[problem]\noperator = magic\nrhs=a\noutput=b\n", "unknown operator"),
        ("[spaces]\nX = 3\n[problem]\noperator = laplacian\noutput=b\n", "rhs"),
        ("[spaces]\nX = 3\n[problem]\noperator = convolution\nrhs=a\noutput=b\n", "kernel"),
        ("[spaces]\nX = 3\n[problem]\noperator = laplacian\nrhs=a\noutput=b\n[solver]\nname = sor\n", "unknown solver"),
        ("[spaces]\nX = 3\n[problem]\noperator = laplacian\nrhs=a\noutput=b\n[solver]\nthreshold = tiny\n", "threshold"),
        ("[spaces]\nX = three\n[problem]\noperator = laplacian\nrhs=a\noutput=b\n", "integer"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(FormatError, match=match):
        io.parse_config(text)


def test_pgm():
    text = io.format_pgm(np.array([[0.0, 1.0], [0.5, 1.0]]))
    assert text.splitlines() == ["P2", "2 2", "255", "0 255", "128 255"]
    assert io.format_pgm(np.zeros((1, 3))).splitlines()[-1] == "0 0 0"
