"""Text file formats: tensor files, expression files and problem configs.

Tensor file::

    tensorfile 1
    space X 3
    space Y 4
    indices x^,y_
    data
    <whitespace separated components, canonical row-major order>

Expression file (for contraction planning)::

    extent X 2
    A : z^1,t^,z_
"""

import configparser
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, RegistryError, TensalgError
from .notation import canonical_order, parse_index_spec, print_index_spec
from .planner import signature_from_spec
from .spaces import SpaceRegistry
from .tensor import DenseTensor

FORMAT_TAG = "tensorfile"
FORMAT_VERSION = 1


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to a temp file beside ``path``, then rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# tensor files


def format_tensor(t):
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}"]
    lines += [f"space {name} {extent}" for name, extent in t.registry.spaces]
    lines.append(f"indices {print_index_spec(t.indices)}".rstrip())
    lines.append("data")
    arr = t.data
    rows = arr.reshape(-1, arr.shape[-1]) if arr.ndim else arr.reshape(1, 1)
    for row in rows:
        lines.append(" ".join("%.17g" % v for v in row))
    return "\n".join(lines) + "\n"


def write_tensor(path, t):
    atomic_write(path, format_tensor(t))


def _split_line(raw):
    return raw.split("#", 1)[0].split()


def parse_tensor(text, registry=None, path=None):
    """Parse tensor-file text.

    If ``registry`` is given the file's space declarations must match it
    and the tensor is bound to that registry object.
    """
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            words = _split_line(lines[pos - 1])
            if words:
                return words
        return None

    words = next_line()
    if words != [FORMAT_TAG, str(FORMAT_VERSION)]:
        raise FormatError(f"expected header '{FORMAT_TAG} {FORMAT_VERSION}'", pos or 1, path)
    spaces = []
    while True:
        words = next_line()
        if words is None:
            raise FormatError("unexpected end of file before 'indices'", pos, path)
        if words[0] != "space":
            break
        if len(words) != 3:
            raise FormatError("expected 'space <name> <extent>'", pos, path)
        try:
            extent = int(words[2])
        except ValueError:
            raise FormatError(f"extent {words[2]!r} is not an integer", pos, path) from None
        spaces.append((words[1], extent))
    try:
        file_registry = SpaceRegistry(spaces)
    except RegistryError as e:
        raise FormatError(str(e), pos - 1, path) from None
    if registry is None:
        registry = file_registry
    elif registry != file_registry:
        raise FormatError(
            f"space declarations {file_registry.spaces} do not match {registry.spaces}",
            pos - 1,
            path,
        )
    if words[0] != "indices":
        raise FormatError(f"expected 'indices', found {words[0]!r}", pos, path)
    spec_line = pos
    try:
        spec = parse_index_spec(registry, "".join(words[1:]))
    except TensalgError as e:
        raise FormatError(str(e), spec_line, path) from None
    indices = canonical_order(registry, spec)
    words = next_line()
    if words is None or words[0] != "data":
        raise FormatError("expected 'data'", pos, path)
    values = []
    for lineno, raw in enumerate(lines[pos - 1:], pos):
        words = _split_line(raw)[1:] if lineno == pos else _split_line(raw)
        try:
            values.extend(float(v) for v in words)
        except ValueError as e:
            raise FormatError(f"bad component: {e}", lineno, path) from None
    shape = tuple(registry.extent(ix.space) for ix in indices)
    expected = math.prod(shape)
    if len(values) != expected:
        raise FormatError(
            f"expected {expected} components, found {len(values)}", spec_line, path
        )
    data = np.array(values, dtype=np.float64)
    return DenseTensor(registry, indices, data.reshape(shape))


def read_tensor(path, registry=None):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise FormatError(f"cannot read tensor file: {e.strerror}", path=str(path)) from None
    return parse_tensor(text, registry, str(path))


# ---------------------------------------------------------------------------
# expression files


@dataclass
class Expression:
    registry: SpaceRegistry
    names: list
    specs: list

    def signatures(self):
        return [
            signature_from_spec(self.registry, spec, name)
            for name, spec in zip(self.names, self.specs)
        ]


def parse_expression(text, path=None):
    """Parse ``extent <space> <n>`` lines (or one ``extents: X=2 Y=3`` line)
    followed by ``<name> : <index-spec>`` factor lines."""
    spaces = []
    factors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("extents:"):
            for item in line[len("extents:"):].split():
                name, sep, n = item.partition("=")
                if not sep:
                    raise FormatError(f"expected <space>=<n>, got {item!r}", lineno, path)
                spaces.append((name, n, lineno))
            continue
        words = line.split()
        if words[0] == "extent":
            if len(words) != 3:
                raise FormatError("expected 'extent <space> <n>'", lineno, path)
            spaces.append((words[1], words[2], lineno))
            continue
        name, sep, spec = line.partition(":")
        if not sep or not name.strip():
            raise FormatError(f"expected '<name> : <index-spec>', got {line!r}", lineno, path)
        factors.append((name.strip(), spec.strip(), lineno))
    registry = SpaceRegistry()
    for name, n, lineno in spaces:
        try:
            registry.define_space(name, int(n))
        except (ValueError, RegistryError) as e:
            raise FormatError(str(e), lineno, path) from None
    if not factors:
        raise FormatError("no factors in expression file", None, path)
    names, specs = [], []
    for name, spec, lineno in factors:
        if name in names:
            raise FormatError(f"duplicate factor name {name!r}", lineno, path)
        try:
            specs.append(parse_index_spec(registry, spec))
        except TensalgError as e:
            raise FormatError(str(e), lineno, path) from None
        names.append(name)
    return Expression(registry, names, specs)


def read_expression(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise FormatError(f"cannot read expression file: {e.strerror}", path=str(path)) from None
    return parse_expression(text, str(path))


# ---------------------------------------------------------------------------
# problem configs

SOLVERS = ("direct", "jacobi", "cg", "tmg")
OPERATORS = ("laplacian", "convolution", "dense")


@dataclass
class ProblemConfig:
    spaces: list
    operator: str
    rhs: Path
    output: Path
    spec: str = ""
    kernel: tuple = ()
    system: Path = None
    solver: str = "jacobi"
    threshold: float = 1.0e-4
    relative: bool = False
    max_iterations: int = 10000
    pre_sweeps: int = 2
    post_sweeps: int = 2
    source: Path = field(default=None, repr=False)

    def registry(self):
        return SpaceRegistry(self.spaces)

    def default_spec(self):
        return ",".join(f"{n.lower()}^1,{n.lower()}_" for n, _ in self.spaces)


def _get(section, key, convert, default, source):
    if key not in section:
        return default
    raw = section[key]
    try:
        return convert(raw)
    except ValueError:
        raise FormatError(f"[{section.name}] {key} = {raw!r} is invalid", path=source) from None


def parse_config(text, source=None, base_dir="."):
    """Parse an INI-style problem description.

    ::

        [spaces]
        X = 16
        [problem]
        operator = laplacian
        rhs = rhs.tns
        output = solution.tns
        [solver]
        name = cg
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as e:
        raise FormatError(str(e).replace("\n", " "), path=source) from None
    for name in ("spaces", "problem"):
        if not cp.has_section(name):
            raise FormatError(f"missing [{name}] section", path=source)
    base = Path(base_dir)
    spaces = []
    for name, n in cp["spaces"].items():
        try:
            spaces.append((name, int(n)))
        except ValueError:
            raise FormatError(f"[spaces] {name} = {n!r} is not an integer", path=source) from None
    prob = cp["problem"]
    for key in ("operator", "rhs", "output"):
        if key not in prob:
            raise FormatError(f"[problem] needs '{key}'", path=source)
    op = prob["operator"].strip()
    if op not in OPERATORS:
        raise FormatError(f"unknown operator {op!r}; choose from {', '.join(OPERATORS)}", path=source)
    kernel = ()
    if op == "convolution":
        if "kernel" not in prob:
            raise FormatError("convolution operator needs 'kernel'", path=source)
        kernel = _get(prob, "kernel", lambda s: tuple(float(v) for v in s.split(",")), (), source)
    system = None
    if op == "dense":
        if "system" not in prob:
            raise FormatError("dense operator needs 'system'", path=source)
        system = base / prob["system"].strip()
    cfg = ProblemConfig(
        spaces=spaces,
        operator=op,
        rhs=base / prob["rhs"].strip(),
        output=base / prob["output"].strip(),
        spec=prob.get("spec", "").strip(),
        kernel=kernel,
        system=system,
        source=source,
    )
    if cp.has_section("solver"):
        sol = cp["solver"]
        cfg.solver = sol.get("name", cfg.solver).strip()
        if cfg.solver not in SOLVERS:
            raise FormatError(
                f"unknown solver {cfg.solver!r}; choose from {', '.join(SOLVERS)}", path=source
            )
        cfg.threshold = _get(sol, "threshold", float, cfg.threshold, source)
        mode = sol.get("threshold-mode", "absolute").strip()
        if mode not in ("absolute", "relative"):
            raise FormatError(f"threshold-mode must be absolute or relative, got {mode!r}", path=source)
        cfg.relative = mode == "relative"
        cfg.max_iterations = _get(sol, "max-iterations", int, cfg.max_iterations, source)
        cfg.pre_sweeps = _get(sol, "pre-sweeps", int, cfg.pre_sweeps, source)
        cfg.post_sweeps = _get(sol, "post-sweeps", int, cfg.post_sweeps, source)
    return cfg


def read_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FormatError(f"cannot read config: {e.strerror}", path=str(path)) from None
    return parse_config(text, str(path), path.parent)


def format_pgm(values):
    """Plain (P2) graymap of a 2D array, linearly scaled to 0..255."""
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    span = hi - lo if hi > lo else 1.0
    grey = np.rint((arr - lo) / span * 255.0).astype(int)
    rows, cols = grey.shape
    lines = ["P2", f"{cols} {rows}", "255"]
    lines += [" ".join(str(v) for v in row) for row in grey]
    return "\n".join(lines) + "\n"
