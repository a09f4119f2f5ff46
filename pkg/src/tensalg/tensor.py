"""Dense tensors over ordered spaces and the commutative tensor product.

Product semantics.  All index occurrences of all factors are grouped by
``(space, frame)``.  Within a group, contravariant occurrences merge into a
single contravariant index and covariant occurrences into a single
covariant index (elementwise / Khatri-Rao matching).  If a group then holds
both variances it is contracted, otherwise the merged index survives.  The
surviving indices are sorted into the registry's canonical order, so the
result does not depend on the order of the factors.

Pairwise evaluation keeps a group alive while any factor outside the pair
still refers to it, so every evaluation tree gives the same value as the
single global summation.
"""

import numbers
from dataclasses import dataclass

import numpy as np

from . import memory
from .errors import IndexSpecError, ShapeMismatchError, TensalgError
from .notation import (
    IndexSpec,
    TensorIndex,
    Variance,
    canonical_order,
    negate_spec,
    parse_index_spec,
    print_index_spec,
)

# variance bit masks for intermediate terms
_UP = 1
_DOWN = 2
_BOTH = _UP | _DOWN


def _bit(variance):
    return _UP if variance is Variance.CONTRA else _DOWN


class DenseTensor:
    """Immutable tensor value: canonical index list plus a component array.

    ``data`` has one axis per index, in canonical order, and is read-only.
    Build tensors with :func:`new_tensor` rather than calling this
    constructor, which expects indices already in canonical order.
    """

    __slots__ = ("_registry", "_indices", "_data")

    def __init__(self, registry, indices, data):
        indices = IndexSpec(indices)
        if tuple(indices) != canonical_order(registry, indices):
            raise IndexSpecError(
                f"indices {print_index_spec(indices)!r} are not in canonical order"
            )
        shape = tuple(registry.extent(ix.space) for ix in indices)
        data = np.asarray(data, dtype=np.float64)
        if data.shape != shape:
            raise ShapeMismatchError(
                f"component array shape {data.shape} does not match {shape} "
                f"for indices {print_index_spec(indices)!r}"
            )
        if data.flags.writeable:
            data = data.copy() if not data.flags.owndata else data
            data.flags.writeable = False
        registry.freeze()
        memory.record(data.size)
        self._registry = registry
        self._indices = indices
        self._data = data

    @property
    def registry(self):
        return self._registry

    @property
    def indices(self):
        return self._indices

    @property
    def spec(self):
        return print_index_spec(self._indices)

    @property
    def data(self):
        return self._data

    @property
    def components(self):
        """Row-major flat view of the components in canonical order."""
        return self._data.reshape(-1)

    @property
    def shape(self):
        return self._data.shape

    @property
    def order(self):
        return len(self._indices)

    @property
    def size(self):
        return self._data.size

    def item(self):
        if self.order != 0:
            raise ShapeMismatchError(f"tensor {self.spec!r} is not a scalar")
        return float(self._data)

    def value_equal(self, other):
        return (
            isinstance(other, DenseTensor)
            and self._registry == other._registry
            and self._indices == other._indices
            and np.array_equal(self._data, other._data)
        )

    def __eq__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.value_equal(other)

    __hash__ = None

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, other)

    def __neg__(self):
        return scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, numbers.Real):
            return scale(other, self)
        return tensor_product([self, other])

    def __rmul__(self, other):
        if isinstance(other, numbers.Real):
            return scale(other, self)
        return NotImplemented

    def __repr__(self):
        return f"DenseTensor({self.spec!r}, shape={self.shape})"


def _wrap(registry, indices, arr):
    """Build a tensor from axes in arbitrary order, sorting to canonical."""
    indices = tuple(indices)
    canon = canonical_order(registry, indices)
    if canon != indices:
        perm = [indices.index(ix) for ix in canon]
        arr = np.transpose(arr, perm)
    return DenseTensor(registry, canon, np.asarray(arr, order="C"))


def new_tensor(registry, spec, components=None):
    """Create a tensor from components given in the user's spec order.

    ``components`` may be a flat sequence (row-major in the order the
    indices are written in ``spec``) or an array already shaped that way.
    Omitted components default to zero.
    """
    spec = parse_index_spec(registry, spec)
    shape = tuple(registry.extent(ix.space) for ix in spec)
    if components is None:
        arr = np.zeros(shape)
    else:
        arr = np.asarray(components, dtype=np.float64)
        expected = int(np.prod(shape, dtype=np.int64))
        if arr.size != expected:
            raise ShapeMismatchError(
                f"length mismatch: spec {print_index_spec(spec)!r} needs "
                f"{expected} components, got {arr.size}"
            )
        arr = arr.reshape(shape)
    return _wrap(registry, spec, arr)


def zeros(registry, spec):
    return new_tensor(registry, spec)


def ones(registry, spec):
    spec = parse_index_spec(registry, spec)
    shape = tuple(registry.extent(ix.space) for ix in spec)
    return _wrap(registry, spec, np.ones(shape))


def full_like(t, value):
    return DenseTensor(t.registry, t.indices, np.full(t.shape, float(value)))


def _check_same_layout(a, b, what):
    if a.registry != b.registry:
        raise ShapeMismatchError(f"{what}: tensors belong to different registries")
    if a.indices != b.indices:
        raise ShapeMismatchError(
            f"{what}: index lists differ ({a.spec!r} vs {b.spec!r})"
        )


def add(a, b):
    _check_same_layout(a, b, "add")
    return DenseTensor(a.registry, a.indices, a.data + b.data)


def subtract(a, b):
    _check_same_layout(a, b, "subtract")
    return DenseTensor(a.registry, a.indices, a.data - b.data)


def scale(factor, a):
    return DenseTensor(a.registry, a.indices, float(factor) * a.data)


def axpy(alpha, x, y):
    """``alpha * x + y`` without an intermediate scaled copy of ``x``."""
    _check_same_layout(x, y, "axpy")
    return DenseTensor(x.registry, x.indices, alpha * x.data + y.data)


# ---------------------------------------------------------------------------
# product engine


@dataclass
class _Term:
    """Intermediate of a pairwise evaluation.

    One axis per (space, frame) group; ``bits`` records which variances have
    been seen for that group so far.
    """

    array: np.ndarray
    groups: tuple
    bits: tuple


def _leaf(t):
    groups = []
    bits = []
    labels = []
    for ix in t.indices:
        g = ix.group
        if g in groups:
            k = groups.index(g)
            bits[k] |= _bit(ix.variance)
            labels.append(k)
        else:
            labels.append(len(groups))
            groups.append(g)
            bits.append(_bit(ix.variance))
    arr = t.data
    if len(groups) != len(labels):
        # x^ and x_ of the same group in one factor: keep the diagonal
        arr = np.einsum(arr, labels, list(range(len(groups))))
    return _Term(arr, tuple(groups), tuple(bits))


def _group_bits(factors):
    bits = {}
    for t in factors:
        for ix in t.indices:
            bits[ix.group] = bits.get(ix.group, 0) | _bit(ix.variance)
    return bits


def _output_groups(bits):
    return {g for g, b in bits.items() if b != _BOTH}


def _combine(a, b, keep):
    ids = {}
    for g in a.groups + b.groups:
        ids.setdefault(g, len(ids))
    merged = {}
    for g, bit in zip(a.groups + b.groups, a.bits + b.bits):
        merged[g] = merged.get(g, 0) | bit
    out = [g for g in ids if g in keep]
    arr = np.einsum(
        a.array,
        [ids[g] for g in a.groups],
        b.array,
        [ids[g] for g in b.groups],
        [ids[g] for g in out],
        optimize=True,
    )
    return _Term(np.asarray(arr), tuple(out), tuple(merged[g] for g in out))


def _finalize(term, registry, output):
    keep = [k for k, g in enumerate(term.groups) if g in output]
    arr = term.array
    if len(keep) != len(term.groups):
        arr = np.einsum(arr, list(range(len(term.groups))), keep)
    indices = []
    for k in keep:
        space, frame = term.groups[k]
        bit = term.bits[k]
        if bit == _BOTH:
            raise TensalgError(f"group {space}{frame} left uncontracted")
        variance = Variance.CONTRA if bit == _UP else Variance.CO
        indices.append(TensorIndex(space, frame, variance))
    return _wrap(registry, indices, np.asarray(arr, dtype=np.float64))


def _check_registry(factors):
    if not factors:
        raise TensalgError("tensor product needs at least one factor")
    registry = factors[0].registry
    for t in factors[1:]:
        if t.registry != registry:
            raise ShapeMismatchError("tensor product: factors use different registries")
    return registry


class ProductContext:
    """Global group analysis of a multi-factor product.

    Decides which groups an intermediate over a subset of the factors has to
    keep: those that survive into the result plus those still referenced by
    factors outside the subset.
    """

    def __init__(self, factors):
        self.registry = _check_registry(factors)
        self.factors = list(factors)
        self.bits = _group_bits(self.factors)
        self.output = _output_groups(self.bits)
        self.factor_groups = [frozenset(ix.group for ix in t.indices) for t in self.factors]

    def keep_for(self, subset):
        keep = set(self.output)
        for k, groups in enumerate(self.factor_groups):
            if k not in subset:
                keep |= groups
        return keep

    def leaf(self, k):
        return _leaf(self.factors[k])

    def combine(self, a, b, subset):
        return _combine(a, b, self.keep_for(subset))

    def finalize(self, term):
        return _finalize(term, self.registry, self.output)


def tensor_product(factors, optimize=False):
    """Generalized commutative product of one or more tensors.

    By default the factors are evaluated pairwise from left to right.
    ``optimize=True`` asks the contraction planner for the cheapest order;
    the value is the same either way up to rounding.
    """
    factors = list(factors)
    ctx = ProductContext(factors)
    if optimize and len(factors) > 2:
        from .planner import execute, plan, signature_of

        return execute(plan([signature_of(t) for t in factors]), factors)
    term = ctx.leaf(0)
    subset = {0}
    for k in range(1, len(factors)):
        subset.add(k)
        term = ctx.combine(term, ctx.leaf(k), subset)
    return ctx.finalize(term)


# ---------------------------------------------------------------------------
# Kronecker deltas, inner product, derivative


def make_delta(registry, pairs):
    """Kronecker delta over one or more index pairs.

    ``pairs`` holds ``(space, frame_a, variance_a, frame_b, variance_b)``
    tuples.  The result has ones where paired coordinates coincide; a
    multi-pair delta is the outer product of its single-pair deltas.
    """
    axes = []
    mats = []
    for k, (space, fa, va, fb, vb) in enumerate(pairs):
        ia = TensorIndex(space, int(fa), Variance(va))
        ib = TensorIndex(space, int(fb), Variance(vb))
        if ia == ib:
            raise IndexSpecError(f"delta pair {k} repeats index {ia}")
        axes.extend([ia, ib])
        mats.append(np.eye(registry.extent(space)))
    IndexSpec(axes)  # rejects duplicates across pairs
    if not mats:
        return DenseTensor(registry, (), np.array(1.0))
    operands = []
    for k, m in enumerate(mats):
        operands.extend([m, [2 * k, 2 * k + 1]])
    arr = np.einsum(*operands, list(range(2 * len(mats))))
    return _wrap(registry, axes, arr)


def delta_pairs(target, source):
    """Pairs for deltas that turn indices ``source`` into ``target``.

    Each returned pair contracts one source index and leaves the matching
    target index; the i-th entries of the two specs are matched.
    """
    if len(target) != len(source):
        raise ShapeMismatchError("delta bridge: specs differ in length")
    pairs = []
    for t, s in zip(target, source):
        if t.space != s.space:
            raise ShapeMismatchError(f"delta bridge: {s} and {t} are on different spaces")
        pairs.append((t.space, t.frame, t.variance, s.frame, s.variance.flipped()))
    return pairs


def bridge(t, target, source=None):
    """Relabel ``t`` from ``source`` indices to ``target`` via single-pair deltas.

    Indices in ``source`` that already equal their target are left alone.
    """
    source = t.indices if source is None else source
    deltas = [
        make_delta(t.registry, [p])
        for p, (a, b) in zip(delta_pairs(target, source), zip(target, source))
        if a != b
    ]
    if not deltas:
        return t
    return tensor_product([t, *deltas])


def _fresh_frames(t):
    """One unused frame per index of ``t``, so relabelled indices never merge."""
    top = {}
    for ix in t.indices:
        top[ix.space] = max(top.get(ix.space, 0), ix.frame)
    fresh = []
    for ix in t.indices:
        top[ix.space] += 1
        fresh.append(top[ix.space])
    return fresh


def _check_inner(a, b):
    if a.registry != b.registry or a.indices != b.indices:
        raise ShapeMismatchError(
            f"inner product: index lists differ ({a.spec!r} vs {b.spec!r})"
        )


def inner_product(a, b):
    """<a, b> via variance flips through Kronecker deltas.

    ``a`` is lowered (or raised) into a fresh frame, ``b`` is relabelled into
    the same fresh frame with its own variance, and the two are contracted.
    """
    _check_inner(a, b)
    fresh = _fresh_frames(a)
    reg = a.registry
    da, db = [], []
    for ix, f2 in zip(a.indices, fresh):
        flip = ix.variance.flipped()
        da.append(make_delta(reg, [(ix.space, ix.frame, flip, f2, flip)]))
        db.append(make_delta(reg, [(ix.space, ix.frame, flip, f2, ix.variance)]))
    lowered = tensor_product([a, *da])
    relabelled = tensor_product([b, *db])
    return tensor_product([lowered, relabelled]).item()


def inner_product_elementwise(a, b):
    """<a, b> as an elementwise product contracted against an all-ones tensor.

    The all-ones tensor is itself produced from a pair of deltas per index,
    so this path shares no arithmetic with :func:`inner_product` beyond the
    product engine.
    """
    _check_inner(a, b)
    fresh = _fresh_frames(a)
    reg = a.registry
    deltas = []
    for ix, f2 in zip(a.indices, fresh):
        flip = ix.variance.flipped()
        deltas.append(make_delta(reg, [(ix.space, ix.frame, flip, f2, flip)]))
        deltas.append(make_delta(reg, [(ix.space, f2, ix.variance, ix.frame, flip)]))
    all_ones = tensor_product(deltas) if deltas else DenseTensor(reg, (), np.array(1.0))
    return tensor_product([a, b, all_ones]).item()


def derivative_of_linear_map(a, u_spec):
    """Derivative of ``f(U) = a * U`` with respect to ``U`` over ``u_spec``.

    The result is ``a`` itself with the indices that contract against ``U``
    relabelled to the frames of ``u_spec``.
    """
    u_spec = parse_index_spec(a.registry, u_spec)
    reg = a.registry
    deltas = []
    used = set()
    for u in u_spec:
        want = u.flipped()
        candidates = [
            ix for ix in a.indices if ix.space == u.space and ix.variance == want.variance
        ]
        if len(candidates) > 1:
            exact = [ix for ix in candidates if ix.frame == u.frame]
            candidates = exact
        if len(candidates) != 1 or candidates[0] in used:
            raise ShapeMismatchError(
                f"derivative: no unique index of {a.spec!r} pairs with {u}"
            )
        src = candidates[0]
        used.add(src)
        if src.frame == u.frame:
            continue
        if TensorIndex(u.space, u.frame, u.variance) in a.indices:
            raise ShapeMismatchError(
                f"derivative: relabelling {src} to frame {u.frame} collides with an "
                f"existing index of {a.spec!r}"
            )
        # delta^{src frame}_{u frame} style pair: contracts src, leaves want@u.frame
        deltas.append(
            make_delta(reg, [(u.space, src.frame, u.variance, u.frame, want.variance)])
        )
    if not deltas:
        return a
    return tensor_product([a, *deltas])


def as_matrix(t, rows, cols=None):
    """Flatten ``t`` into a 2D array with ``rows`` indices first.

    ``rows`` and ``cols`` are index specs; ``cols`` defaults to the
    remaining indices.  Both are taken in canonical order.
    """
    reg = t.registry
    rows = canonical_order(reg, parse_index_spec(reg, rows))
    if cols is None:
        cols = tuple(ix for ix in t.indices if ix not in rows)
    else:
        cols = canonical_order(reg, parse_index_spec(reg, cols))
    if set(rows) | set(cols) != set(t.indices) or set(rows) & set(cols):
        raise ShapeMismatchError(f"as_matrix: {t.spec!r} is not split by rows/cols")
    perm = [t.indices.index(ix) for ix in rows + cols]
    nrow = int(np.prod([reg.extent(ix.space) for ix in rows], dtype=np.int64))
    return np.transpose(t.data, perm).reshape(nrow, -1)


__all__ = [
    "DenseTensor",
    "ProductContext",
    "add",
    "as_matrix",
    "axpy",
    "bridge",
    "delta_pairs",
    "derivative_of_linear_map",
    "full_like",
    "inner_product",
    "inner_product_elementwise",
    "make_delta",
    "negate_spec",
    "new_tensor",
    "ones",
    "scale",
    "subtract",
    "tensor_product",
    "zeros",
]
