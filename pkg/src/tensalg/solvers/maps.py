"""Linear maps the solvers operate on.

Every map exposes ``input_indices`` / ``output_indices`` (canonical
tuples), ``apply(u)``, ``diagonal()`` (over the output indices) and
``matrix()`` (flattened, rows = outputs, columns = inputs, both in
canonical row-major order).  Dimension ``k`` of the input is paired with
dimension ``k`` of the output; the delta bridges between the two frames
follow that pairing.
"""

import math

import numpy as np

from ..errors import ShapeMismatchError, TensalgError
from ..notation import IndexSpec, Variance, canonical_order, parse_index_spec
from ..separable import SeparableOperator
from ..tensor import (
    DenseTensor,
    _wrap,
    add,
    as_matrix,
    bridge,
    make_delta,
    tensor_product,
    zeros,
)


class LinearMap:
    registry = None
    input_indices = ()
    output_indices = ()

    @property
    def input_spec(self):
        return IndexSpec(self.input_indices)

    @property
    def output_spec(self):
        return IndexSpec(self.output_indices)

    @property
    def n_in(self):
        return math.prod(self.registry.extent(ix.space) for ix in self.input_indices)

    @property
    def n_out(self):
        return math.prod(self.registry.extent(ix.space) for ix in self.output_indices)

    def input_zeros(self):
        return zeros(self.registry, self.input_spec)

    def output_zeros(self):
        return zeros(self.registry, self.output_spec)

    @property
    def dims(self):
        """(input index, output index) per dimension."""
        return tuple(zip(self.input_indices, self.output_indices))

    def to_input(self, t):
        """Relabel an output-frame tensor into input frames (the delta bridge D)."""
        return bridge(t, [i for i, _ in self.dims], [o for _, o in self.dims])

    def to_output(self, t):
        return bridge(t, [o for _, o in self.dims], [i for i, _ in self.dims])

    def check_input(self, u):
        if u.registry != self.registry or u.indices != self.input_indices:
            raise ShapeMismatchError(
                f"expected a tensor over {self.input_spec!s}, got {u.spec!r}"
            )

    def check_output(self, b):
        if b.registry != self.registry or b.indices != self.output_indices:
            raise ShapeMismatchError(
                f"expected a tensor over {self.output_spec!s}, got {b.spec!r}"
            )


def _check_pairing(registry, ins, outs):
    if len(ins) != len(outs):
        raise ShapeMismatchError("system is not square: input/output orders differ")
    for i, o in zip(ins, outs):
        if registry.extent(i.space) != registry.extent(o.space):
            raise ShapeMismatchError(f"dimension {i}->{o} is not square")
    if {i.group for i in ins} & {o.group for o in outs}:
        raise ShapeMismatchError("input and output indices share a (space, frame) group")


class DenseMap(LinearMap):
    """A system tensor such as ``A^{x1 y1}_{x y}`` used as a linear map.

    Contravariant indices are outputs; covariant indices, flipped, are the
    inputs the map contracts against.
    """

    def __init__(self, system):
        self.system = system
        self.registry = system.registry
        self.output_indices = tuple(ix for ix in system.indices if ix.variance is Variance.CONTRA)
        self.input_indices = canonical_order(
            self.registry,
            [ix.flipped() for ix in system.indices if ix.variance is Variance.CO],
        )
        _check_pairing(self.registry, self.input_indices, self.output_indices)

    def apply(self, u):
        self.check_input(u)
        return tensor_product([self.system, u])

    def matrix(self):
        cols = [ix.flipped() for ix in self.input_indices]
        return as_matrix(self.system, self.output_indices, cols)

    def diagonal(self):
        m = self.matrix()
        if m.shape[0] != m.shape[1]:
            raise ShapeMismatchError("diagonal of a non-square system")
        shape = [self.registry.extent(ix.space) for ix in self.output_indices]
        return DenseTensor(self.registry, self.output_indices, np.diag(m).reshape(shape))

    def to_dense(self):
        return self.system

    def rebind(self, registry):
        return DenseMap(DenseTensor(registry, self.system.indices, self.system.data))


class SeparableMap(LinearMap):
    """Adapter giving a :class:`SeparableOperator` the solver interface."""

    def __init__(self, op):
        self.op = op
        self.registry = op.registry
        self.input_indices = op.input_indices
        self.output_indices = op.output_indices
        _check_pairing(
            self.registry, [i for i, _ in op.dims], [o for _, o in op.dims]
        )

    @property
    def dims(self):
        return self.op.dims

    def apply(self, u):
        return self.op.apply(u)

    def diagonal(self):
        return self.op.diagonal()

    def to_dense(self):
        return self.op.to_dense()

    def matrix(self):
        return separable_matrix(self.op)

    def rebind(self, registry):
        return SeparableMap(rebind_operator(self.op, registry))


def separable_matrix(op):
    """Kronecker assembly of a separable operator (rows/cols canonical)."""
    reg = op.registry
    n_in = [reg.extent(i.space) for i, _ in op.dims]
    n_out = [reg.extent(o.space) for _, o in op.dims]
    total = None
    for weight, mats in op.term_matrices():
        m = np.array([[weight]])
        for k in range(len(op.dims)):
            fac = mats.get(k)
            if fac is None:
                fac = np.eye(n_in[k])
            m = np.kron(m, fac)
        total = m if total is None else total + m
    # rows follow op.dims order; reorder to canonical output order
    outs = [o for _, o in op.dims]
    canon = canonical_order(reg, outs)
    if tuple(outs) != canon:
        perm = [outs.index(ix) for ix in canon]
        total = total.reshape(n_out + [-1])
        total = np.transpose(total, perm + [len(n_out)]).reshape(math.prod(n_out), -1)
    return total


def rebind_operator(op, registry):
    terms = []
    for t in op.terms:
        terms.append(
            (t.weight, [DenseTensor(registry, f.indices, f.data) for f in t.factors])
        )
    return SeparableOperator(
        registry, [i for i, _ in op.dims], [o for _, o in op.dims], terms
    )


class DiagonalMap(LinearMap):
    """Pointwise scaling ``u -> field * u`` (merged-index product)."""

    def __init__(self, field, input_spec):
        self.field = field
        self.registry = field.registry
        self.output_indices = field.indices
        self.input_indices = canonical_order(
            self.registry, parse_index_spec(self.registry, input_spec)
        )
        _check_pairing(self.registry, self.input_indices, self.output_indices)

    def apply(self, u):
        self.check_input(u)
        return tensor_product([self.field, self.to_output(u)])

    def diagonal(self):
        return self.field

    def matrix(self):
        return np.diag(self.field.components)

    def to_dense(self):
        deltas = [
            make_delta(self.registry, [(o.space, o.frame, o.variance, i.frame, i.variance.flipped())])
            for i, o in zip(self.input_indices, self.output_indices)
        ]
        return tensor_product([self.field, *deltas])

    def rebind(self, registry):
        return DiagonalMap(DenseTensor(registry, self.field.indices, self.field.data), self.input_indices)


class SumMap(LinearMap):
    def __init__(self, maps):
        self.maps = [as_linear_map(m) for m in maps]
        if not self.maps:
            raise TensalgError("SumMap needs at least one map")
        first = self.maps[0]
        self.registry = first.registry
        self.input_indices = first.input_indices
        self.output_indices = first.output_indices
        for m in self.maps[1:]:
            if m.input_indices != self.input_indices or m.output_indices != self.output_indices:
                raise ShapeMismatchError("SumMap terms map between different specs")

    @property
    def dims(self):
        return self.maps[0].dims

    def apply(self, u):
        out = self.maps[0].apply(u)
        for m in self.maps[1:]:
            out = add(out, m.apply(u))
        return out

    def diagonal(self):
        out = self.maps[0].diagonal()
        for m in self.maps[1:]:
            out = add(out, m.diagonal())
        return out

    def matrix(self):
        return sum(m.matrix() for m in self.maps)

    def to_dense(self):
        out = self.maps[0].to_dense()
        for m in self.maps[1:]:
            out = add(out, m.to_dense())
        return out

    def rebind(self, registry):
        return SumMap([m.rebind(registry) for m in self.maps])


class GalerkinMap(LinearMap):
    """``restriction * inner * prolongation`` applied without assembly.

    ``restriction`` and ``prolongation`` are separable operators: the first
    maps inner outputs to coarse outputs, the second coarse inputs to inner
    inputs.
    """

    def __init__(self, inner, restriction, prolongation):
        self.inner = inner
        self.restriction = restriction
        self.prolongation = prolongation
        self.registry = inner.registry
        if restriction.input_indices != inner.output_indices:
            raise ShapeMismatchError("restriction does not start at the inner outputs")
        if prolongation.output_indices != inner.input_indices:
            raise ShapeMismatchError("prolongation does not end at the inner inputs")
        self.input_indices = prolongation.input_indices
        self.output_indices = restriction.output_indices
        self._r_dims = restriction.dims
        self._p_dims = prolongation.dims

    @property
    def dims(self):
        # dimension k of both transfers refers to the same grid axis
        return tuple((p[0], r[1]) for p, r in zip(self._p_dims, self._r_dims))

    def apply(self, u):
        return self.restriction.apply(self.inner.apply(self.prolongation.apply(u)))

    def diagonal(self):
        if not isinstance(self.inner, DiagonalMap):
            raise TensalgError("diagonal of a Galerkin product needs a diagonal inner map")
        # diag(R D P)[c] = sum_f R[c, f] * P[f, c] * d[f]
        r_mats = self.restriction.term_matrices()[0][1]
        p_mats = self.prolongation.term_matrices()[0][1]
        reg = self.registry
        factors = []
        for k, (i, o) in enumerate(self._r_dims):
            w = r_mats[k] * p_mats[k].T
            factors.append(_wrap(reg, [o, i.flipped()], w))
        weights = SeparableOperator(reg, [i for i, _ in self._r_dims], [o for _, o in self._r_dims], [(1.0, factors)])
        return weights.apply(self.inner.field)

    def matrix(self):
        r = separable_matrix(self.restriction)
        p = separable_matrix(self.prolongation)
        if isinstance(self.inner, DiagonalMap):
            return r @ (self.inner.field.components[:, None] * p)
        return r @ self.inner.matrix() @ p

    def rebind(self, registry):
        return GalerkinMap(
            self.inner.rebind(registry),
            rebind_operator(self.restriction, registry),
            rebind_operator(self.prolongation, registry),
        )


def as_linear_map(obj):
    if isinstance(obj, LinearMap):
        return obj
    if isinstance(obj, SeparableOperator):
        return SeparableMap(obj)
    if isinstance(obj, DenseTensor):
        return DenseMap(obj)
    raise TypeError(f"cannot use {type(obj).__name__} as a linear map")
