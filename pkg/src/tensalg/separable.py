"""Separable operators: sums of per-dimension 1D factors.

A :class:`SeparableOperator` maps tensors over ``input_spec`` to tensors
over ``output_spec`` (matched position by position) as

    apply(U) = sum_t  weight_t * (F_t,1 * F_t,2 * ... * U)

where each factor ``F_t,d`` is an order-2 tensor with one contravariant
output index and one covariant input index.  Dimensions a term has no
factor for act as the identity.  Application runs one 1D pass per
dimension and never forms the full coefficient tensor.

The builders below produce the 1D factors: stencils, convolution, finite
differences, DFT, resampling and shear-based rotation.  Every factor uses
zero padding at the boundaries, and kernels are read as stencil weights
at offsets ``-c .. c`` (``c = len(kernel) // 2``).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import memory
from .errors import IndexSpecError, ShapeMismatchError, TensalgError
from .notation import (
    IndexSpec,
    TensorIndex,
    Variance,
    canonical_order,
    parse_index_spec,
    sort_key,
)
from .tensor import (
    DenseTensor,
    _wrap,
    add,
    as_matrix,
    bridge,
    make_delta,
    scale,
    tensor_product,
)


@dataclass(frozen=True)
class Term:
    weight: float
    factors: tuple  # DenseTensor factors, at most one per dimension


class SeparableOperator:
    """Implicit linear map built from per-dimension factors.

    Parameters
    ----------
    registry : SpaceRegistry
    input_spec, output_spec : str or IndexSpec
        Matched position by position; dimension ``k`` maps
        ``input_spec[k]`` to ``output_spec[k]``.
    terms : iterable of (weight, factors)
        ``factors`` is a sequence of order-2 tensors.  Each must carry one
        output index and the flipped (contracting) version of the matching
        input index.
    """

    def __init__(self, registry, input_spec, output_spec, terms):
        self.registry = registry
        ins = parse_index_spec(registry, input_spec)
        outs = parse_index_spec(registry, output_spec)
        if len(ins) != len(outs):
            raise IndexSpecError("input and output specs differ in length")
        pairs = sorted(zip(ins, outs), key=lambda p: sort_key(registry, p[0]))
        self.dims = tuple(pairs)
        self.input_indices = canonical_order(registry, ins)
        self.output_indices = canonical_order(registry, outs)
        if set(self.input_indices) & set(self.output_indices):
            raise IndexSpecError("an index appears in both input and output spec")
        self.terms = []
        self._mats = []
        for weight, factors in terms:
            by_dim = {}
            for f in factors:
                k = self._dim_of(f)
                if k in by_dim:
                    raise IndexSpecError(f"two factors for dimension {self.dims[k][0]}")
                by_dim[k] = f
            self.terms.append(Term(float(weight), tuple(factors)))
            mats = {}
            for k, f in by_dim.items():
                i, o = self.dims[k]
                mats[k] = np.ascontiguousarray(as_matrix(f, [o], [i.flipped()]))
            self._mats.append(mats)
        if not self.terms:
            raise TensalgError("a separable operator needs at least one term")
        for k, (i, o) in enumerate(self.dims):
            if i.space != o.space and any(k not in m for m in self._mats):
                raise IndexSpecError(
                    f"dimension {i}->{o} changes space, every term needs a factor for it"
                )

    def _dim_of(self, f):
        if f.order != 2:
            raise ShapeMismatchError(f"factor {f.spec!r} is not order 2")
        for k, (i, o) in enumerate(self.dims):
            if set(f.indices) == {o, i.flipped()}:
                return k
        raise ShapeMismatchError(f"factor {f.spec!r} matches no dimension of the operator")

    # linear map protocol

    @property
    def input_spec(self):
        return IndexSpec(self.input_indices)

    @property
    def output_spec(self):
        return IndexSpec(self.output_indices)

    def term_matrices(self):
        """Per term: (weight, {dimension position: n_out x n_in matrix})."""
        return [(t.weight, dict(m)) for t, m in zip(self.terms, self._mats)]

    def apply(self, u, order=None):
        """Apply the operator pass by pass; ``order`` permutes the passes."""
        if u.registry != self.registry or u.indices != self.input_indices:
            raise ShapeMismatchError(
                f"operator expects input {IndexSpec(self.input_indices)!s}, got {u.spec!r}"
            )
        # axes of u follow input canonical order; self.dims is in that order too
        dims = range(len(self.dims)) if order is None else order
        acc = None
        for term, mats in zip(self.terms, self._mats):
            arr = u.data
            for k in dims:
                m = mats.get(k)
                if m is None:
                    continue
                arr = np.moveaxis(np.tensordot(m, arr, axes=([1], [k])), 0, k)
                memory.record(arr.size)
            contrib = term.weight * arr
            acc = contrib if acc is None else acc + contrib
        return _wrap(self.registry, [o for _, o in self.dims], acc)

    def __call__(self, u):
        return self.apply(u)

    def diagonal(self):
        """Main diagonal as a tensor over the output indices."""
        shape = []
        for i, o in self.dims:
            n_in = self.registry.extent(i.space)
            n_out = self.registry.extent(o.space)
            if n_in != n_out:
                raise ShapeMismatchError(f"dimension {i}->{o} is not square")
            shape.append(n_out)
        acc = np.zeros(shape)
        for term, mats in zip(self.terms, self._mats):
            part = np.array(term.weight)
            for k, n in enumerate(shape):
                vec = np.diag(mats[k]) if k in mats else np.ones(n)
                part = np.multiply.outer(part, vec)
            acc = acc + part
        return _wrap(self.registry, [o for _, o in self.dims], acc)

    def to_dense(self):
        """Materialize the full system tensor through tensor products.

        Only for small grids and tests: the result has
        ``size(input) * size(output)`` components.
        """
        total = None
        for term, mats in zip(self.terms, self._mats):
            factors = list(term.factors)
            for k, (i, o) in enumerate(self.dims):
                if k not in mats:
                    factors.append(
                        make_delta(
                            self.registry,
                            [(o.space, o.frame, o.variance, i.frame, i.variance.flipped())],
                        )
                    )
            dense = scale(term.weight, tensor_product(factors))
            total = dense if total is None else add(total, dense)
        return total

    # algebra

    def scaled(self, c):
        return SeparableOperator(
            self.registry,
            [i for i, _ in self.dims],
            [o for _, o in self.dims],
            [(c * t.weight, t.factors) for t in self.terms],
        )

    def __neg__(self):
        return self.scaled(-1.0)

    def __add__(self, other):
        if not isinstance(other, SeparableOperator):
            return NotImplemented
        if other.dims != self.dims:
            raise ShapeMismatchError("operators map between different specs")
        return SeparableOperator(
            self.registry,
            [i for i, _ in self.dims],
            [o for _, o in self.dims],
            [(t.weight, t.factors) for t in self.terms + other.terms],
        )

    def transpose(self, output_spec):
        """Adjoint map from this operator's outputs to ``output_spec``."""
        outs = parse_index_spec(self.registry, output_spec)
        targets = dict(zip([i for i, _ in self.dims], outs))
        if len(outs) != len(self.dims):
            raise IndexSpecError("transpose: output spec has the wrong length")
        new_dims = [(o, targets[i]) for i, o in self.dims]
        terms = []
        for t, mats in zip(self.terms, self._mats):
            factors = []
            for k, m in mats.items():
                new_in, new_out = new_dims[k]
                factors.append(_wrap(self.registry, [new_out, new_in.flipped()], m.T))
            terms.append((t.weight, factors))
        return SeparableOperator(
            self.registry, [i for i, _ in new_dims], [o for _, o in new_dims], terms
        )

    def compose(self, inner):
        """``self`` after ``inner``: requires self's input == inner's output."""
        if set(self.input_indices) != set(inner.output_indices):
            raise ShapeMismatchError("compose: specs do not chain")
        outer_dim = {i: k for k, (i, _) in enumerate(self.dims)}
        new_dims = [(i, self.dims[outer_dim[o]][1]) for i, o in inner.dims]
        terms = []
        for t2, m2 in zip(inner.terms, inner._mats):
            for t1, m1 in zip(self.terms, self._mats):
                factors = []
                for k, (i, o) in enumerate(inner.dims):
                    k1 = outer_dim[o]
                    a = m1.get(k1)
                    b = m2.get(k)
                    if a is None and b is None:
                        continue
                    if a is None:
                        m = b
                    elif b is None:
                        m = a
                    else:
                        m = a @ b
                    out = new_dims[k][1]
                    factors.append(_wrap(self.registry, [out, i.flipped()], m))
                terms.append((t1.weight * t2.weight, factors))
        return SeparableOperator(
            self.registry, [i for i, _ in new_dims], [o for _, o in new_dims], terms
        )

    def __repr__(self):
        return (
            f"SeparableOperator({IndexSpec(self.input_indices)!s} -> "
            f"{IndexSpec(self.output_indices)!s}, {len(self.terms)} terms)"
        )


def identity(registry, input_spec, output_spec):
    return SeparableOperator(registry, input_spec, output_spec, [(1.0, ())])


# ---------------------------------------------------------------------------
# 1D factor builders


def _factor(registry, space, frames, matrix, out_space=None):
    out_frame, in_frame = frames
    out = TensorIndex(out_space or space, out_frame, Variance.CONTRA)
    inp = TensorIndex(space, in_frame, Variance.CO)
    if out == inp.flipped():
        raise IndexSpecError("factor input and output frames must differ")
    return _wrap(registry, [out, inp], matrix)


def stencil_matrix(n, kernel):
    """``M[i, i + k - c] = kernel[k]``, truncated at the boundaries."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 1 or len(kernel) % 2 == 0:
        raise TensalgError(f"kernel length must be odd, got {len(kernel)}")
    c = len(kernel) // 2
    m = np.zeros((n, n))
    for k, w in enumerate(kernel):
        off = k - c
        if abs(off) < n:
            idx = np.arange(max(0, -off), min(n, n - off))
            m[idx, idx + off] = w
    return m


def convolution_1d(registry, space, frames, kernel):
    """1D convolution factor with zero-padded boundaries."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if len(kernel) % 2 == 0:
        raise TensalgError(f"even-length kernel ({len(kernel)}) has no centre")
    return _factor(registry, space, frames, stencil_matrix(registry.extent(space), kernel))


_FD_KERNELS = {
    "forward": (-1.0, 1.0, 0.0),
    "backward": (0.0, -1.0, 1.0),
    "central": (-0.5, 0.0, 0.5),
}


def finite_difference_1d(registry, space, frames, variant="central"):
    try:
        kernel = _FD_KERNELS[variant]
    except KeyError:
        raise TensalgError(f"unknown finite difference variant {variant!r}") from None
    return convolution_1d(registry, space, frames, kernel)


def laplacian_1d(registry, space, frames):
    return convolution_1d(registry, space, frames, (1.0, -2.0, 1.0))


def _pair_frames(registry, spec):
    """Match each covariant index of ``spec`` with a contravariant one in its space."""
    ups = [ix for ix in spec if ix.variance is Variance.CONTRA]
    downs = [ix for ix in spec if ix.variance is Variance.CO]
    if len(ups) != len(downs):
        raise IndexSpecError("operator spec must pair output and input indices")
    pairs = []
    for d in downs:
        matches = [u for u in ups if u.space == d.space]
        if len(matches) != 1:
            raise IndexSpecError(f"no unique output index pairs with {d}")
        pairs.append((matches[0], d))
    return pairs


def laplacian(registry, spec, order=2):
    """Separable discrete Laplacian, one term per dimension.

    ``spec`` lists output/input index pairs as in ``"x^1,x_,y^1,y_"``.
    Only the second-order 3-point stencil is available.
    """
    if order != 2:
        raise TensalgError(f"unsupported Laplacian order {order}; only 2 is implemented")
    spec = parse_index_spec(registry, spec)
    pairs = _pair_frames(registry, spec)
    terms = []
    for out, inp in pairs:
        terms.append((1.0, [laplacian_1d(registry, out.space, (out.frame, inp.frame))]))
    return SeparableOperator(
        registry, [inp.flipped() for _, inp in pairs], [out for out, _ in pairs], terms
    )


def separable_convolution(registry, spec, kernels):
    """One-term operator applying ``kernels[space]`` along each dimension."""
    spec = parse_index_spec(registry, spec)
    pairs = _pair_frames(registry, spec)
    factors = []
    for out, inp in pairs:
        kernel = kernels[out.space] if isinstance(kernels, dict) else kernels
        factors.append(convolution_1d(registry, out.space, (out.frame, inp.frame), kernel))
    return SeparableOperator(
        registry, [inp.flipped() for _, inp in pairs], [out for out, _ in pairs],
        [(1.0, factors)],
    )


def dft_1d(registry, space, frames):
    """Real and imaginary planes of the 1D DFT matrix ``exp(-2 pi i k n / N)``."""
    n = registry.extent(space)
    k = np.arange(n)
    phase = -2.0 * np.pi * np.outer(k, k) / n
    return (
        _factor(registry, space, frames, np.cos(phase)),
        _factor(registry, space, frames, np.sin(phase)),
    )


def separable_dft(re, im=None, frame=1):
    """nD DFT of a (possibly complex) tensor held as real/imaginary planes.

    Every index of ``re`` is transformed into frame ``frame`` with explicit
    complex arithmetic per dimension.  Returns ``(re, im)``.
    """
    reg = re.registry
    if im is None:
        im = scale(0.0, re)
    if im.indices != re.indices:
        raise ShapeMismatchError("real and imaginary planes differ in indices")
    for ix in list(re.indices):
        f_re, f_im = dft_1d(reg, ix.space, (frame, ix.frame))
        if ix.variance is not Variance.CONTRA:
            raise ShapeMismatchError("separable_dft expects contravariant indices")
        new_re = tensor_product([f_re, re]) - tensor_product([f_im, im])
        new_im = tensor_product([f_re, im]) + tensor_product([f_im, re])
        re, im = new_re, new_im
    return re, im


def resample_1d(registry, space_in, space_out, frames, mode, k):
    """Upsampling by zero insertion or downsampling by decimation.

    ``mode`` is ``"up"`` or ``"down"``.  For ``"up"`` the output extent must
    be ``k`` times the input extent, for ``"down"`` the reverse.
    """
    n_in = registry.extent(space_in)
    n_out = registry.extent(space_out)
    if mode == "up":
        if n_out != k * n_in:
            raise ShapeMismatchError(f"upsample by {k}: extent {n_out} != {k}*{n_in}")
        m = np.zeros((n_out, n_in))
        m[k * np.arange(n_in), np.arange(n_in)] = 1.0
    elif mode == "down":
        if n_in != k * n_out:
            raise ShapeMismatchError(f"downsample by {k}: extent {n_in} != {k}*{n_out}")
        m = np.zeros((n_out, n_in))
        m[np.arange(n_out), k * np.arange(n_out)] = 1.0
    else:
        raise TensalgError(f"unknown resampling mode {mode!r}")
    if space_in == space_out and frames[0] == frames[1]:
        raise IndexSpecError("resampling within one space needs distinct frames")
    return _factor(registry, space_in, frames, m, out_space=space_out)


# ---------------------------------------------------------------------------
# rotation by three shears


def _shear_weights(n_out, n_in, shifts):
    """Linear interpolation weights ``W[o, i, s]``: sample row ``s`` at ``o + shifts[s]``."""
    w = np.zeros((n_out, n_in, len(shifts)))
    o = np.arange(n_out)
    for s, shift in enumerate(shifts):
        pos = o + shift
        i0 = np.floor(pos).astype(int)
        frac = pos - i0
        for idx, wt in ((i0, 1.0 - frac), (i0 + 1, frac)):
            ok = (idx >= 0) & (idx < n_in) & (wt != 0.0)
            w[o[ok], idx[ok], s] += wt[ok]
    return w


def shear_factor(registry, along, across, frames, across_frame, amount):
    """Shear along space ``along`` by ``amount * (j - centre)`` for row ``j`` of ``across``.

    The result is order 3: output and input indices on ``along`` plus a
    contravariant index on ``across`` that merges elementwise with the
    image it is applied to.
    """
    n = registry.extent(along)
    m = registry.extent(across)
    centre = (m - 1) / 2.0
    shifts = amount * (np.arange(m) - centre)
    w = _shear_weights(n, n, shifts)
    out_frame, in_frame = frames
    indices = [
        TensorIndex(along, out_frame, Variance.CONTRA),
        TensorIndex(along, in_frame, Variance.CO),
        TensorIndex(across, across_frame, Variance.CONTRA),
    ]
    return _wrap(registry, indices, w)


def shear_rotation_2d(registry, x_space, y_space, angle, frame=0):
    """Three shear factors whose product rotates an image by ``angle``.

    The image is expected with indices ``x^f, y^f`` (``f = frame``); the
    factors map it to ``x^(f+2), y^(f+1)``.  Rotation is about the grid
    centre, using linear interpolation in every pass.
    """
    if not abs(angle) < math.pi / 2:
        raise TensalgError(f"rotation angle {angle} outside (-pi/2, pi/2)")
    t = math.tan(angle / 2.0)
    s = math.sin(angle)
    f = frame
    return [
        shear_factor(registry, x_space, y_space, (f + 1, f), f, t),
        shear_factor(registry, y_space, x_space, (f + 1, f), f + 1, -s),
        shear_factor(registry, x_space, y_space, (f + 2, f + 1), f + 1, t),
    ]


def rotate(image, angle):
    """Rotate an order-2 image ``x^f, y^f`` and relabel back to frame ``f``."""
    if image.order != 2 or any(ix.variance is not Variance.CONTRA for ix in image.indices):
        raise ShapeMismatchError("rotate expects an image with two contravariant indices")
    x_ix, y_ix = image.indices
    if x_ix.frame != y_ix.frame:
        raise ShapeMismatchError("rotate expects both image indices in one frame")
    f = x_ix.frame
    out = image
    for factor in shear_rotation_2d(image.registry, x_ix.space, y_ix.space, angle, f):
        out = tensor_product([factor, out])
    return bridge(out, [x_ix, y_ix], [x_ix.with_frame(f + 2), y_ix.with_frame(f + 1)])


__all__ = [
    "SeparableOperator",
    "Term",
    "convolution_1d",
    "dft_1d",
    "finite_difference_1d",
    "identity",
    "laplacian",
    "laplacian_1d",
    "resample_1d",
    "rotate",
    "separable_convolution",
    "separable_dft",
    "shear_factor",
    "shear_rotation_2d",
    "stencil_matrix",
]
