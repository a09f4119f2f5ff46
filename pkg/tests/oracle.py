"""Reference evaluators that share no code with the library's product engine."""

import itertools

import numpy as np


def product_reference(space_order, factors):
    extents = {}
    variances = {}
    for indices, arr in factors:
        for (space, frame, up), n in zip(indices, arr.shape):
            extents[space] = n
            variances.setdefault((space, frame), set()).add(up)
    groups = sorted(variances, key=lambda g: (space_order.index(g[0]), g[1]))
    free = [g for g in groups if len(variances[g]) == 1]
    summed = [g for g in groups if len(variances[g]) == 2]
    out_shape = [extents[g[0]] for g in free]
    out = np.zeros(out_shape)
    for fvals in itertools.product(*[range(extents[g[0]]) for g in free]):
        total = 0.0
        for svals in itertools.product(*[range(extents[g[0]]) for g in summed]):
            env = dict(zip(free, fvals))
            env.update(zip(summed, svals))
            term = 1.0
            for indices, arr in factors:
                term *= arr[tuple(env[(s, f)] for s, f, _ in indices)]
            total += term
        out[fvals] = total
    out_indices = [(s, f, next(iter(variances[(s, f)]))) for s, f in free]
    return out_indices, out


def tensor_as_factor(t):
    """Translate a library tensor into the oracle's plain representation."""
    from tensalg.notation import Variance

    indices = [(ix.space, ix.frame, ix.variance is Variance.CONTRA) for ix in t.indices]
    return indices, np.array(t.data)


def reference_of(tensors):
    space_order = list(tensors[0].registry.names)
    return product_reference(space_order, [tensor_as_factor(t) for t in tensors])


def dft_direct(x):
    n = len(x)
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * kk * k / n)) for kk in k])
