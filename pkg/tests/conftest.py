import numpy as np
import pytest

from tensalg.notation import TensorIndex, Variance, canonical_order
from tensalg.spaces import SpaceRegistry
from tensalg.tensor import DenseTensor


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.max(np.abs(b)) if b.size else 0.0, 1e-300)
    return float(np.max(np.abs(a - b)) / scale) if a.size else 0.0


def random_product(rng, max_factors=4, max_extent=4, n_spaces=3, max_frame=2, max_order=3):
    """Random registry plus factors with random variance/frame patterns.

    Group reuse across factors is frequent so merges and contractions both
    occur; every factor keeps its own index list duplicate-free.
    """
    names = ["X", "Y", "Z", "W"][:n_spaces]
    reg = SpaceRegistry([(n, int(rng.integers(1, max_extent + 1))) for n in names])
    pool = [
        TensorIndex(s, f, v)
        for s in names
        for f in range(max_frame)
        for v in (Variance.CONTRA, Variance.CO)
    ]
    k = int(rng.integers(1, max_factors + 1))
    factors = []
    for _ in range(k):
        order = int(rng.integers(0, max_order + 1))
        picks = rng.choice(len(pool), size=order, replace=False)
        indices = canonical_order(reg, [pool[i] for i in picks])
        shape = [reg.extent(ix.space) for ix in indices]
        factors.append(DenseTensor(reg, indices, rng.standard_normal(shape)))
    return reg, factors


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
