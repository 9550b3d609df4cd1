import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from spectral_sbm.model import BlockParams, center, plant, sample_ssbm, split  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sym(rng):
    """Factory for random symmetric matrices (exactly symmetric by construction)."""
    def build(n):
        x = rng.standard_normal((n, n))
        return (x + x.T) / 2
    return build


@pytest.fixture
def instance():
    """Factory: (model, A, B, split) for a seeded planted-partition draw."""
    def build(n, p, q, k=None, sizes=None, seed=0, self_loops=True):
        params = BlockParams(n=n, p=p, q=q, k=k, sizes=tuple(sizes) if sizes else None)
        model = plant(params, seed, self_loops)
        a = sample_ssbm(model)
        b = center(a, q)
        return model, a, b, split(b, model)
    return build
