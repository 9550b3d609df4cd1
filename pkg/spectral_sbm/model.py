"""
Planted Partition Model
=======================

Symmetric stochastic block model parameters, seeded samplers and the
structure + noise split B = L + R.

Randomness comes from numpy ``PCG64`` generators whose seeds are derived
from (base seed, stream keys) through ``SeedSequence``; the label draw and
the edge draw use separate streams so each can be reproduced alone.
"""

import logging
import math
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from spectral_sbm.errors import ParameterError
from spectral_sbm.linalg import SymMatrix, as_symmetric

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1

###############################################################################
#                                 PARAMETERS                                  #
###############################################################################
@dataclass(frozen=True)
class BlockParams:
    """
    Two-parameter block model.

    Either ``sizes`` (explicit cluster sizes summing to n) or ``k`` (uniform
    assignment over k labels) must be given. With ``sizes`` set, ``k`` is
    derived from it.
    """
    n: int
    p: float
    q: float
    sizes: Optional[Tuple[int, ...]] = None
    k: Optional[int] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        for name in ("p", "q"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ParameterError(f"{name} must lie in [0, 1], got {value}")
        if not self.q < self.p:
            raise ParameterError(
                f"need q < p for a recoverable planted partition, got p={self.p}, q={self.q}"
            )
        if self.sizes is not None:
            sizes = tuple(int(s) for s in self.sizes)
            if not sizes or min(sizes) < 1:
                raise ParameterError(f"cluster sizes must be positive, got {list(sizes)}")
            if sum(sizes) != self.n:
                raise ParameterError(f"cluster sizes sum to {sum(sizes)}, expected n={self.n}")
            if self.k is not None and self.k != len(sizes):
                raise ParameterError(f"k={self.k} disagrees with {len(sizes)} sizes")
            object.__setattr__(self, "sizes", sizes)
            object.__setattr__(self, "k", len(sizes))
        elif self.k is None or not 1 <= self.k <= self.n:
            raise ParameterError(f"k must satisfy 1 <= k <= n={self.n}, got {self.k}")

    @property
    def uniform(self) -> bool:
        return self.sizes is None

    @property
    def gap(self) -> float:
        """p - q."""
        return self.p - self.q

    @property
    def s(self) -> float:
        """Average cluster size n / k."""
        return self.n / self.k

    @property
    def sigma2(self) -> float:
        """Noise variance bound max{p(1-p), q(1-q)}."""
        return max(self.p * (1.0 - self.p), self.q * (1.0 - self.q))


###############################################################################
#                                   SEEDING                                   #
###############################################################################
def _key_to_int(key: Union[int, str]) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & SEED_MASK


def derive_seed(seed: int, *keys: Union[int, str]) -> int:
    """64-bit seed derived from a base seed and stream keys (order-independent of call order)."""
    entropy = [int(seed) & SEED_MASK] + [_key_to_int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


def rng_for(seed: int, *keys: Union[int, str]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))


###############################################################################
#                                PLANTED MODEL                                #
###############################################################################
@dataclass(frozen=True)
class PlantedModel:
    """Block parameters plus the hidden labels and the seed that drew them."""
    params: BlockParams
    labels: np.ndarray
    seed: int
    self_loops: bool = True

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (self.params.n,):
            raise ParameterError(f"labels must have length n={self.params.n}")
        if labels.min() < 0 or labels.max() >= self.params.k:
            raise ParameterError(f"labels must lie in [0, {self.params.k})")
        if self.params.sizes is not None:
            counts = np.bincount(labels, minlength=self.params.k)
            if tuple(int(c) for c in counts) != self.params.sizes:
                raise ParameterError("labels are inconsistent with the explicit cluster sizes")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.params.k)

    @property
    def s_star(self) -> int:
        """Size of the largest planted cluster."""
        return int(self.cluster_sizes.max())

    @property
    def s_min(self) -> int:
        """Size of the smallest non-empty planted cluster."""
        sizes = self.cluster_sizes
        return int(sizes[sizes > 0].min())

    @property
    def largest_label(self) -> int:
        return int(np.argmax(self.cluster_sizes))

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


def assign_uniform(n: int, k: int, seed: int) -> np.ndarray:
    """Each vertex independently uniform over k labels."""
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    rng = np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))
    return rng.integers(0, k, size=n, dtype=np.int64)


def plant(params: BlockParams, seed: int, self_loops: bool = True) -> PlantedModel:
    """
    Draw (or lay out) the hidden partition.

    Explicit sizes give contiguous blocks 0..k-1 in order; uniform mode
    draws labels from the ``"labels"`` stream of ``seed``.
    """
    if params.sizes is not None:
        labels = np.repeat(np.arange(params.k, dtype=np.int64), params.sizes)
    else:
        labels = assign_uniform(params.n, params.k, derive_seed(seed, "labels"))
    return PlantedModel(params, labels, int(seed), self_loops)


###############################################################################
#                                  SAMPLERS                                   #
###############################################################################
def _sample_adjacency(labels: np.ndarray, p: float, q: float,
                      rng: np.random.Generator, self_loops: bool) -> SymMatrix:
    """
    Draw the upper triangle once and mirror it.

    Does not check q < p so tests can drive the p = q corner.
    """
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p, q)
    draws = rng.random(prob.shape)
    upper = np.triu(draws < prob, k=0 if self_loops else 1)
    return (upper | upper.T).astype(float)


def sample_ssbm(model: PlantedModel) -> SymMatrix:
    """
    Adjacency matrix of one SSBM draw.

    Each unordered pair is an independent Bernoulli(p) inside a cluster and
    Bernoulli(q) across clusters. With ``self_loops`` the diagonal is sampled
    as an intra-cluster pair, otherwise it is zero.
    """
    params = model.params
    rng = rng_for(model.seed, "edges")
    a = _sample_adjacency(model.labels, params.p, params.q, rng, model.self_loops)
    logger.debug("sampled SSBM n=%d k=%d p=%.3f q=%.3f: %d edges",
                 params.n, params.k, params.p, params.q, int(np.triu(a).sum()))
    return a


def center(a, q: float) -> SymMatrix:
    """B = A - q * ones."""
    return as_symmetric(a, "A") - q


###############################################################################
#                           STRUCTURE + NOISE SPLIT                           #
###############################################################################
@dataclass(frozen=True)
class StructureNoiseSplit:
    """
    B together with L = E[B] and R = B - L.

    L + R equals ``b`` up to one rounding per entry; ``b`` itself is kept
    for audits that need the exact centered matrix.
    """
    b: SymMatrix
    L: SymMatrix
    R: SymMatrix
    labels: np.ndarray
    p: float
    q: float

    @property
    def n(self) -> int:
        return int(self.b.shape[0])


def structure_matrix(labels: Sequence[int], p: float, q: float) -> SymMatrix:
    """(p - q) on same-label entries (diagonal included), 0 elsewhere."""
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    return np.where(same, p - q, 0.0)


def split(b, model: PlantedModel) -> StructureNoiseSplit:
    """Split a centered adjacency matrix of ``model`` into structure and noise."""
    b = as_symmetric(b, "B")
    if b.shape[0] != model.n:
        raise ParameterError(f"B has dimension {b.shape[0]}, model has n={model.n}")
    params = model.params
    L = structure_matrix(model.labels, params.p, params.q)
    return StructureNoiseSplit(b, L, b - L, model.labels, params.p, params.q)
