"""
Index-List Encodings and Exhaustive Oracles
===========================================

An entry of R^t L expands into monomials

    P_L = R[a, l1] R[l1, l2] ... R[l(t-1), lt] L[lt, b],   L = (l1, ..., lt) in [n]^t.

Lists are grouped by the pattern of repeated indices, written as a
restricted-growth string X: X[1] = 1, a fresh index gets max(X so far) + 1
and a repeated index copies the value it had before. Summing P_L inside
each class gives the class sums Z(X); the class with no repeats is W.

This module enumerates the classes and checks, by brute force on small
instances, that class sums add up to the matrix-product entry and that
W equals t^t times its average over random assignments of the vertices to
t labeled parts.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from spectral_sbm.config import MAX_ENCODING_LENGTH, MAX_MONOMIALS, MAX_PARTITIONS
from spectral_sbm.errors import ParameterError, ResourceError
from spectral_sbm.model import rng_for

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny


@dataclass(frozen=True, order=True)
class EncodingClass:
    """Restricted-growth string of length t (1-based values)."""
    x: Tuple[int, ...]

    def __post_init__(self):
        x = tuple(int(v) for v in self.x)
        if not x or x[0] != 1:
            raise ParameterError(f"encoding must start with 1, got {list(x)}")
        peak = 1
        for value in x[1:]:
            if not 1 <= value <= peak + 1:
                raise ParameterError(f"{list(x)} is not a restricted-growth string")
            peak = max(peak, value)
        object.__setattr__(self, "x", x)

    @property
    def t(self) -> int:
        return len(self.x)

    @property
    def t_prime(self) -> int:
        """Number of distinct indices in any list of this class."""
        return max(self.x)

    @property
    def all_distinct(self) -> bool:
        return self.t_prime == self.t


def encode_index_list(indices: Sequence[int]) -> EncodingClass:
    """
    >>> encode_index_list((5, 7, 5)).x
    (1, 2, 1)
    """
    if len(indices) < 1:
        raise ParameterError("index list must be non-empty")
    first_seen: Dict[int, int] = {}
    code = []
    for index in indices:
        if index not in first_seen:
            first_seen[index] = len(first_seen) + 1
        code.append(first_seen[index])
    return EncodingClass(tuple(code))


def restricted_growth_strings(t: int) -> Iterator[Tuple[int, ...]]:
    """All restricted-growth strings of length t in lexicographic order."""
    if t < 1:
        return

    def extend(prefix: List[int], peak: int):
        if len(prefix) == t:
            yield tuple(prefix)
            return
        for value in range(1, peak + 2):
            prefix.append(value)
            yield from extend(prefix, max(peak, value))
            prefix.pop()

    yield from extend([1], 1)


def bell_number(t: int) -> int:
    """Bell numbers from the Bell triangle."""
    row = [1]
    for _ in range(t - 1):
        nxt = [row[-1]]
        for value in row:
            nxt.append(nxt[-1] + value)
        row = nxt
    return row[-1]


def enumerate_encodings(t: int, brute_force: bool = False) -> FrozenSet[EncodingClass]:
    """
    Every encoding of a length-t index list.

    Args:
        t: List length, 1 <= t <= 8.
        brute_force: Encode all t^t lists over [t] and deduplicate instead of
            generating restricted-growth strings directly.

    Raises:
        ResourceError: if t exceeds the encoding cap or t^t the monomial cap.
    """
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    if t > MAX_ENCODING_LENGTH:
        raise ResourceError("MAX_ENCODING_LENGTH", t, MAX_ENCODING_LENGTH)
    if not brute_force:
        return frozenset(EncodingClass(x) for x in restricted_growth_strings(t))
    if t ** t > MAX_MONOMIALS:
        raise ResourceError("MAX_MONOMIALS", t ** t, MAX_MONOMIALS)
    return frozenset(encode_index_list(idx) for idx in itertools.product(range(t), repeat=t))


###############################################################################
#                               GROUP-SUM ORACLE                              #
###############################################################################
@dataclass(frozen=True)
class GroupSums:
    per_class: Dict[EncodingClass, float]
    total: float
    direct: float
    abs_total: float

    @property
    def rel_error(self) -> float:
        return abs(self.total - self.direct) / max(abs(self.direct), self.abs_total, TINY)


def _check_endpoints(R: np.ndarray, L: np.ndarray, a: int, b: int, t: int) -> int:
    n = R.shape[0]
    if R.shape != (n, n) or L.shape != (n, n):
        raise ParameterError(f"R and L must be n x n, got {R.shape} and {L.shape}")
    if not (0 <= a < n and 0 <= b < n):
        raise ParameterError(f"endpoints ({a}, {b}) out of range for n={n}")
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    return n


def _index_lists(n: int, t: int) -> np.ndarray:
    if n ** t > MAX_MONOMIALS:
        raise ResourceError("MAX_MONOMIALS", n ** t, MAX_MONOMIALS)
    return np.array(list(itertools.product(range(n), repeat=t)), dtype=np.int64).reshape(-1, t)


def _encode_rows(idx: np.ndarray) -> np.ndarray:
    """Row-wise restricted-growth codes of an (N, t) array of index lists."""
    count, t = idx.shape
    codes = np.zeros((count, t), dtype=np.int64)
    codes[:, 0] = 1
    for i in range(1, t):
        fresh = np.ones(count, dtype=bool)
        value = np.zeros(count, dtype=np.int64)
        for j in range(i):
            hit = fresh & (idx[:, j] == idx[:, i])
            value[hit] = codes[hit, j]
            fresh &= ~hit
        value[fresh] = codes[fresh, :i].max(axis=1) + 1
        codes[:, i] = value
    return codes


def _monomials(R: np.ndarray, L: np.ndarray, a: int, b: int, idx: np.ndarray) -> np.ndarray:
    values = R[a, idx[:, 0]]
    for i in range(1, idx.shape[1]):
        values = values * R[idx[:, i - 1], idx[:, i]]
    return values * L[idx[:, -1], b]


def group_sum_oracle(R, L, a: int, b: int, t: int) -> GroupSums:
    """
    Enumerate all n^t monomials of (R^t L)[a, b] and sum them per encoding class.
    """
    R = np.asarray(R, dtype=float)
    L = np.asarray(L, dtype=float)
    n = _check_endpoints(R, L, a, b, t)
    idx = _index_lists(n, t)
    values = _monomials(R, L, a, b, idx)
    codes, inverse = np.unique(_encode_rows(idx), axis=0, return_inverse=True)
    sums = np.bincount(inverse.reshape(-1), weights=values, minlength=codes.shape[0])
    per_class = {EncodingClass(tuple(code)): float(total) for code, total in zip(codes, sums)}
    direct = float((np.linalg.matrix_power(R, t) @ L)[a, b])
    return GroupSums(per_class, float(sums.sum()), direct, float(np.abs(values).sum()))


###############################################################################
#                          RANDOM-PARTITION IDENTITIES                        #
###############################################################################
@dataclass(frozen=True)
class PartitionCheck:
    """
    ``direct`` is the class sum, ``estimate`` is t'^t' times its average over
    all ``partitions`` assignments.
    """
    direct: float
    estimate: float
    partitions: int
    abs_total: float

    @property
    def rel_error(self) -> float:
        return abs(self.estimate - self.direct) / max(abs(self.direct), self.abs_total, TINY)


@dataclass(frozen=True)
class PartitionEstimate:
    """Monte Carlo version of PartitionCheck; ``direct`` is None beyond the monomial cap."""
    estimate: float
    stderr: float
    samples: int
    direct: Optional[float]


def _all_assignments(n: int, parts: int) -> np.ndarray:
    if parts ** n > MAX_PARTITIONS:
        raise ResourceError("MAX_PARTITIONS", parts ** n, MAX_PARTITIONS)
    return np.array(list(itertools.product(range(parts), repeat=n)), dtype=np.int64).reshape(-1, n)


def _restricted_sums(R: np.ndarray, L: np.ndarray, a: int, b: int, t: int,
                     assign: np.ndarray) -> np.ndarray:
    """
    W(T) for every assignment row: sum over lists with l_i in part i.

    Evaluated as a chain of masked vector-matrix products, one row per assignment.
    """
    vec = R[a][None, :] * (assign == 0)
    for i in range(1, t):
        vec = (vec @ R) * (assign == i)
    return vec @ L[:, b]


def _distinct_sum(R: np.ndarray, L: np.ndarray, a: int, b: int, t: int) -> Tuple[float, float]:
    n = R.shape[0]
    if n ** t > MAX_MONOMIALS:
        raise ResourceError("MAX_MONOMIALS", n ** t, MAX_MONOMIALS)
    if t > n:
        return 0.0, 0.0
    idx = np.array(list(itertools.permutations(range(n), t)), dtype=np.int64).reshape(-1, t)
    values = _monomials(R, L, a, b, idx)
    return float(values.sum()), float(np.abs(values).sum())


def partition_unbiasedness_check(R, L, a: int, b: int, t: int) -> PartitionCheck:
    """
    Compare W (all-distinct class sum) with t^t times the exact average of
    W(T) over all t^n assignments of [n] to t labeled parts.
    """
    R = np.asarray(R, dtype=float)
    L = np.asarray(L, dtype=float)
    n = _check_endpoints(R, L, a, b, t)
    assign = _all_assignments(n, t)
    direct, abs_total = _distinct_sum(R, L, a, b, t)
    average = float(_restricted_sums(R, L, a, b, t, assign).mean())
    return PartitionCheck(direct, (t ** t) * average, assign.shape[0], abs_total)


def partition_unbiasedness_estimate(R, L, a: int, b: int, t: int, samples: int,
                                    seed: int) -> PartitionEstimate:
    """Sampled version of the partition identity with its standard error."""
    R = np.asarray(R, dtype=float)
    L = np.asarray(L, dtype=float)
    n = _check_endpoints(R, L, a, b, t)
    if samples < 2:
        raise ParameterError(f"need at least two samples, got {samples}")
    rng = rng_for(seed, "partition-samples")
    assign = rng.integers(0, t, size=(samples, n))
    scaled = (t ** t) * _restricted_sums(R, L, a, b, t, assign)
    try:
        direct: Optional[float] = _distinct_sum(R, L, a, b, t)[0]
    except ResourceError:
        direct = None
    return PartitionEstimate(float(scaled.mean()), float(scaled.std(ddof=1) / math.sqrt(samples)),
                             samples, direct)


def class_unbiasedness_check(R, L, a: int, b: int, x: Sequence[int]) -> PartitionCheck:
    """
    Same identity for an arbitrary class X restricted to lists avoiding a.

    Z(X, 0) sums P_L over lists with encoding X and no index equal to a.
    Assigning [n] minus {a} to t' = max(X) labeled parts, Z(X, 0, T) keeps
    the lists whose j-th distinct index lies in part j; its average over all
    t'^(n-1) assignments times t'^t' equals Z(X, 0).
    """
    R = np.asarray(R, dtype=float)
    L = np.asarray(L, dtype=float)
    cls = EncodingClass(tuple(x))
    n = _check_endpoints(R, L, a, b, cls.t)
    parts = cls.t_prime
    others = np.array([v for v in range(n) if v != a], dtype=np.int64)

    if others.size ** parts > MAX_MONOMIALS:
        raise ResourceError("MAX_MONOMIALS", others.size ** parts, MAX_MONOMIALS)
    distinct = np.array(list(itertools.permutations(others.tolist(), parts)),
                        dtype=np.int64).reshape(-1, parts)
    positions = np.array(cls.x, dtype=np.int64) - 1
    values = _monomials(R, L, a, b, distinct[:, positions]) if distinct.size else np.zeros(0)

    assign = np.full((1, n), -1, dtype=np.int64)
    if others.size:
        sub = _all_assignments(int(others.size), parts)
        assign = np.full((sub.shape[0], n), -1, dtype=np.int64)
        assign[:, others] = sub

    restricted = np.zeros(assign.shape[0])
    for u, value in zip(distinct, values):
        hit = np.all(assign[:, u] == np.arange(parts), axis=1)
        restricted += value * hit
    return PartitionCheck(
        direct=float(values.sum()),
        estimate=(parts ** parts) * float(restricted.mean()),
        partitions=int(assign.shape[0]),
        abs_total=float(np.abs(values).sum()),
    )
