"""
Spectral Community Detection
============================

Four threshold-based spectral clustering algorithms on dense graphs:

    power_iteration_cluster   rows of B^r, r ~ ln n, grouped within Delta
    centered_svd_cluster      columns of B projected on its top-k eigenspace
    svd1_cluster              same projection on the raw adjacency A
    svd2_cluster              projection on the eigenspace of a random half

All four group vertices by union-find over the pairs whose distance is at
most Delta. Thresholds are carried as natural logs so they can be compared
against the scaled distances of B^r without overflow.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from spectral_sbm.config import PEEL_MAX_ROUNDS, SVD2_MAX_HALVING_ATTEMPTS, default_power
from spectral_sbm.errors import ParameterError
from spectral_sbm.linalg import (
    as_symmetric,
    pairwise_row_distances,
    scaled_power,
    sym_eigen,
)
from spectral_sbm.model import rng_for
from spectral_sbm.unionfind import UnionFind

logger = logging.getLogger(__name__)

ALGORITHMS = ("power", "csvd", "svd1", "svd2")

###############################################################################
#                                CONFIGURATION                                #
###############################################################################
@dataclass(frozen=True)
class DeltaMode:
    """
    How the grouping threshold is chosen.

    ``theory`` uses the model's own formula, ``estimate`` replaces unknown
    cluster sizes by spectral estimates and ``explicit`` takes ``value`` as Delta.
    """
    kind: str = "theory"
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("theory", "estimate", "explicit"):
            raise ParameterError(f"unknown delta mode '{self.kind}'")
        if self.kind == "explicit":
            if self.value is None or not (math.isfinite(self.value) and self.value > 0):
                raise ParameterError(f"explicit delta must be a positive number, got {self.value}")

    @classmethod
    def parse(cls, text) -> "DeltaMode":
        """'theory', 'estimate' or a positive number."""
        if isinstance(text, DeltaMode):
            return text
        if isinstance(text, (int, float)):
            return cls("explicit", float(text))
        raw = str(text).strip().lower()
        if raw in ("theory", "estimate"):
            return cls(raw)
        try:
            return cls("explicit", float(raw))
        except ValueError:
            raise ParameterError(f"delta must be 'theory', 'estimate' or a number, got '{text}'")

    def __str__(self) -> str:
        return repr(self.value) if self.kind == "explicit" else self.kind


@dataclass(frozen=True)
class PowerConfig:
    """
    Power-iteration settings.

    Args:
        p, q: Model probabilities, q < p.
        r: Power exponent; None means ceil(ln n).
        delta_mode: Threshold rule.
        s_star_hint: Largest cluster size for ``theory`` mode.
        peel: Experimental: repeatedly remove the largest group and recluster the rest.
        max_rounds: Peeling rounds when ``peel`` is set.
    """
    p: float
    q: float
    r: Optional[int] = None
    delta_mode: DeltaMode = field(default_factory=DeltaMode)
    s_star_hint: Optional[int] = None
    peel: bool = False
    max_rounds: int = PEEL_MAX_ROUNDS

    def __post_init__(self):
        _check_pq(self.p, self.q)
        if self.r is not None and self.r < 1:
            raise ParameterError(f"r must be >= 1, got {self.r}")
        if self.s_star_hint is not None and self.s_star_hint < 1:
            raise ParameterError(f"s_star_hint must be >= 1, got {self.s_star_hint}")
        if self.max_rounds < 1:
            raise ParameterError(f"max_rounds must be >= 1, got {self.max_rounds}")

    def resolved_r(self, n: int) -> int:
        return self.r if self.r is not None else default_power(n)


@dataclass(frozen=True)
class SvdConfig:
    """Projection-method settings: k clusters and the threshold rule."""
    k: int
    p: float
    q: float
    delta_mode: DeltaMode = field(default_factory=DeltaMode)

    def __post_init__(self):
        _check_pq(self.p, self.q)
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")


def _check_pq(p: float, q: float) -> None:
    if not (math.isfinite(p) and math.isfinite(q)) or not q < p:
        raise ParameterError(f"need finite q < p, got p={p}, q={q}")


###############################################################################
#                                   RESULT                                    #
###############################################################################
@dataclass
class Clustering:
    """
    Vertex groups produced by one algorithm.

    Groups are sorted member tuples ordered by smallest member; ``largest``
    indexes the biggest group (earliest on ties); ``threshold_used`` is ln Delta.
    ``distances`` keeps the unit-scale pairwise distances the grouping saw,
    equal to exp(``distance_log_scale``) times the true distances.
    """
    n: int
    groups: Tuple[Tuple[int, ...], ...]
    algorithm: str
    threshold_used: float
    metadata: Dict[str, Any] = field(default_factory=dict)
    distances: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    distance_log_scale: float = 0.0

    def __post_init__(self):
        self.groups = tuple(sorted((tuple(sorted(int(v) for v in g)) for g in self.groups if len(g)),
                                   key=lambda g: g[0]))
        seen = [v for g in self.groups for v in g]
        if len(seen) != len(set(seen)):
            raise ParameterError("clustering groups overlap")
        if seen and (min(seen) < 0 or max(seen) >= self.n):
            raise ParameterError(f"clustering mentions vertices outside [0, {self.n})")

    @property
    def largest(self) -> int:
        if not self.groups:
            return -1
        sizes = [len(g) for g in self.groups]
        return sizes.index(max(sizes))

    @property
    def largest_group(self) -> Tuple[int, ...]:
        return self.groups[self.largest] if self.groups else ()

    def labels(self) -> np.ndarray:
        """Group index per vertex, -1 for vertices no group covers."""
        return clusters_to_labels(self.groups, self.n)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "n": self.n,
            "groups": [list(g) for g in self.groups],
            "largest": self.largest,
            "threshold_log": self.threshold_used,
            "threshold": math.exp(self.threshold_used) if self.threshold_used < 709 else None,
            "metadata": self.metadata,
        }


def clusters_to_labels(groups: Sequence[Sequence[int]], n: int) -> np.ndarray:
    labels = np.full(n, -1, dtype=np.int64)
    for index, group in enumerate(groups):
        labels[list(group)] = index
    return labels


###############################################################################
#                                 THRESHOLDS                                  #
###############################################################################
def delta_power(s_star: int, p: float, q: float, r: int) -> float:
    """
    ln of Delta = 0.5 sqrt(s*) (p-q)^r (s*)^(r-1).
    """
    _check_pq(p, q)
    if s_star < 1:
        raise ParameterError(f"s_star must be >= 1, got {s_star}")
    if r < 1:
        raise ParameterError(f"r must be >= 1, got {r}")
    ln_s = math.log(s_star)
    return math.log(0.5) + 0.5 * ln_s + r * math.log(p - q) + (r - 1) * ln_s


def delta_svd(s: float, p: float, q: float) -> float:
    """ln of Delta = 0.5 (p-q) sqrt(s), s the average cluster size."""
    _check_pq(p, q)
    if not s > 0:
        raise ParameterError(f"cluster size must be positive, got {s}")
    return math.log(0.5) + math.log(p - q) + 0.5 * math.log(s)


def estimate_s_star(b, p: float, q: float) -> int:
    """round(lambda_1(B) / (p - q)) clamped to [1, n]."""
    _check_pq(p, q)
    b = as_symmetric(b, "B")
    n = b.shape[0]
    top = float(eigh(b, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])
    estimate = int(round(top / (p - q))) if math.isfinite(top) else n
    return min(max(estimate, 1), n)


def _estimate_block_size(eigenvalues: np.ndarray, k: int, p: float, q: float,
                         n_sub: int, centered: bool) -> float:
    """
    Average cluster size from the top-k eigenvalues.

    For E[B] these sum to (p-q) n; the raw A adds q n from the all-q block.
    """
    total = float(np.sum(eigenvalues[:k]))
    if not centered:
        total -= q * n_sub
    return max(total / (k * (p - q)), 1.0)


def _svd_log_delta(mode: DeltaMode, eigenvalues: np.ndarray, n_sub: int, k: int,
                   p: float, q: float, centered: bool) -> Tuple[float, float]:
    """(ln Delta, cluster size used) for the projection methods."""
    if mode.kind == "explicit":
        return math.log(mode.value), n_sub / k
    if mode.kind == "estimate":
        s = _estimate_block_size(eigenvalues, k, p, q, n_sub, centered)
    else:
        s = n_sub / k
    return delta_svd(s, p, q), s


def threshold_groups(distances: np.ndarray, log_scale: float, log_delta: float) -> List[List[int]]:
    """
    Connected components of the graph joining every pair within Delta.

    ``distances`` are unit-scale; the real distance is exp(log_scale) times
    the entry, so the comparison runs against exp(log_delta - log_scale).
    """
    if not math.isfinite(log_delta):
        raise ParameterError(f"threshold must be finite, got ln(Delta)={log_delta}")
    n = distances.shape[0]
    with np.errstate(over="ignore"):
        limit = np.exp(log_delta - log_scale)
    within = np.triu(distances <= limit, k=1)
    uf = UnionFind(n)
    uf.union_pairs(zip(*np.nonzero(within)))
    return uf.groups()


###############################################################################
#                               POWER ITERATION                               #
###############################################################################
def _power_round(b: np.ndarray, cfg: PowerConfig, r: int, mode: DeltaMode,
                 s_star_hint: Optional[int]
                 ) -> Tuple[List[List[int]], Dict[str, Any], float, np.ndarray, float]:
    n = b.shape[0]
    powered = scaled_power(b, r)
    log_scale, dist = pairwise_row_distances(powered)

    if mode.kind == "explicit":
        log_delta, s_used = math.log(mode.value), None
    else:
        if mode.kind == "theory" and s_star_hint is None:
            logger.warning("theory threshold needs s*; falling back to the spectral estimate")
        s_used = s_star_hint if mode.kind == "theory" and s_star_hint is not None \
            else estimate_s_star(b, cfg.p, cfg.q)
        log_delta = delta_power(s_used, cfg.p, cfg.q, r)

    groups = threshold_groups(dist, log_scale, log_delta)
    info = {"r": r, "s_star_used": s_used, "delta_mode": str(mode), "n_sub": n}
    return groups, info, log_delta, dist, log_scale


def power_iteration_cluster(b, cfg: PowerConfig) -> Clustering:
    """
    Group vertices whose rows of B^r lie within Delta of each other.

    With ``cfg.peel`` the largest group is removed and the remaining
    vertices are clustered again (r and s* re-derived for the smaller
    matrix) for up to ``cfg.max_rounds`` rounds.

    Returns:
        Clustering covering all vertices; ``metadata["rounds"]`` records the
        per-round r, s* and threshold.
    """
    b = as_symmetric(b, "B")
    n = b.shape[0]
    r = cfg.resolved_r(n)
    groups, info, log_delta, dist, log_scale = _power_round(
        b, cfg, r, cfg.delta_mode, cfg.s_star_hint)
    rounds = [dict(info, log_delta=log_delta)]
    logger.info("power iteration: n=%d r=%d ln(Delta)=%.3f -> %d groups",
                n, r, log_delta, len(groups))

    if cfg.peel:
        remaining = np.arange(n)
        found: List[List[int]] = []
        round_mode = cfg.delta_mode if cfg.delta_mode.kind == "explicit" else DeltaMode("estimate")
        for rnd in range(cfg.max_rounds):
            largest = max(groups, key=len)
            found.append(remaining[largest].tolist())
            rest = [remaining[g].tolist() for g in groups if g is not largest]
            remaining = np.setdiff1d(remaining, remaining[largest])
            if remaining.size == 0 or rnd == cfg.max_rounds - 1:
                found.extend(rest)
                break
            sub = b[np.ix_(remaining, remaining)]
            sub_r = cfg.r if cfg.r is not None else default_power(sub.shape[0])
            groups, sub_info, sub_delta, _, _ = _power_round(sub, cfg, sub_r, round_mode, None)
            rounds.append(dict(sub_info, log_delta=sub_delta))
        groups = found

    return Clustering(
        n=n,
        groups=groups,
        algorithm="power",
        threshold_used=log_delta,
        metadata={"r": r, "s_star_used": info["s_star_used"], "peel": cfg.peel, "rounds": rounds},
        distances=dist,
        distance_log_scale=log_scale,
    )


###############################################################################
#                             PROJECTION METHODS                              #
###############################################################################
def _projection_cluster(m: np.ndarray, cfg: SvdConfig, algorithm: str, centered: bool,
                        name: str) -> Clustering:
    n = m.shape[0]
    if cfg.k > n:
        raise ParameterError(f"k={cfg.k} exceeds n={n}")
    decomp = sym_eigen(m, name=name)
    # Row u of M V_k holds the coordinates of P_k m_u in the eigenbasis.
    coords = m @ decomp.top(cfg.k)
    _, dist = pairwise_row_distances(coords)
    log_delta, s_used = _svd_log_delta(cfg.delta_mode, decomp.eigenvalues, n, cfg.k,
                                       cfg.p, cfg.q, centered)
    groups = threshold_groups(dist, 0.0, log_delta)
    logger.info("%s: n=%d k=%d Delta=%.4g -> %d groups",
                algorithm, n, cfg.k, math.exp(log_delta), len(groups))
    return Clustering(
        n=n,
        groups=groups,
        algorithm=algorithm,
        threshold_used=log_delta,
        metadata={"k": cfg.k, "s_used": s_used, "delta_mode": str(cfg.delta_mode),
                  "top_eigenvalues": decomp.eigenvalues[:cfg.k].tolist()},
        distances=dist,
    )


def centered_svd_cluster(b, cfg: SvdConfig) -> Clustering:
    """Project the columns of B on its top-k eigenspace and group within Delta = 0.5 (p-q) sqrt(n/k)."""
    return _projection_cluster(as_symmetric(b, "B"), cfg, "csvd", centered=True, name="B")


def svd1_cluster(a, k: int, p: float, q: float, delta_mode: DeltaMode = DeltaMode()) -> Clustering:
    """The same projection rule applied to the uncentered adjacency matrix."""
    cfg = SvdConfig(k=k, p=p, q=q, delta_mode=DeltaMode.parse(delta_mode))
    return _projection_cluster(as_symmetric(a, "A"), cfg, "svd1", centered=False, name="A")


def _halve(n: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = rng_for(seed, "svd2-halving")
    for _ in range(SVD2_MAX_HALVING_ATTEMPTS):
        coin = rng.random(n) < 0.5
        first, second = np.flatnonzero(coin), np.flatnonzero(~coin)
        if first.size and second.size:
            return first, second
        logger.debug("svd2 halving produced an empty side; resampling")
    raise ParameterError(f"random halving of {n} vertices left one side empty twice")


def svd2_cluster(a, k: int, p: float, q: float, seed: int,
                 delta_mode: DeltaMode = DeltaMode()) -> Clustering:
    """
    Split-then-project baseline.

    The vertices are halved at random into V1 and V2. Columns of A restricted
    to rows V1 are projected for every u in V2 onto the top-k eigenspace of
    the V1-induced submatrix A1 and grouped within Delta = 0.5 (p-q) sqrt(|V1|/k).
    Each V1 vertex then joins the one among the k largest V2 groups toward
    which it has the highest edge density, provided that density exceeds
    (p+q)/2. The remaining V1 vertices are grouped among themselves with the
    same projection rule applied to their columns of A1.
    """
    a = as_symmetric(a, "A")
    cfg = SvdConfig(k=k, p=p, q=q, delta_mode=DeltaMode.parse(delta_mode))
    n = a.shape[0]
    if n < 2:
        raise ParameterError("svd2 needs at least two vertices")
    v1, v2 = _halve(n, seed)
    kk = min(cfg.k, v1.size)

    a1 = a[np.ix_(v1, v1)]
    decomp = sym_eigen(a1, name="A1")
    basis = decomp.top(kk)
    log_delta, s_used = _svd_log_delta(cfg.delta_mode, decomp.eigenvalues, v1.size, kk,
                                       cfg.p, cfg.q, centered=False)

    coords_v2 = a[np.ix_(v2, v1)] @ basis
    _, dist_v2 = pairwise_row_distances(coords_v2)
    v2_groups = [v2[g] for g in threshold_groups(dist_v2, 0.0, log_delta)]

    ranked = sorted(range(len(v2_groups)), key=lambda i: (-v2_groups[i].size, v2_groups[i][0]))
    candidates = ranked[:cfg.k]
    density = np.stack([a[np.ix_(v1, v2_groups[i])].mean(axis=1) for i in candidates], axis=1)
    best = np.argmax(density, axis=1)
    accepted = density[np.arange(v1.size), best] > 0.5 * (cfg.p + cfg.q)

    merged = [list(g) for g in v2_groups]
    for row in np.flatnonzero(accepted):
        merged[candidates[best[row]]].append(int(v1[row]))

    orphans = np.flatnonzero(~accepted)
    if orphans.size:
        coords_orphans = a1[:, orphans].T @ basis
        _, dist_orphans = pairwise_row_distances(coords_orphans)
        for g in threshold_groups(dist_orphans, 0.0, log_delta):
            merged.append(v1[orphans[g]].tolist())

    logger.info("svd2: |V1|=%d |V2|=%d, %d V2 groups, %d orphans",
                v1.size, v2.size, len(v2_groups), orphans.size)
    return Clustering(
        n=n,
        groups=merged,
        algorithm="svd2",
        threshold_used=log_delta,
        metadata={"k": cfg.k, "s_used": s_used, "seed": int(seed), "v1_size": int(v1.size),
                  "orphans": int(orphans.size), "delta_mode": str(cfg.delta_mode)},
    )


###############################################################################
#                          POWER / PROJECTION RESIDUAL                        #
###############################################################################
def power_svd_residual(b, k: int, r: int, p: float, q: float) -> float:
    """
    max_i ||P_k b_i - f_r B^(r+1) e_i|| / Delta with f_r = 1 / ((p-q) s)^r, s = n/k.

    Delta = 0.5 (p-q) sqrt(s). The factor f_r is applied to the scaled power
    in log domain before the difference is formed.
    """
    _check_pq(p, q)
    b = as_symmetric(b, "B")
    n = b.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    if r < 1:
        raise ParameterError(f"r must be >= 1, got {r}")
    s = n / k
    decomp = sym_eigen(b, name="B")
    basis = decomp.top(k)
    projected = basis @ (basis.T @ b)

    powered = scaled_power(b, r + 1)
    log_factor = powered.log_scale - r * math.log((p - q) * s) if not powered.is_zero else 0.0
    # factor out the larger scale; out of regime f_r B^(r+1) exceeds float range
    shift = max(log_factor, 0.0)
    diff = projected * math.exp(-shift) - powered.base * math.exp(log_factor - shift)
    worst = float(np.max(np.linalg.norm(diff, axis=0)))
    if worst == 0.0:
        return 0.0
    log_ratio = shift + math.log(worst) - delta_svd(s, p, q)
    return math.exp(log_ratio) if log_ratio < 709 else math.inf
