"""
Recovery Evaluation
===================

Permutation-invariant comparison of a Clustering against planted labels,
trial aggregation and separation-gap statistics.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from spectral_sbm.clustering import Clustering
from spectral_sbm.errors import ParameterError


@dataclass(frozen=True)
class RecoveryReport:
    """
    Args:
        exact_all: found partition equals the planted one up to label names.
        exact_largest: some largest planted cluster appears verbatim as a group.
        accuracy: matched vertices / n under greedy max-overlap matching.
        per_cluster_jaccard: Jaccard of each planted cluster with its match,
            clusters ordered by (size descending, smallest member).
    """
    exact_all: bool
    exact_largest: bool
    accuracy: float
    per_cluster_jaccard: List[float]


@dataclass(frozen=True)
class RecoverySummary:
    trials: int
    mean_accuracy: float
    min_accuracy: float
    exact_all_rate: float
    exact_largest_rate: float


def compare(found: Clustering, truth: Sequence[int]) -> RecoveryReport:
    """
    Score ``found`` against planted ``truth`` labels.

    Overlaps between found groups and planted clusters are matched greedily,
    largest overlap first; ties go to the earlier group, then the earlier
    planted cluster in (size descending, smallest member) order.

    Raises:
        ParameterError: if the clustering and the labels disagree on n.
    """
    truth = np.asarray(truth, dtype=np.int64)
    n = truth.shape[0]
    if found.n != n:
        raise ParameterError(f"clustering covers n={found.n} vertices, labels cover {n}")

    clusters = [np.flatnonzero(truth == label) for label in np.unique(truth)]
    clusters.sort(key=lambda c: (-c.size, int(c[0])))
    cluster_of = np.empty(n, dtype=np.int64)
    for index, members in enumerate(clusters):
        cluster_of[members] = index

    overlap = np.zeros((len(found.groups), len(clusters)), dtype=np.int64)
    for g, group in enumerate(found.groups):
        if group:
            overlap[g] = np.bincount(cluster_of[list(group)], minlength=len(clusters))

    pairs = sorted(((int(overlap[g, c]), g, c) for g, c in zip(*np.nonzero(overlap))),
                   key=lambda item: (-item[0], item[1], item[2]))
    used_groups, match = set(), {}
    correct = 0
    for count, g, c in pairs:
        if g in used_groups or c in match:
            continue
        used_groups.add(g)
        match[c] = g
        correct += count

    jaccard = []
    for c, members in enumerate(clusters):
        if c not in match:
            jaccard.append(0.0)
            continue
        group_size = len(found.groups[match[c]])
        inter = int(overlap[match[c], c])
        jaccard.append(inter / (members.size + group_size - inter))

    found_sets = {frozenset(g) for g in found.groups}
    planted_sets = {frozenset(int(v) for v in c) for c in clusters}
    top = clusters[0].size
    exact_largest = any(frozenset(int(v) for v in c) in found_sets
                        for c in clusters if c.size == top)
    return RecoveryReport(
        exact_all=found_sets == planted_sets,
        exact_largest=exact_largest,
        accuracy=correct / n,
        per_cluster_jaccard=jaccard,
    )


def aggregate(reports: Sequence[RecoveryReport]) -> RecoverySummary:
    if not reports:
        raise ParameterError("cannot aggregate an empty list of reports")
    accuracies = [r.accuracy for r in reports]
    count = len(reports)
    return RecoverySummary(
        trials=count,
        mean_accuracy=sum(accuracies) / count,
        min_accuracy=min(accuracies),
        exact_all_rate=sum(r.exact_all for r in reports) / count,
        exact_largest_rate=sum(r.exact_largest for r in reports) / count,
    )


###############################################################################
#                               SEPARATION GAP                                #
###############################################################################
@dataclass(frozen=True)
class GapStats:
    """
    Largest within-cluster and smallest cross-cluster distance, as natural logs.

    ``ratio`` is cross / within (inf when no within pair is apart).
    """
    log_within: float
    log_cross: float

    @property
    def ratio(self) -> float:
        if self.log_within == -math.inf:
            return math.inf
        return math.exp(min(self.log_cross - self.log_within, 709.0))

    def relative_to(self, log_delta: float):
        """(within / Delta, cross / Delta)."""
        return (_safe_exp(self.log_within - log_delta), _safe_exp(self.log_cross - log_delta))


def _safe_exp(x: float) -> float:
    if x == -math.inf:
        return 0.0
    return math.exp(min(x, 709.0))


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def separation_gap(distances: np.ndarray, truth: Sequence[int], log_scale: float = 0.0,
                   focus: Optional[int] = None) -> GapStats:
    """
    Separation of the planted partition under a pairwise distance matrix.

    Args:
        distances: n x n unit-scale distances (true distance = exp(log_scale) * entry).
        truth: Planted labels.
        focus: If given, only pairs touching this planted label count: within
            pairs inside it and cross pairs from it to any other vertex.
    """
    truth = np.asarray(truth)
    if distances.shape != (truth.size, truth.size):
        raise ParameterError("distance matrix does not match the label vector")
    same = truth[:, None] == truth[None, :]
    upper = np.triu(np.ones_like(same), k=1)
    if focus is not None:
        in_focus = truth == focus
        touches = in_focus[:, None] | in_focus[None, :]
        within_mask = upper & same & in_focus[:, None]
        cross_mask = upper & ~same & touches
    else:
        within_mask = upper & same
        cross_mask = upper & ~same

    within = float(distances[within_mask].max()) if within_mask.any() else 0.0
    cross = float(distances[cross_mask].min()) if cross_mask.any() else math.inf
    log_cross = math.inf if cross == math.inf else _log(cross) + log_scale
    log_within = _log(within) + log_scale if within > 0 else -math.inf
    return GapStats(log_within, log_cross)
