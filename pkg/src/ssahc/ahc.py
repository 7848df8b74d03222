"""Average-linkage agglomerative clustering on a fixed affinity matrix.

Clusters are always indexed by the position of their smallest member, so a
merge of ``a < b`` keeps index ``a`` for the union and drops ``b``. Ties
between equal scores go to the lexicographically smallest ``(a, b)``.

With ``lam > 0`` a candidate pair is scored as its linkage minus ``lam``
times the summed affinity of the hypothetical union to its ``k_c`` nearest
other clusters, which favours merges that leave the union distinct from the
rest of the recording.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .affinity import check_affinity, cluster_affinity
from .model import ClusterState


@dataclass(frozen=True)
class MergeStep:
    iteration: int
    merged_pair: tuple[int, int]
    score: float
    affinity: float
    clusters_after: int

    def format(self) -> str:
        a, b = self.merged_pair
        return (f"{self.iteration} {a} {b} {self.score!r} {self.affinity!r} "
                f"{self.clusters_after}")


def nearest_neighbor_clusters(target: Sequence[int], others: Sequence[Sequence[int]],
                              a: np.ndarray, k_c: int) -> list[list[int]]:
    """The ``k_c`` clusters in ``others`` with highest linkage to ``target``.

    Sorted by descending affinity; ties keep the order of ``others``.
    """
    if not others:
        raise ValueError("no candidate neighbour clusters")
    if k_c < 1:
        raise ValueError("k_c must be >= 1")
    scores = [cluster_affinity(target, c, a) for c in others]
    order = sorted(range(len(others)), key=lambda i: (-scores[i], i))
    return [list(others[i]) for i in order[:k_c]]


def _cluster_sums(a: np.ndarray, members: list[list[int]]) -> np.ndarray:
    n = a.shape[0]
    ind = np.zeros((len(members), n))
    for k, m in enumerate(members):
        ind[k, m] = 1.0
    return ind @ a @ ind.T


def _best_pair(sums: np.ndarray, sizes: np.ndarray, lam: float,
               k_c: int) -> tuple[int, int, float, float]:
    """Return ``(a, b, criterion, linkage)`` for the winning pair."""
    n = sizes.shape[0]
    link = sums / np.outer(sizes, sizes)
    if lam == 0.0:
        masked = np.where(np.triu(np.ones((n, n), dtype=bool), 1), link, -np.inf)
        flat = int(np.argmax(masked))
        i, j = divmod(flat, n)
        return i, j, float(link[i, j]), float(link[i, j])

    k = min(k_c, n - 2)
    best = (-np.inf, 0, 1)
    for i in range(n - 1):
        js = np.arange(i + 1, n)
        crit = link[i, js].copy()
        if k > 0:
            # linkage from the union (i, j) to every cluster
            union = (sums[i][None, :] + sums[js]) / (
                (sizes[i] + sizes[js])[:, None] * sizes[None, :])
            union[:, i] = -np.inf
            union[np.arange(js.size), js] = -np.inf
            if k == 1:
                penalty = union.max(axis=1)
            else:
                top = -np.sort(-np.partition(union, n - k, axis=1)[:, n - k:], axis=1)
                penalty = top[:, 0].copy()
                for c in range(1, k):
                    penalty += top[:, c]
            crit = crit - lam * penalty
        m = int(np.argmax(crit))
        if crit[m] > best[0]:
            best = (float(crit[m]), i, int(js[m]))
    _, i, j = best
    return i, j, best[0], float(link[i, j])


def select_merge_pair(clusters: Sequence[Sequence[int]], a: np.ndarray,
                      lam: float = 0.0, k_c: int = 1) -> tuple[int, int, float]:
    """Pick the pair of clusters to merge next.

    ``clusters`` are index sets into ``a``; the returned indices refer to
    positions in ``clusters``. The score is the merge criterion value.
    """
    if len(clusters) < 2:
        raise ValueError("need at least 2 clusters to merge")
    members = [list(c) for c in clusters]
    sums = _cluster_sums(np.asarray(a, dtype=np.float64), members)
    sizes = np.array([len(c) for c in members], dtype=np.float64)
    i, j, crit, _ = _best_pair(sums, sizes, lam, k_c)
    return i, j, crit


def ahc_cluster(a, *, target: Optional[int] = None, threshold: Optional[float] = None,
                lam: float = 0.0, k_c: int = 1, initial: Optional[ClusterState] = None,
                min_clusters: int = 1, iteration: int = 0,
                ) -> tuple[ClusterState, list[MergeStep]]:
    """Merge clusters until a stop condition holds.

    Exactly one of ``target`` (cluster count) and ``threshold`` is given.
    In threshold mode merging stops once the winning pair's plain linkage
    falls below ``threshold``; ``min_clusters`` additionally floors the
    count. Starting clusters come from ``initial`` or are singletons.
    """
    a = check_affinity(a)
    n = a.shape[0]
    if (target is None) == (threshold is None):
        raise ValueError("give exactly one of target and threshold")
    if initial is None:
        initial = ClusterState.singletons(n)
    if initial.labels.shape[0] != n:
        raise ValueError("initial labels do not match the affinity size")
    members = initial.clusters()
    members.sort(key=lambda m: m[0])
    if target is not None and not 1 <= target <= len(members):
        raise ValueError(f"target {target} outside 1..{len(members)}")
    floor = max(min_clusters, target or 1)

    sums = _cluster_sums(a, members)
    sizes = np.array([len(m) for m in members], dtype=np.float64)
    steps: list[MergeStep] = []
    while len(members) > floor:
        i, j, crit, link = _best_pair(sums, sizes, lam, k_c)
        if threshold is not None and link < threshold:
            break
        sums[i, :] += sums[j, :]
        sums[:, i] += sums[:, j]
        sums = np.delete(np.delete(sums, j, axis=0), j, axis=1)
        sizes[i] += sizes[j]
        sizes = np.delete(sizes, j)
        members[i] = sorted(members[i] + members[j])
        del members[j]
        steps.append(MergeStep(iteration, (i, j), crit, link, len(members)))
    return ClusterState.from_clusters(members, n), steps
