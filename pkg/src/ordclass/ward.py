"""Ward minimum-variance agglomerative clustering for one-dimensional data."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import Composition

__all__ = ["Merge", "Dendrogram", "FlatClustering", "ward_linkage", "cut", "within_ss"]


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    cost: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge history in the usual linkage convention.

    Leaves are ids ``0..n-1``; the cluster formed by merge ``i`` gets id
    ``n + i``. ``cost`` is the increase in total within-cluster sum of
    squares caused by the merge.
    """

    merges: tuple[Merge, ...]
    leaf_count: int

    @property
    def costs(self) -> np.ndarray:
        return np.array([m.cost for m in self.merges])

    def is_monotone(self, tol: float = 1e-12) -> bool:
        c = self.costs
        return bool(np.all(np.diff(c) >= -tol * max(1.0, float(np.abs(c).max(initial=0.0)))))

    def members(self, cluster_id: int) -> list[int]:
        n = self.leaf_count
        stack, out = [cluster_id], []
        while stack:
            c = stack.pop()
            if c < n:
                out.append(c)
            else:
                m = self.merges[c - n]
                stack.extend((m.left, m.right))
        return sorted(out)

    def to_dict(self) -> dict:
        return {
            "leaf_count": self.leaf_count,
            "merges": [
                {"left": m.left, "right": m.right, "cost": m.cost, "size": m.size} for m in self.merges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def ward_linkage(values) -> Dendrogram:
    """Agglomerate by smallest Ward increase ``nA nB / (nA + nB) (mean_A - mean_B)**2``.

    Pair costs are updated with the Lance-Williams recurrence. Ties go to the
    pair with the lowest (left id, right id).
    """
    x = np.asarray(values, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("empty dataset")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite observation")

    size = {i: 1 for i in range(n)}
    # cost[(i, j)] with i < j, keyed by cluster id
    diff = x[:, None] - x[None, :]
    cost = {(i, j): 0.5 * diff[i, j] ** 2 for i in range(n) for j in range(i + 1, n)}
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        best_key, best_cost = None, np.inf
        for key, c in cost.items():
            if c < best_cost or (c == best_cost and key < best_key):
                best_key, best_cost = key, c
        i, j = best_key
        new = n + step
        ni, nj = size[i], size[j]
        active.remove(i)
        active.remove(j)
        for k in active:
            nk = size[k]
            d_ik = cost.pop((min(i, k), max(i, k)))
            d_jk = cost.pop((min(j, k), max(j, k)))
            cost[(k, new)] = ((ni + nk) * d_ik + (nj + nk) * d_jk - nk * best_cost) / (ni + nj + nk)
        del cost[(i, j)]
        size[new] = ni + nj
        active.append(new)
        merges.append(Merge(i, j, float(best_cost), ni + nj))
    return Dendrogram(tuple(merges), n)


@dataclass(frozen=True)
class FlatClustering:
    clusters: list[list[int]]
    composition: Composition | None

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.clusters)


def cut(d: Dendrogram, k: int) -> FlatClustering:
    """Flat clustering with ``k`` clusters, obtained by undoing the last k-1 merges.

    Clusters are listed by smallest member. ``composition`` is set only when
    every cluster is a run of consecutive indices, which holds for sorted
    one-dimensional input in practice but is not guaranteed.
    """
    n = d.leaf_count
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    roots = set(range(n))
    for step, m in enumerate(d.merges[: n - k]):
        roots -= {m.left, m.right}
        roots.add(n + step)
    clusters = sorted((d.members(r) for r in roots), key=lambda c: c[0])
    contiguous = all(c[-1] - c[0] + 1 == len(c) for c in clusters)
    comp = Composition(tuple(len(c) for c in clusters)) if contiguous else None
    return FlatClustering(clusters, comp)


def within_ss(values, clusters) -> float:
    x = np.asarray(values, dtype=float)
    return float(sum(np.sum((x[c] - x[c].mean()) ** 2) for c in clusters))
