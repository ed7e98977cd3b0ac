"""Average linkage agglomeration and optimal pruning of the merge tree.

When no subset of an optimal min-sum cluster prefers a rival cluster, the
optimal clusters are nodes of the average linkage tree, and the best pruning
of the tree into `k` nodes is the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import TOLERANCE
from .exceptions import InvalidClustering
from .metric import (
    Clustering,
    Cost,
    MetricInstance,
    Objective,
    check_k,
    objective_cost,
    with_medoids,
)
from .utils.logging import get_logger
from .utils.misc import kvformat

logger = get_logger(__name__)


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    """Average linkage value `d(A, B) / (|A| |B|)` at the time of the merge."""


@dataclass(frozen=True)
class MergeTree:
    """A binary merge history over `n` leaves.

    Leaves are nodes `0..n-1`; the `i`-th merge creates node `n + i`, so the
    root is node `2n - 2`.
    """

    n: int
    merges: tuple[Merge, ...]

    def __post_init__(self) -> None:
        if len(self.merges) != max(self.n - 1, 0):
            raise InvalidClustering(
                f"A tree over {self.n} leaves needs {self.n - 1} merges, "
                f"got {len(self.merges)}."
            )
        used: set[int] = set()
        for index, merge in enumerate(self.merges):
            node = self.n + index
            for child in (merge.left, merge.right):
                if not 0 <= child < node or child in used:
                    raise InvalidClustering(
                        f"Merge {index} uses node {child}, which is not an "
                        "available earlier node."
                    )
                used.add(child)

    @property
    def root(self) -> int:
        return 2 * self.n - 2

    def children(self, node: int) -> tuple[int, int] | None:
        if node < self.n:
            return None
        merge = self.merges[node - self.n]
        return merge.left, merge.right

    def members(self, node: int) -> tuple[int, ...]:
        stack = [node]
        points: list[int] = []
        while stack:
            current = stack.pop()
            pair = self.children(current)
            if pair is None:
                points.append(current)
            else:
                stack.extend(pair)
        return tuple(sorted(points))


def average_linkage_tree(instance: MetricInstance) -> MergeTree:
    """Merge the closest pair of clusters until a single cluster remains.

    Closeness is the average distance `d(A, B) / (|A| |B|)`. Ties within
    `TOLERANCE` go to the pair whose smallest points are lexicographically
    smallest; the cluster holding the smaller point becomes the left child.
    """
    n = instance.n
    total = 2 * n - 1
    sums = np.zeros((total, total))
    sums[:n, :n] = instance.dist
    sizes = np.zeros(total)
    sizes[:n] = 1.0
    lowest = list(range(n)) + [0] * (n - 1)
    active = list(range(n))
    merges: list[Merge] = []

    for node in range(n, total):
        ids = np.asarray(active)
        with np.errstate(divide="ignore", invalid="ignore"):
            linkage = sums[np.ix_(ids, ids)] / np.outer(sizes[ids], sizes[ids])
        linkage[np.tril_indices(len(ids))] = math.inf
        best = float(linkage.min())
        rows, cols = np.nonzero(linkage <= best + TOLERANCE)
        a, b = min(
            ((int(ids[r]), int(ids[c])) for r, c in zip(rows, cols)),
            key=lambda pair: sorted((lowest[pair[0]], lowest[pair[1]])),
        )
        left, right = (a, b) if lowest[a] < lowest[b] else (b, a)
        height = float(linkage[active.index(a), active.index(b)])
        merges.append(Merge(left, right, height))

        sums[node, :] = sums[left, :] + sums[right, :]
        sums[:, node] = sums[:, left] + sums[:, right]
        sums[node, node] = 0.0
        sizes[node] = sizes[left] + sizes[right]
        lowest[node] = lowest[left]
        active = [i for i in active if i not in (left, right)] + [node]
        logger.trace(
            f"linkage_merge {kvformat(node=node, left=left, right=right, h=height)}"
        )

    logger.debug(f"average_linkage_tree {kvformat(n=n, merges=len(merges))}")
    return MergeTree(n, tuple(merges))


def _single_cluster_cost(
    instance: MetricInstance, points: tuple[int, ...], objective: Objective
) -> float:
    block = instance.dist[np.ix_(points, points)]
    if objective is Objective.MINSUM:
        return float(block.sum())
    return float(block.sum(axis=1).min())


def best_k_pruning(
    tree: MergeTree,
    instance: MetricInstance,
    k: int,
    *,
    objective: Objective = Objective.MINSUM,
) -> tuple[Clustering, Cost]:
    """Return the cheapest clustering into `k` tree nodes and its cost.

    A dynamic program over the tree: one cluster per node costs the node's
    objective value (the medoid cost for k-median), `j` clusters split between
    the two children in the cheapest way. Ties keep the split that gives the
    left child fewer clusters. k-median results carry medoid centers.

    Raises:
        ParameterOutOfRange: If `k` is not in `[1, n]`.
        InvalidClustering: If the tree and the instance differ in size.

    """
    if tree.n != instance.n:
        raise InvalidClustering(
            f"The tree covers {tree.n} points, the instance has {instance.n}."
        )
    check_k(instance.n, k)

    table: list[dict[int, tuple[float, tuple[tuple[int, ...], ...]]]] = []
    counts: list[int] = []
    for node in range(2 * tree.n - 1):
        members = tree.members(node)
        counts.append(len(members))
        options = {1: (_single_cluster_cost(instance, members, objective), (members,))}
        pair = tree.children(node)
        if pair is not None:
            left, right = pair
            for j in range(2, min(k, len(members)) + 1):
                best: tuple[float, tuple[tuple[int, ...], ...]] | None = None
                lo, hi = max(1, j - counts[right]), min(j - 1, counts[left])
                for j_left in range(lo, hi + 1):
                    cost_left, blocks_left = table[left][j_left]
                    cost_right, blocks_right = table[right][j - j_left]
                    cost = cost_left + cost_right
                    if best is None or cost < best[0] - TOLERANCE:
                        best = (cost, blocks_left + blocks_right)
                assert best is not None
                options[j] = best
        table.append(options)

    _, blocks = table[tree.root][k]
    clustering = Clustering.from_blocks(blocks).canonical()
    if objective is Objective.KMEDIAN:
        clustering = with_medoids(instance, clustering)
    cost = objective_cost(instance, clustering, objective)
    logger.debug(
        f"best_k_pruning {kvformat(k=k, objective=objective.value, cost=cost.value)}"
    )
    return clustering, cost
