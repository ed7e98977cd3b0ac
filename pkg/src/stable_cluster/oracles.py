"""Brute-force exact solvers used as ground truth.

Every oracle enumerates candidates in lexicographic order and breaks ties
towards the lexicographically smallest candidate, so results are replayable.
Candidate counts are checked against a `Budget` and `BudgetExceeded` is raised
instead of truncating the search.
"""

from __future__ import annotations

import itertools
import math
import typing
from dataclasses import dataclass

import numpy as np

from .config import TOLERANCE, Budget, budget_from_env
from .exceptions import BudgetExceeded, InvalidGraph, ParameterOutOfRange
from .metric import (
    Clustering,
    Cost,
    Objective,
    check_k,
    kmedian_cost,
    minsum_cost,
)
from .utils.logging import get_logger
from .utils.misc import kvformat, stirling2

if typing.TYPE_CHECKING:
    from collections.abc import Iterable, Iterator

    from numpy.typing import NDArray

    from .metric import MetricInstance

logger = get_logger(__name__)

_CHUNK = 4096


@dataclass(frozen=True)
class Graph:
    """An undirected simple graph on vertices `0..n-1`."""

    n: int
    edges: frozenset[tuple[int, int]]
    """Unordered edges, each stored as `(u, v)` with `u < v`."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]) -> None:
        if n < 0:
            raise InvalidGraph(f"Vertex count must be nonnegative, got {n}.")
        normalized: list[tuple[int, int]] = []
        for u, v in edges:
            if u == v:
                raise InvalidGraph(f"Self-loop at vertex {u}.")
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidGraph(f"Edge ({u}, {v}) leaves the vertex range [0, {n}).")
            normalized.append((min(u, v), max(u, v)))
        edge_set = frozenset(normalized)
        if len(edge_set) != len(normalized):
            raise InvalidGraph("Duplicate edges are not allowed.")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", edge_set)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def neighbors(self, v: int) -> tuple[int, ...]:
        return tuple(
            sorted(b if a == v else a for a, b in self.edges if v in (a, b))
        )

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    @property
    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(self.n)), default=0)

    def closed_neighborhood_masks(self) -> list[int]:
        masks = [1 << v for v in range(self.n)]
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return masks


@dataclass(frozen=True)
class OptimumResult:
    cost: Cost
    clustering: Clustering
    """The lexicographically first optimal clustering."""

    unique_partition: bool
    all_optimal_count: int
    """Number of distinct optimal partitions."""


@dataclass(frozen=True)
class DominatingSet:
    size: int
    vertices: tuple[int, ...]


@dataclass(frozen=True)
class PromiseCheck:
    """Outcome of checking that every dominating set of size at most `d` is perfect."""

    holds: bool
    witness: tuple[int, ...] | None
    """The first imperfect dominating set found, if any."""

    dominating_sets: int
    """Number of dominating sets of size at most `d`."""


@dataclass(frozen=True)
class TrianglePartition:
    feasible: bool
    witness: tuple[tuple[int, int, int], ...] | None


def _combinations(n: int, k: int) -> Iterator[NDArray[np.intp]]:
    combos = itertools.combinations(range(n), k)
    while True:
        chunk = list(itertools.islice(combos, _CHUNK))
        if not chunk:
            return
        yield np.asarray(chunk, dtype=np.intp)


def _tied_assignments(
    dist: NDArray[np.float64], centers: tuple[int, ...]
) -> Iterator[tuple[int, ...]]:
    """Yield every nearest-center assignment of `centers`, ties included."""
    sub = dist[:, list(centers)]
    nearest = sub.min(axis=1)
    options: list[tuple[int, ...]] = []
    for point, row in enumerate(sub):
        if point in centers:
            options.append((centers.index(point),))
        else:
            options.append(tuple(np.flatnonzero(row <= nearest[point] + TOLERANCE)))
    for combo in itertools.product(*options):
        yield tuple(int(label) for label in combo)


def brute_force_kmedian(
    instance: MetricInstance, k: int, *, budget: Budget | None = None
) -> OptimumResult:
    """Solve k-median exactly by scanning every set of `k` centers.

    Each point goes to its nearest center, ties to the lowest center index.
    Uniqueness is judged on partitions: two center sets inducing the same
    partition count once, and a point equidistant from two centers yields an
    extra optimal partition.

    Raises:
        ParameterOutOfRange: If `k` is not in `[1, n]`.
        BudgetExceeded: If `C(n, k)` exceeds the k-median budget.

    """
    budget = budget or budget_from_env()
    n = instance.n
    check_k(n, k)
    required = math.comb(n, k)
    logger.trace(f"budget_check {kvformat(oracle='kmedian', required=required)}")
    if required > budget.kmedian_subsets:
        raise BudgetExceeded(
            "brute_force_kmedian", required=required, budget=budget.kmedian_subsets
        )

    dist = instance.dist
    best = math.inf
    optimal: list[tuple[float, tuple[int, ...]]] = []
    for combos in _combinations(n, k):
        costs = dist[:, combos].min(axis=2).sum(axis=0)
        chunk_best = float(costs.min())
        if chunk_best < best - TOLERANCE:
            best = chunk_best
        elif chunk_best > best + TOLERANCE:
            continue
        optimal = [item for item in optimal if item[0] <= best + TOLERANCE]
        optimal.extend(
            (float(costs[i]), tuple(int(c) for c in combos[i]))
            for i in np.flatnonzero(costs <= best + TOLERANCE)
        )

    partitions: set[tuple[int, ...]] = set()
    alternatives = 0
    for _, centers in optimal:
        for assignment in _tied_assignments(dist, centers):
            alternatives += 1
            if alternatives > budget.kmedian_subsets:
                raise BudgetExceeded(
                    "brute_force_kmedian tie expansion",
                    required=alternatives,
                    budget=budget.kmedian_subsets,
                )
            partitions.add(Clustering(assignment, k).partition)

    centers = optimal[0][1]
    labels = np.argmin(dist[:, list(centers)], axis=1)
    labels[list(centers)] = np.arange(k)
    clustering = Clustering(tuple(int(label) for label in labels), k, centers)
    cost = kmedian_cost(instance, clustering)
    logger.debug(
        "brute_force_kmedian "
        + kvformat(n=n, k=k, cost=cost.value, optimal_partitions=len(partitions))
    )
    return OptimumResult(cost, clustering, len(partitions) == 1, len(partitions))


def brute_force_minsum(
    instance: MetricInstance, k: int, *, budget: Budget | None = None
) -> OptimumResult:
    """Solve min-sum exactly by enumerating restricted-growth strings.

    Partitions into exactly `k` nonempty blocks are visited in lexicographic
    order of their restricted-growth strings, with branch-and-bound pruning on
    the partial cost (which never decreases). Ties within `TOLERANCE` are kept,
    so the optimal partition count is exact.

    Raises:
        ParameterOutOfRange: If `k` is not in `[1, n]`.
        BudgetExceeded: If the Stirling number `S(n, k)` exceeds the budget.

    """
    budget = budget or budget_from_env()
    n = instance.n
    check_k(n, k)
    required = stirling2(n, k)
    logger.trace(f"budget_check {kvformat(oracle='minsum', required=required)}")
    if required > budget.minsum_partitions:
        raise BudgetExceeded(
            "brute_force_minsum", required=required, budget=budget.minsum_partitions
        )

    dist = instance.dist.tolist()
    labels = [0] * n
    members: list[list[int]] = [[] for _ in range(k)]
    best = math.inf
    optimal: list[tuple[float, tuple[int, ...]]] = []

    def visit(point: int, used: int, cost: float) -> None:
        nonlocal best
        if cost > best + TOLERANCE or k - used > n - point:
            return
        if point == n:
            if cost < best - TOLERANCE:
                best = cost
            optimal.append((cost, tuple(labels)))
            return
        row = dist[point]
        for block in range(min(used + 1, k)):
            added = 2.0 * sum(row[other] for other in members[block])
            members[block].append(point)
            labels[point] = block
            visit(point + 1, max(used, block + 1), cost + added)
            members[block].pop()

    visit(0, 0, 0.0)
    winners = [item[1] for item in optimal if item[0] <= best + TOLERANCE]
    clustering = Clustering(winners[0], k)
    cost = minsum_cost(instance, clustering)
    logger.debug(
        "brute_force_minsum "
        + kvformat(n=n, k=k, cost=cost.value, optimal_partitions=len(winners))
    )
    return OptimumResult(cost, clustering, len(winners) == 1, len(winners))


def solve_exact(
    instance: MetricInstance,
    k: int,
    objective: Objective,
    *,
    budget: Budget | None = None,
) -> OptimumResult:
    if objective is Objective.KMEDIAN:
        return brute_force_kmedian(instance, k, budget=budget)
    return brute_force_minsum(instance, k, budget=budget)


def _dominating_subsets(
    graph: Graph,
    max_size: int,
    *,
    min_size: int,
    must_include: int,
    budget: int,
) -> Iterator[tuple[int, ...]]:
    masks = graph.closed_neighborhood_masks()
    full = (1 << graph.n) - 1
    scanned = 0
    for size in range(min_size, max_size + 1):
        for subset in itertools.combinations(range(graph.n), size):
            scanned += 1
            if scanned > budget:
                raise BudgetExceeded(
                    "dominating set enumeration", required=scanned, budget=budget
                )
            chosen = 0
            covered = 0
            for v in subset:
                chosen |= 1 << v
                covered |= masks[v]
            if chosen & must_include == must_include and covered == full:
                yield subset


def min_dominating_set(
    graph: Graph,
    max_size: int,
    *,
    must_include: Iterable[int] = (),
    budget: Budget | None = None,
) -> DominatingSet | None:
    """Return the smallest dominating set of size at most `max_size`, or `None`.

    Among minimum-size sets the lexicographically smallest is returned. If
    `must_include` is given, only sets containing those vertices are considered.

    Raises:
        ParameterOutOfRange: If `max_size` is not in `[0, n]`.
        BudgetExceeded: If more subsets than the dominating set budget are scanned.

    """
    budget = budget or budget_from_env()
    if not 0 <= max_size <= graph.n:
        raise ParameterOutOfRange(
            f"max_size must lie in [0, {graph.n}], got {max_size}."
        )
    required = sorted(set(must_include))
    if any(not 0 <= v < graph.n for v in required):
        raise InvalidGraph(f"Required vertices {required} leave the vertex range.")
    mask = sum(1 << v for v in required)
    witness = next(
        _dominating_subsets(
            graph,
            max_size,
            min_size=len(required),
            must_include=mask,
            budget=budget.dominating_subsets,
        ),
        None,
    )
    logger.debug(f"min_dominating_set {kvformat(n=graph.n, witness=witness)}")
    if witness is None:
        return None
    return DominatingSet(len(witness), witness)


def is_perfect_dominating(graph: Graph, dominating: Iterable[int]) -> bool:
    """Return whether every vertex outside the set has exactly one neighbor in it."""
    members = set(dominating)
    if any(not 0 <= v < graph.n for v in members):
        raise InvalidGraph(f"Vertices {sorted(members)} leave the vertex range.")
    return all(
        sum(1 for u in graph.neighbors(v) if u in members) == 1
        for v in range(graph.n)
        if v not in members
    )


def verify_pdspp_promise(
    graph: Graph, d: int, *, budget: Budget | None = None
) -> PromiseCheck:
    """Check that every dominating set of size at most `d` is perfect."""
    budget = budget or budget_from_env()
    if not 0 <= d <= graph.n:
        raise ParameterOutOfRange(f"d must lie in [0, {graph.n}], got {d}.")
    count = 0
    for subset in _dominating_subsets(
        graph, d, min_size=0, must_include=0, budget=budget.dominating_subsets
    ):
        count += 1
        if not is_perfect_dominating(graph, subset):
            logger.debug(f"pdspp_promise {kvformat(holds=False, witness=subset)}")
            return PromiseCheck(holds=False, witness=subset, dominating_sets=count)
    logger.debug(f"pdspp_promise {kvformat(holds=True, dominating_sets=count)}")
    return PromiseCheck(holds=True, witness=None, dominating_sets=count)


def triangle_partition_decide(graph: Graph) -> TrianglePartition:
    """Decide whether the vertices split into triples that each induce a triangle.

    The search always extends the smallest uncovered vertex, so the first
    witness found is the lexicographically smallest one.

    Raises:
        ParameterOutOfRange: If the vertex count is not a positive multiple of 3.

    """
    if graph.n == 0 or graph.n % 3:
        raise ParameterOutOfRange(
            f"Triangle partition needs n = 3k with k >= 1, got n={graph.n}."
        )
    if graph.max_degree > 4:
        logger.warning(
            "triangle_partition_decide "
            + kvformat(max_degree=graph.max_degree, hardness_regime="degree<=4")
        )

    neighbors = [graph.neighbors(v) for v in range(graph.n)]
    covered = [False] * graph.n
    triples: list[tuple[int, int, int]] = []

    def search() -> bool:
        try:
            u = covered.index(False)
        except ValueError:
            return True
        free = [v for v in neighbors[u] if v > u and not covered[v]]
        for v, w in itertools.combinations(free, 2):
            if not graph.has_edge(v, w):
                continue
            for x in (u, v, w):
                covered[x] = True
            triples.append((u, v, w))
            if search():
                return True
            triples.pop()
            for x in (u, v, w):
                covered[x] = False
        return False

    if search():
        return TrianglePartition(feasible=True, witness=tuple(triples))
    return TrianglePartition(feasible=False, witness=None)
