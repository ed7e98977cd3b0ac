"""Certified benchmark generators.

Three hardness constructions turn combinatorial instances into clustering
instances whose optimal cost is known in closed form for YES instances:

* dominating set → k-median on a `{1/2, 1}` metric,
* triangle partition → min-sum on the same metric,
* perfect 3D matching → a dominating set instance whose small dominating sets
  are all perfect.

`planted_stable_instance()` produces well separated line instances whose
stability is certified by the exact oracles whenever they are small enough.
"""

from __future__ import annotations

import enum
import itertools
import math
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import Budget, budget_from_env
from .exceptions import (
    BudgetExceeded,
    CertificationFailed,
    InvalidGraph,
    ParameterOutOfRange,
)
from .metric import Clustering, MetricInstance, Objective, partition_key, with_medoids
from .oracles import Graph, verify_pdspp_promise
from .stability import StabilityReport, stability_profile
from .utils.logging import get_logger
from .utils.misc import kvformat

if typing.TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

logger = get_logger(__name__)

CERTIFY_MAX_POINTS = 20
"""Planted instances up to this size are certified by the exact oracles."""

HARDNESS_STABILITY_FLOOR = 2.0
HARDNESS_BETA_FLOOR = 0.5


class SourceKind(str, enum.Enum):
    DOMSET = "domset"
    TRIANGLE_PARTITION = "triangle_partition"
    THREE_DM = "3dm"


@dataclass(frozen=True)
class ReductionCertificate:
    """What a construction guarantees about the instance it produced."""

    source_kind: SourceKind
    n: int
    """Number of points (or vertices) of the produced instance."""

    k: int | None = None
    d: int | None = None
    """Dominating set size bound."""

    m: int | None = None
    """Ground set size of the 3DM source."""

    expected_cost: float | None = None
    """Optimal cost if the source is a YES instance."""

    stability_floor: float | None = None
    """Multiplicative stability guaranteed for YES instances; `None` if none."""

    beta_floor: float | None = None
    """Additive stability guaranteed for YES instances; `None` if none."""

    promise_verified: bool | None = None
    """Whether every dominating set of size at most `d` was checked to be perfect."""


@dataclass(frozen=True)
class ThreeDMInstance:
    """Triples `(x, y, z)` over three ground sets of `m` elements each."""

    m: int
    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        triples = tuple((int(x), int(y), int(z)) for x, y, z in self.triples)
        object.__setattr__(self, "triples", triples)
        if self.m < 1:
            raise InvalidGraph(f"m must be at least 1, got {self.m}.")
        if not triples:
            raise InvalidGraph("A 3DM instance needs at least one triple.")
        if len(set(triples)) != len(triples):
            raise InvalidGraph("Duplicate triples are not allowed.")
        for triple in triples:
            if any(not 0 <= value < self.m for value in triple):
                raise InvalidGraph(f"Triple {triple} leaves the range [0, {self.m}).")

    @property
    def size(self) -> int:
        return len(self.triples)


@dataclass(frozen=True)
class PlantedInstance:
    instance: MetricInstance
    ground_truth: Clustering
    """The planted clustering, with medoid centers."""

    certified: bool
    """Whether the exact oracles confirmed the planted clustering and its stability."""

    attempts: int
    report: StabilityReport | None = None


def graph_to_halves_metric(graph: Graph) -> MetricInstance:
    """Put adjacent vertices at distance 1/2 and every other pair at distance 1.

    Any two nonzero distances sum to at least 1, so the result is always a metric.
    """
    if graph.n == 0:
        raise InvalidGraph("The graph needs at least one vertex.")
    dist = np.ones((graph.n, graph.n))
    np.fill_diagonal(dist, 0.0)
    for u, v in graph.edges:
        dist[u, v] = dist[v, u] = 0.5
    return MetricInstance(dist, metric_checked=True)


def threedm_to_pdspp(
    instance: ThreeDMInstance,
) -> tuple[Graph, int, ReductionCertificate]:
    """Build the dominating set instance of a 3DM instance.

    Vertices are laid out as `X = [0, m)`, `Y = [m, 2m)`, `Z = [2m, 3m)`, one
    vertex per triple in `[3m, 3m + L)`, and the hub `v = 3m + L`. Each triple
    vertex is joined to its three elements and to the hub. A perfect matching
    exists iff some dominating set of size `d = m + 1` contains the hub.

    Raises:
        ParameterOutOfRange: If `m = 1`, where a single triple vertex already
            dominates the whole graph.

    """
    m = instance.m
    if m == 1:
        raise ParameterOutOfRange(
            "m=1 is rejected: one triple vertex dominates the graph with a set "
            "smaller than d, so the hub is no longer forced into the solution."
        )
    hub = 3 * m + instance.size
    edges: list[tuple[int, int]] = []
    for index, (x, y, z) in enumerate(instance.triples):
        vertex = 3 * m + index
        edges.extend([(x, vertex), (m + y, vertex), (2 * m + z, vertex), (vertex, hub)])
    graph = Graph(hub + 1, edges)
    certificate = ReductionCertificate(
        source_kind=SourceKind.THREE_DM, n=graph.n, d=m + 1, m=m
    )
    logger.debug(f"threedm_to_pdspp {kvformat(m=m, L=instance.size, n=graph.n)}")
    return graph, m + 1, certificate


def perfect_matching_3dm(
    instance: ThreeDMInstance, *, budget: Budget | None = None
) -> tuple[int, ...] | None:
    """Return the lexicographically smallest set of `m` disjoint triples, or `None`.

    The result lists triple indices in ascending order.

    Raises:
        BudgetExceeded: If `C(L, m)` exceeds the dominating set budget.

    """
    budget = budget or budget_from_env()
    m = instance.m
    required = math.comb(instance.size, m)
    if required > budget.dominating_subsets:
        raise BudgetExceeded(
            "perfect_matching_3dm", required=required, budget=budget.dominating_subsets
        )
    for chosen in itertools.combinations(range(instance.size), m):
        triples = [instance.triples[i] for i in chosen]
        if all(len({t[axis] for t in triples}) == m for axis in range(3)):
            return chosen
    return None


def make_kmedian_hardness_instance(
    graph: Graph,
    d: int,
    *,
    check_promise: bool = False,
    budget: Budget | None = None,
) -> tuple[MetricInstance, int, ReductionCertificate]:
    """Reduce a dominating set instance to k-median with `k = d`.

    A dominating set of size `d` exists iff the optimal cost is `(n - d) / 2`.
    When every dominating set of size at most `d` is perfect, the instance is
    2-center stable; `check_promise` verifies that exhaustively.

    Raises:
        InvalidGraph: If the graph is empty.
        ParameterOutOfRange: If `d` is not in `[1, n]`.

    """
    if graph.n == 0:
        raise InvalidGraph("The graph needs at least one vertex.")
    if not 1 <= d <= graph.n:
        raise ParameterOutOfRange(f"d must lie in [1, {graph.n}], got {d}.")
    instance = graph_to_halves_metric(graph)
    promise = None
    if check_promise:
        promise = verify_pdspp_promise(graph, d, budget=budget).holds
    certificate = ReductionCertificate(
        source_kind=SourceKind.DOMSET,
        n=graph.n,
        k=d,
        d=d,
        expected_cost=(graph.n - d) / 2,
        stability_floor=HARDNESS_STABILITY_FLOOR,
        beta_floor=HARDNESS_BETA_FLOOR,
        promise_verified=promise,
    )
    logger.debug(
        "make_kmedian_hardness_instance "
        + kvformat(n=graph.n, k=d, expected_cost=certificate.expected_cost)
    )
    return instance, d, certificate


def make_minsum_hardness_instance(
    graph: Graph,
) -> tuple[MetricInstance, int, ReductionCertificate]:
    """Reduce triangle partition to min-sum with `k = n / 3`.

    The vertices split into triangles iff the optimal cost is exactly `n`. The
    stability floors are only certified for graphs of maximum degree at most 4;
    above that the certificate carries none and a warning is logged.

    Raises:
        ParameterOutOfRange: If `n` is not a positive multiple of 3.

    """
    if graph.n == 0 or graph.n % 3:
        raise ParameterOutOfRange(
            f"Triangle partition needs n = 3k with k >= 1, got n={graph.n}."
        )
    bounded = graph.max_degree <= 4
    if not bounded:
        logger.warning(
            "make_minsum_hardness_instance "
            + kvformat(max_degree=graph.max_degree, stability_floor=None)
        )
    certificate = ReductionCertificate(
        source_kind=SourceKind.TRIANGLE_PARTITION,
        n=graph.n,
        k=graph.n // 3,
        expected_cost=float(graph.n),
        stability_floor=HARDNESS_STABILITY_FLOOR if bounded else None,
        beta_floor=HARDNESS_BETA_FLOOR if bounded else None,
    )
    return graph_to_halves_metric(graph), graph.n // 3, certificate


def _draw_planted(
    rng: np.random.Generator,
    sizes: Sequence[int],
    gap: float,
    *,
    unit_range: bool,
) -> tuple[MetricInstance, tuple[int, ...]]:
    positions = np.concatenate(
        [
            rng.uniform(i * gap - 0.5, i * gap + 0.5, size)
            for i, size in enumerate(sizes)
        ]
    )
    labels = np.repeat(np.arange(len(sizes)), sizes)
    order = rng.permutation(len(positions))
    positions, labels = positions[order], labels[order]
    dist = np.abs(positions[:, None] - positions[None, :])
    if unit_range and dist.max() > 0.0:
        dist /= dist.max()
    return MetricInstance(dist), partition_key(labels.tolist())


def planted_stable_instance(
    k: int,
    sizes: Sequence[int],
    target_alpha: float,
    seed: int,
    *,
    unit_range: bool = True,
    certify: bool | None = None,
    max_attempts: int = 25,
    budget: Budget | None = None,
) -> PlantedInstance:
    """Plant `k` clusters on a line, far enough apart to be `target_alpha` stable.

    Cluster `i` is drawn uniformly on a unit segment centred at `i * G` with
    `G = 4 * target_alpha * max(sizes) * k`; point indices are then shuffled.
    Distances are coordinate differences, rescaled to a maximum of 1 when
    `unit_range` is set.

    With `certify` (the default up to `CERTIFY_MAX_POINTS` points) the exact
    k-median oracle must find the planted partition as the unique optimum with
    `alpha_center >= target_alpha`; failing draws are redrawn. Larger instances
    are returned uncertified.

    Raises:
        ParameterOutOfRange: If `target_alpha <= 1`, `len(sizes) != k` or a
            size is below 1.
        CertificationFailed: If no draw could be certified in `max_attempts`.

    """
    if not 1.0 < target_alpha < math.inf:
        raise ParameterOutOfRange(f"target_alpha must exceed 1, got {target_alpha}.")
    if k < 1 or len(sizes) != k or any(size < 1 for size in sizes):
        raise ParameterOutOfRange(
            f"Expected k={k} >= 1 cluster sizes, each at least 1, got {list(sizes)}."
        )
    n = sum(sizes)
    if certify is None:
        certify = n <= CERTIFY_MAX_POINTS
    gap = 4.0 * target_alpha * max(sizes) * k
    rng = np.random.default_rng(seed)

    for attempt in range(1, max_attempts + 1):
        instance, labels = _draw_planted(rng, sizes, gap, unit_range=unit_range)
        truth = with_medoids(instance, Clustering(labels, k))
        if not certify:
            logger.debug(f"planted_stable_instance {kvformat(n=n, certified=False)}")
            return PlantedInstance(instance, truth, certified=False, attempts=attempt)
        report = stability_profile(instance, k, Objective.KMEDIAN, budget=budget)
        if (
            report.unique_partition
            and report.clustering.same_partition(truth)
            and report.alpha_center >= target_alpha
        ):
            logger.debug(
                "planted_stable_instance "
                + kvformat(n=n, alpha_center=report.alpha_center, attempts=attempt)
            )
            return PlantedInstance(
                instance, truth, certified=True, attempts=attempt, report=report
            )
        logger.trace(f"planted_rejected {kvformat(attempt=attempt, seed=seed)}")

    raise CertificationFailed(
        f"No planted draw with seed {seed} was certified in {max_attempts} attempts."
    )


def _planted_job(
    args: tuple[int, tuple[int, ...], float, int, bool, bool | None],
) -> PlantedInstance:
    k, sizes, alpha, seed, unit_range, certify = args
    return planted_stable_instance(
        k, sizes, alpha, seed, unit_range=unit_range, certify=certify
    )


def planted_batch(
    k: int,
    sizes: Sequence[int],
    target_alpha: float,
    seeds: Iterable[int],
    *,
    unit_range: bool = True,
    certify: bool | None = None,
    jobs: int = 1,
) -> list[PlantedInstance]:
    """Generate one planted instance per seed, optionally in worker processes.

    Results come back in seed order and match a sequential run.
    """
    if jobs < 1:
        raise ParameterOutOfRange(f"jobs must be at least 1, got {jobs}.")
    args = [
        (k, tuple(sizes), target_alpha, seed, unit_range, certify) for seed in seeds
    ]
    if jobs == 1:
        return [_planted_job(item) for item in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_planted_job, args))
