"""One-pass streaming recovery of k-median centers.

Points arrive one at a time. The stream keeps at most `k` candidate centers;
after warm-up, each arrival is added as a candidate and the closest pair of
candidates loses one endpoint. On instances that are center stable enough for
optimal clusters to be strictly separated, the surviving candidates hit every
optimal cluster, so assigning points to their nearest candidate recovers the
optimal partition.
"""

from __future__ import annotations

import typing
from dataclasses import dataclass, field

import numpy as np

from .config import TOLERANCE
from .exceptions import InvalidClustering, ParameterOutOfRange
from .metric import Clustering, MetricInstance, check_k
from .utils.logging import get_logger
from .utils.misc import kvformat

if typing.TYPE_CHECKING:
    from collections.abc import Callable, Mapping, Sequence

logger = get_logger(__name__)


class DistanceOracle(typing.Protocol):
    def distance(self, p: int, q: int) -> float: ...  # pragma: no cover


@dataclass(frozen=True)
class MatrixOracle:
    """Answer distance queries from an in-memory instance."""

    instance: MetricInstance

    def distance(self, p: int, q: int) -> float:
        return self.instance.distance(p, q)


@dataclass
class CountingOracle:
    """Wrap another oracle and record every pair it is asked about."""

    inner: DistanceOracle
    calls: int = 0
    pairs: set[tuple[int, int]] = field(default_factory=set)

    def distance(self, p: int, q: int) -> float:
        self.calls += 1
        self.pairs.add((min(p, q), max(p, q)))
        return self.inner.distance(p, q)


@dataclass(frozen=True)
class StreamState:
    k: int
    candidates: tuple[tuple[int, int], ...] = ()
    """Retained `(arrival, point)` pairs, in arrival order."""

    cached_pairwise: Mapping[tuple[int, int], float] = field(default_factory=dict)
    """Distances between retained candidates, keyed by ascending arrival pairs."""

    points_seen: int = 0
    last_arrival: int = -1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ParameterOutOfRange(f"k must be at least 1, got {self.k}.")
        assert len(self.candidates) == min(self.k, self.points_seen)

    @property
    def points(self) -> tuple[int, ...]:
        return tuple(point for _, point in self.candidates)


@dataclass(frozen=True)
class StepRecord:
    """What one stream step did; handed to the `stream_kmedian` observer."""

    arrival: int
    point: int
    evicted: int | None
    """The evicted point, `None` during warm-up."""

    partner: int | None
    """The other endpoint of the closest candidate pair, which stays."""

    distance: float | None
    retained: tuple[int, ...]
    peak: int
    """Candidates held at once during the step, before eviction."""


def _step(
    state: StreamState, new_point: int, oracle: DistanceOracle, arrival: int | None
) -> tuple[StreamState, StepRecord]:
    arrival = state.last_arrival + 1 if arrival is None else arrival
    if arrival <= state.last_arrival:
        raise ParameterOutOfRange(
            f"Arrival index {arrival} was already used; arrivals must increase."
        )

    cached = dict(state.cached_pairwise)
    for old_arrival, old_point in state.candidates:
        cached[(old_arrival, arrival)] = oracle.distance(old_point, new_point)
    candidates = (*state.candidates, (arrival, new_point))
    peak = len(candidates)

    evicted = partner = None
    distance = None
    if len(candidates) > state.k:
        closest = min(cached.values())
        pair = min(key for key, value in cached.items() if value <= closest + TOLERANCE)
        distance = cached[pair]
        keep, drop = pair
        points = dict(candidates)
        evicted, partner = points[drop], points[keep]
        candidates = tuple(item for item in candidates if item[0] != drop)
        cached = {key: value for key, value in cached.items() if drop not in key}
        logger.trace(
            "stream_evict "
            + kvformat(arrival=arrival, evicted=evicted, partner=partner, d=distance)
        )

    new_state = StreamState(
        k=state.k,
        candidates=candidates,
        cached_pairwise=cached,
        points_seen=state.points_seen + 1,
        last_arrival=arrival,
    )
    record = StepRecord(
        arrival=arrival,
        point=new_point,
        evicted=evicted,
        partner=partner,
        distance=distance,
        retained=new_state.points,
        peak=peak,
    )
    return new_state, record


def stream_step(
    state: StreamState,
    new_point: int,
    oracle: DistanceOracle,
    *,
    arrival: int | None = None,
) -> StreamState:
    """Feed one point into the stream.

    The oracle is asked only for distances between the new point and the
    retained candidates. During warm-up (fewer than `k` points seen) the point
    is simply added. Afterwards the closest candidate pair is found, ties going
    to the lexicographically smallest pair of arrival indices, and the endpoint
    that arrived later is evicted.

    Raises:
        ParameterOutOfRange: If `arrival` does not exceed every earlier arrival.

    """
    new_state, _ = _step(state, new_point, oracle, arrival)
    return new_state


def stream_kmedian(
    instance: MetricInstance,
    order: Sequence[int],
    k: int,
    *,
    oracle: DistanceOracle | None = None,
    observer: Callable[[StepRecord], None] | None = None,
) -> tuple[int, ...]:
    """Replay `order` through the stream and return the surviving centers, ascending.

    `oracle` defaults to reading `instance`; pass a `CountingOracle` to audit
    the distance evaluations. `observer` sees a `StepRecord` after every step.

    Raises:
        ParameterOutOfRange: If `k` is not in `[1, n]` or `order` is not a
            permutation of the points.

    """
    check_k(instance.n, k)
    if sorted(order) != list(range(instance.n)):
        raise ParameterOutOfRange(
            f"The stream order must be a permutation of 0..{instance.n - 1}."
        )
    oracle = oracle or MatrixOracle(instance)
    state = StreamState(k=k)
    for point in order:
        state, record = _step(state, int(point), oracle, None)
        if observer is not None:
            observer(record)
    centers = tuple(sorted(state.points))
    logger.debug(f"stream_kmedian {kvformat(n=instance.n, k=k, centers=centers)}")
    return centers


def induce_partition(instance: MetricInstance, centers: Sequence[int]) -> Clustering:
    """Assign every point to its nearest center; ties go to the earliest center.

    Raises:
        InvalidClustering: If `centers` contains duplicates or is empty.
        ParameterOutOfRange: If a center is not a point of the instance.

    """
    centers = tuple(int(c) for c in centers)
    if not centers or len(set(centers)) != len(centers):
        raise InvalidClustering(
            f"Centers must be distinct and nonempty, got {centers}."
        )
    if any(not 0 <= c < instance.n for c in centers):
        raise ParameterOutOfRange(
            f"Centers must lie in [0, {instance.n}), got {centers}."
        )
    labels = np.argmin(instance.dist[:, list(centers)], axis=1)
    labels[list(centers)] = np.arange(len(centers))
    return Clustering(tuple(int(label) for label in labels), len(centers), centers)
