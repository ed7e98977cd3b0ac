"""Finite metric instances, clusterings and the two clustering objectives.

Distances live in a read-only `numpy` matrix. Everything else in the package
consumes the types defined here:

* `MetricInstance` wraps the symmetric distance matrix.
* `Clustering` is a k-partition of point indices, optionally with one center
  per cluster taken from the data.
* `kmedian_cost()` and `minsum_cost()` evaluate the objectives.
"""

from __future__ import annotations

import enum
import typing
from dataclasses import dataclass, field, replace

import numpy as np

from .config import TOLERANCE
from .exceptions import InvalidClustering, InvalidInstance, ParameterOutOfRange

if typing.TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from numpy.typing import ArrayLike, NDArray


class Objective(str, enum.Enum):
    KMEDIAN = "kmedian"
    MINSUM = "minsum"


@dataclass(frozen=True, eq=False)
class MetricInstance:
    """A finite point set `0..n-1` with a symmetric distance matrix.

    The constructor only checks that the matrix is square and non-empty, so that
    perturbed, possibly non-metric matrices can be represented too. Use
    `MetricInstance.from_rows()` or `validate_metric()` to check the rest.
    """

    dist: NDArray[np.float64]
    """The n×n distance matrix. Stored as a read-only copy."""

    metric_checked: bool = False
    """Whether the triangle inequality was validated for this matrix."""

    unit_range: bool = field(init=False)
    """Whether every distance is at most 1."""

    def __post_init__(self) -> None:
        try:
            dist = np.array(self.dist, dtype=np.float64)
        except ValueError:
            raise InvalidInstance("Distance matrix rows are ragged.") from None
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise InvalidInstance(
                f"Distance matrix must be square, got shape {dist.shape}."
            )
        if dist.shape[0] == 0:
            raise InvalidInstance("An instance needs at least one point.")
        dist.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "unit_range", bool(np.all(dist <= 1.0)))

    @classmethod
    def from_rows(
        cls,
        rows: ArrayLike,
        *,
        strict_positive: bool = True,
        require_triangle: bool = False,
    ) -> MetricInstance:
        """Build an instance and reject structural violations.

        Raises:
            InvalidInstance: If the matrix is ragged, not square, asymmetric, has a
                negative entry or a nonzero diagonal, has a zero off-diagonal
                entry while `strict_positive` is set, or violates the triangle
                inequality while `require_triangle` is set.

        """
        instance = cls(rows)  # type: ignore[arg-type]
        verdict = validate_metric(
            instance,
            require_triangle=require_triangle,
            strict_positive=strict_positive,
        )
        if not verdict.valid:
            first = verdict.violations[0]
            raise InvalidInstance(
                f"Invalid distance matrix: {len(verdict.violations)} violation(s), "
                f"first is {first.kind.value} at {first.indices}.",
                verdict,
            )
        return verdict.instance

    @property
    def n(self) -> int:
        return int(self.dist.shape[0])

    def distance(self, p: int, q: int) -> float:
        return float(self.dist[p, q])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetricInstance):
            return NotImplemented
        return bool(np.array_equal(self.dist, other.dist))

    def __hash__(self) -> int:
        return hash(self.dist.tobytes())


class ViolationKind(str, enum.Enum):
    ASYMMETRY = "asymmetry"
    NEGATIVE = "negative"
    NONZERO_DIAGONAL = "nonzero_diagonal"
    ZERO_DISTANCE = "zero_distance"
    TRIANGLE = "triangle"
    RANGE = "range"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    indices: tuple[int, ...]
    """Offending indices; `(i, l, j)` means `d(i, j) > d(i, l) + d(l, j)`."""


@dataclass(frozen=True)
class ValidationVerdict:
    violations: tuple[Violation, ...]
    instance: MetricInstance
    """The validated instance, with `metric_checked` set when the check succeeded."""

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_metric(
    instance: MetricInstance,
    *,
    require_triangle: bool = False,
    require_unit: bool = False,
    strict_positive: bool = True,
) -> ValidationVerdict:
    """Check an instance against the metric axioms.

    Violations are reported, never raised. The returned verdict carries a copy of
    the instance whose `metric_checked` flag is set when `require_triangle` was
    requested and every check passed.
    """
    dist = instance.dist
    n = instance.n
    violations: list[Violation] = []

    upper_i, upper_j = np.triu_indices(n, k=1)
    asym = dist[upper_i, upper_j] != dist[upper_j, upper_i]
    violations.extend(
        Violation(ViolationKind.ASYMMETRY, (int(i), int(j)))
        for i, j in zip(upper_i[asym], upper_j[asym])
    )
    violations.extend(
        Violation(ViolationKind.NONZERO_DIAGONAL, (int(i),))
        for i in np.flatnonzero(np.diag(dist) != 0.0)
    )
    violations.extend(
        Violation(ViolationKind.NEGATIVE, (int(i), int(j)))
        for i, j in np.argwhere(dist < 0.0)
    )
    if strict_positive:
        zero = dist[upper_i, upper_j] == 0.0
        violations.extend(
            Violation(ViolationKind.ZERO_DISTANCE, (int(i), int(j)))
            for i, j in zip(upper_i[zero], upper_j[zero])
        )
    if require_unit:
        violations.extend(
            Violation(ViolationKind.RANGE, (int(i), int(j)))
            for i, j in zip(upper_i, upper_j)
            if dist[i, j] > 1.0 or dist[j, i] > 1.0
        )
    if require_triangle:
        violations.extend(
            Violation(ViolationKind.TRIANGLE, triple)
            for triple in _triangle_violations(dist)
        )

    checked = instance
    if not violations and require_triangle:
        checked = replace(instance, metric_checked=True)
    return ValidationVerdict(tuple(violations), checked)


def _triangle_violations(dist: NDArray[np.float64]) -> list[tuple[int, int, int]]:
    triples: list[tuple[int, int, int]] = []
    for via in range(dist.shape[0]):
        detour = dist[:, via, None] + dist[None, via, :]
        bad = np.argwhere(np.triu(dist > detour + TOLERANCE, k=1))
        triples.extend((int(i), via, int(j)) for i, j in bad)
    triples.sort()
    return triples


def check_k(n: int, k: int) -> None:
    if not 1 <= k <= n:
        raise ParameterOutOfRange(f"k must satisfy 1 <= k <= n={n}, got k={k}.")


def partition_key(assignment: Sequence[int]) -> tuple[int, ...]:
    """Relabel an assignment by order of first appearance.

    Two assignments describe the same partition iff their keys are equal.
    """
    labels: dict[int, int] = {}
    return tuple(labels.setdefault(label, len(labels)) for label in assignment)


@dataclass(frozen=True)
class Clustering:
    """A partition of points `0..n-1` into `k` nonempty clusters.

    If `centers` is given, `centers[i]` is a data point that belongs to cluster `i`.
    """

    assignment: tuple[int, ...]
    k: int
    centers: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        assignment = tuple(int(label) for label in self.assignment)
        object.__setattr__(self, "assignment", assignment)
        if not 1 <= self.k <= len(assignment):
            raise InvalidClustering(
                f"k must satisfy 1 <= k <= n={len(assignment)}, got k={self.k}."
            )
        used = set(assignment)
        if used != set(range(self.k)):
            raise InvalidClustering(
                f"Cluster labels must cover exactly 0..{self.k - 1}, "
                f"got {sorted(used)}."
            )
        if self.centers is not None:
            centers = tuple(int(c) for c in self.centers)
            object.__setattr__(self, "centers", centers)
            if len(centers) != self.k:
                raise InvalidClustering(
                    f"Expected {self.k} centers, got {len(centers)}."
                )
            for label, center in enumerate(centers):
                if not 0 <= center < len(assignment) or assignment[center] != label:
                    raise InvalidClustering(
                        f"Center {center} does not belong to its cluster {label}."
                    )

    @classmethod
    def from_blocks(
        cls,
        blocks: Iterable[Iterable[int]],
        *,
        centers: Sequence[int] | None = None,
    ) -> Clustering:
        """Build a clustering from explicit clusters; cluster `i` is `blocks[i]`."""
        block_list = [sorted(block) for block in blocks]
        n = sum(len(block) for block in block_list)
        assignment = [-1] * n
        for label, block in enumerate(block_list):
            for point in block:
                if not 0 <= point < n or assignment[point] != -1:
                    raise InvalidClustering(
                        f"Point {point} is out of range or listed twice."
                    )
                assignment[point] = label
        return cls(
            tuple(assignment),
            len(block_list),
            tuple(centers) if centers is not None else None,
        )

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        members: list[list[int]] = [[] for _ in range(self.k)]
        for point, label in enumerate(self.assignment):
            members[label].append(point)
        return tuple(tuple(block) for block in members)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(block) for block in self.blocks)

    @property
    def partition(self) -> tuple[int, ...]:
        return partition_key(self.assignment)

    def same_partition(self, other: Clustering) -> bool:
        return self.partition == other.partition

    def with_centers(self, centers: Sequence[int] | None) -> Clustering:
        return Clustering(
            self.assignment, self.k, tuple(centers) if centers is not None else None
        )

    def canonical(self) -> Clustering:
        """Return the same clustering with labels in order of first appearance."""
        mapping: dict[int, int] = {}
        for label in self.assignment:
            mapping.setdefault(label, len(mapping))
        centers = None
        if self.centers is not None:
            centers = [0] * self.k
            for label, center in enumerate(self.centers):
                centers[mapping[label]] = center
        return Clustering(
            tuple(mapping[label] for label in self.assignment),
            self.k,
            tuple(centers) if centers is not None else None,
        )


@dataclass(frozen=True)
class Cost:
    value: float
    objective: Objective

    def __post_init__(self) -> None:
        assert self.value >= 0.0


def _check_sizes(instance: MetricInstance, clustering: Clustering) -> None:
    if clustering.n != instance.n:
        raise InvalidClustering(
            f"Clustering covers {clustering.n} points, instance has {instance.n}."
        )


def _indices(instance: MetricInstance, points: Iterable[int]) -> NDArray[np.intp]:
    idx = np.fromiter((int(p) for p in points), dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= instance.n):
        raise ParameterOutOfRange(
            f"Point indices must lie in [0, {instance.n}), got {idx.tolist()}."
        )
    return idx


def kmedian_cost(instance: MetricInstance, clustering: Clustering) -> Cost:
    """Return the sum of distances from each point to its cluster's center.

    Points are not re-assigned: the cost is that of the given clustering.

    Raises:
        InvalidClustering: If the clustering has no centers or does not match
            the instance.

    """
    _check_sizes(instance, clustering)
    if clustering.centers is None:
        raise InvalidClustering("The k-median objective needs cluster centers.")
    centers = np.asarray(clustering.centers, dtype=np.intp)
    assignment = np.asarray(clustering.assignment, dtype=np.intp)
    value = instance.dist[np.arange(instance.n), centers[assignment]].sum()
    return Cost(float(value), Objective.KMEDIAN)


def minsum_cost(instance: MetricInstance, clustering: Clustering) -> Cost:
    """Return the sum over clusters of all ordered within-cluster distances.

    Each unordered pair is counted twice, so a cluster of three points at
    pairwise distance 1/2 costs exactly 3.
    """
    _check_sizes(instance, clustering)
    value = sum(
        instance.dist[np.ix_(block, block)].sum() for block in clustering.blocks
    )
    return Cost(float(value), Objective.MINSUM)


def point_to_set_distance(
    instance: MetricInstance, p: int, points: Iterable[int]
) -> float:
    """Return `d(p, A)`, the sum of distances from `p` to every point of `A`."""
    (source,) = _indices(instance, [p])
    return float(instance.dist[source, _indices(instance, points)].sum())


def set_to_set_distance(
    instance: MetricInstance, first: Iterable[int], second: Iterable[int]
) -> float:
    """Return `d(A, B)`, the sum of `d(p, q)` over `p` in `A` and `q` in `B`."""
    rows = _indices(instance, first)
    cols = _indices(instance, second)
    return float(instance.dist[np.ix_(rows, cols)].sum())


def medoids(instance: MetricInstance, clustering: Clustering) -> tuple[int, ...]:
    """Return, per cluster, the member minimising the summed distance to its cluster.

    Ties go to the lowest point index.
    """
    _check_sizes(instance, clustering)
    centers = []
    for block in clustering.blocks:
        sums = instance.dist[np.ix_(block, block)].sum(axis=1)
        best = int(np.flatnonzero(sums <= sums.min() + TOLERANCE)[0])
        centers.append(block[best])
    return tuple(centers)


def with_medoids(instance: MetricInstance, clustering: Clustering) -> Clustering:
    return clustering.with_centers(medoids(instance, clustering))


def objective_cost(
    instance: MetricInstance, clustering: Clustering, objective: Objective
) -> Cost:
    if objective is Objective.KMEDIAN:
        return kmedian_cost(instance, clustering)
    return minsum_cost(instance, clustering)
