"""Stability measurement, structural checks and resilience falsification.

The profiler reports stability parameters as suprema: an instance is
`alpha`-center stable for every `alpha` strictly below `alpha_center`, because
the underlying definitions use strict inequalities. Every downstream gate
therefore compares strictly.

Perturbation resilience quantifies over a continuum of distance functions and
cannot be verified exactly. `resilience_falsifier()` samples perturbations
instead, and the `targeted_*` functions build the single perturbations that
turn a stability violation into a changed optimum.
"""

from __future__ import annotations

import enum
import itertools
import math
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import TOLERANCE, Budget, budget_from_env
from .exceptions import InvalidClustering, ParameterOutOfRange
from .metric import Clustering, MetricInstance, Objective, with_medoids
from .oracles import brute_force_kmedian, brute_force_minsum, solve_exact
from .utils.logging import FALSIFIED_EXTRA, SURVIVED_EXTRA, get_logger
from .utils.misc import kvformat

if typing.TYPE_CHECKING:
    from collections.abc import Iterator

    from numpy.typing import NDArray

logger = get_logger(__name__)

STRICT_SEPARATION_ALPHA = (5.0 + math.sqrt(41.0)) / 2.0
"""Center stability above which optimal clusters are strictly separated."""

EXHAUSTIVE_SUBSET_LIMIT = 12
"""Clusters up to this size have all their proper subsets checked exhaustively."""


@dataclass(frozen=True)
class StabilityReport:
    alpha_center: float
    """Supremum multiplicative center stability (`math.inf` if unbounded)."""

    alpha_minsum: float
    """Supremum multiplicative min-sum stability (`math.inf` if unbounded)."""

    beta_center: float | None
    """Additive center stability clamped to [0, 1]; `None` unless unit range."""

    beta_minsum: float | None
    """Additive min-sum stability clamped to [0, 1]; `None` unless unit range."""

    t: float
    """Cluster-size ratio `max|C| / (min|C| - 1)`; `math.inf` with a singleton."""

    strict_separation: bool
    unique_partition: bool
    """Whether the optimum is unique. Reports without it are not certificates."""

    clustering: Clustering
    """The optimal clustering the measurements refer to, with centers."""

    objective: Objective = Objective.KMEDIAN


@dataclass(frozen=True)
class SeparationResult:
    holds: bool
    witness: tuple[int, int, int] | None = None
    """First violating `(p, p', q)`, i.e. `d(p, q) <= d(p, p')`."""


@dataclass(frozen=True)
class MarginResult:
    holds: bool
    witness: tuple[int, int, int, int] | None = None
    """First violating `(i, j, p, p')` with `p` in cluster `i`, `p'` in cluster `j`."""


@dataclass(frozen=True)
class LinkageConditionResult:
    holds: bool
    witness: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]] | None = None
    """First violating `(A, C, C')`."""

    subsets_checked: int = 0


@dataclass(frozen=True)
class Multiplicative:
    alpha: float


@dataclass(frozen=True)
class Additive:
    beta: float


PerturbationMode = typing.Union[Multiplicative, Additive]


class FalsificationReason(str, enum.Enum):
    OPTIMUM_CHANGED = "optimum_changed"
    OPTIMUM_NOT_UNIQUE = "optimum_not_unique"


@dataclass(frozen=True, eq=False)
class FalsificationWitness:
    perturbed: MetricInstance
    """The perturbed distance function `d'`; symmetric, possibly non-metric."""

    scale: NDArray[np.float64]
    """Per-pair multipliers (multiplicative mode) or offsets (additive mode)."""

    mode: PerturbationMode
    original_optimum: Clustering
    perturbed_optimum: Clustering
    reason: FalsificationReason
    sample_index: int | None = None
    """Index of the sample that produced the witness; `None` if not sampled."""


@dataclass(frozen=True)
class NoCounterexampleFound:
    samples: int


@dataclass(frozen=True)
class StabilityConfirmed:
    checked: int
    """Number of (point, rival) combinations inspected."""


def lemma3_factor(alpha: float) -> float:
    """Return `alpha (alpha - 1) / (alpha + 1)`, the center margin factor."""
    if math.isinf(alpha):
        return math.inf
    return alpha * (alpha - 1.0) / (alpha + 1.0)


def _membership(clustering: Clustering) -> NDArray[np.float64]:
    onehot = np.zeros((clustering.n, clustering.k))
    onehot[np.arange(clustering.n), clustering.assignment] = 1.0
    return onehot


def size_ratio(clustering: Clustering) -> float:
    sizes = clustering.sizes
    if min(sizes) == 1:
        return math.inf
    return max(sizes) / (min(sizes) - 1)


def measure_stability(
    instance: MetricInstance,
    clustering: Clustering,
    *,
    unique_partition: bool = True,
    objective: Objective = Objective.KMEDIAN,
) -> StabilityReport:
    """Measure every stability parameter of a given clustering with centers.

    Zero denominators (a point that is its own center, a singleton cluster in
    the min-sum ratios) contribute `math.inf`, since the corresponding
    inequality then holds for every parameter value.
    """
    if clustering.centers is None:
        raise InvalidClustering("Stability measurement needs cluster centers.")
    dist = instance.dist
    n = instance.n
    rows = np.arange(n)
    labels = np.asarray(clustering.assignment)
    onehot = _membership(clustering)
    rival = onehot == 0.0
    sizes = onehot.sum(axis=0)

    to_centers = dist[:, list(clustering.centers)]
    own_center = to_centers[rows, labels]
    to_sets = dist @ onehot
    own_set = to_sets[rows, labels]

    with np.errstate(divide="ignore", invalid="ignore"):
        center_ratio = np.where(
            own_center[:, None] > 0.0, to_centers / own_center[:, None], math.inf
        )
        set_ratio = np.where(
            own_set[:, None] > 0.0, to_sets / own_set[:, None], math.inf
        )
        set_margin = np.where(
            (sizes[labels] > 1)[:, None],
            (to_sets - own_set[:, None]) / (sizes[labels] - 1)[:, None],
            math.inf,
        )
    center_margin = to_centers - own_center[:, None]

    def rival_min(values: NDArray[np.float64]) -> float:
        return float(values[rival].min()) if rival.any() else math.inf

    beta_center = beta_minsum = None
    if instance.unit_range:
        beta_center = float(np.clip(rival_min(center_margin), 0.0, 1.0))
        beta_minsum = float(np.clip(rival_min(set_margin), 0.0, 1.0))

    return StabilityReport(
        alpha_center=rival_min(center_ratio),
        alpha_minsum=rival_min(set_ratio),
        beta_center=beta_center,
        beta_minsum=beta_minsum,
        t=size_ratio(clustering),
        strict_separation=strict_separation_check(instance, clustering).holds,
        unique_partition=unique_partition,
        clustering=clustering,
        objective=objective,
    )


def stability_profile(
    instance: MetricInstance,
    k: int,
    objective: Objective = Objective.KMEDIAN,
    *,
    budget: Budget | None = None,
) -> StabilityReport:
    """Certify the exact optimum for `objective` and measure its stability.

    Min-sum optima carry no centers; their center-based parameters are measured
    against each cluster's lowest-index medoid. If the optimum is not unique the
    report is computed against the lexicographically first optimum and has
    `unique_partition=False`.

    Raises:
        ParameterOutOfRange: If `k` is not in `[1, n]`.
        BudgetExceeded: If the exact oracle would exceed its budget.

    """
    optimum = solve_exact(instance, k, objective, budget=budget)
    clustering = optimum.clustering
    if clustering.centers is None:
        clustering = with_medoids(instance, clustering)
    report = measure_stability(
        instance,
        clustering,
        unique_partition=optimum.unique_partition,
        objective=objective,
    )
    logger.debug(
        "stability_profile "
        + kvformat(
            n=instance.n,
            k=k,
            objective=objective.value,
            alpha_center=report.alpha_center,
            alpha_minsum=report.alpha_minsum,
            unique=report.unique_partition,
        )
    )
    return report


def strict_separation_check(
    instance: MetricInstance, clustering: Clustering
) -> SeparationResult:
    """Check that `d(p, q) > d(p, p')` for co-clustered `p, p'` and outsider `q`.

    On failure the lexicographically first violating `(p, p', q)` is returned.
    """
    blocks = clustering.blocks
    for p in range(instance.n):
        block = blocks[clustering.assignment[p]]
        mates = [q for q in block if q != p]
        outside = sorted(set(range(instance.n)) - set(block))
        if not mates or not outside:
            continue
        within = instance.dist[p, mates]
        cross = instance.dist[p, outside]
        bad = np.argwhere(cross[None, :] <= within[:, None])
        if bad.size:
            mate, other = bad[0]
            return SeparationResult(
                holds=False, witness=(p, mates[mate], outside[other])
            )
    return SeparationResult(holds=True)


def lemma3_margin_check(
    instance: MetricInstance, clustering: Clustering, alpha: float
) -> MarginResult:
    """Check `d(c_i, p') > alpha (alpha - 1) / (alpha + 1) * d(c_i, p)`.

    The inequality is checked for every pair of distinct clusters `i, j`, every
    `p` in cluster `i` and every `p'` in cluster `j`.

    Raises:
        ParameterOutOfRange: If `alpha <= 1`.
        InvalidClustering: If the clustering has no centers.

    """
    if not alpha > 1.0:
        raise ParameterOutOfRange(f"alpha must exceed 1, got {alpha}.")
    if clustering.centers is None:
        raise InvalidClustering("The center margin check needs cluster centers.")
    factor = lemma3_factor(alpha)
    blocks = clustering.blocks
    for i, j in itertools.permutations(range(clustering.k), 2):
        center = clustering.centers[i]
        own = instance.dist[center, list(blocks[i])]
        with np.errstate(invalid="ignore"):
            bound = np.where(own > 0.0, factor * own, 0.0)
        rival = instance.dist[center, list(blocks[j])]
        bad = np.argwhere(rival[None, :] <= bound[:, None])
        if bad.size:
            p, q = bad[0]
            return MarginResult(
                holds=False, witness=(i, j, blocks[i][p], blocks[j][q])
            )
    return MarginResult(holds=True)


def _proper_subsets(
    block: tuple[int, ...],
    *,
    subset_budget: int,
    rng: np.random.Generator,
    max_subset_size: int | None,
) -> Iterator[tuple[int, ...]]:
    limit = len(block) - 1
    if max_subset_size is not None:
        limit = min(limit, max_subset_size)
    if len(block) <= EXHAUSTIVE_SUBSET_LIMIT:
        for size in range(1, limit + 1):
            yield from itertools.combinations(block, size)
        return
    if limit < 1:
        return
    # Sizes weighted by C(n, size) make every allowed subset equally likely.
    sizes = np.arange(1, limit + 1)
    counts = [math.comb(len(block), int(size)) for size in sizes]
    total = sum(counts)
    weights = np.array([count / total for count in counts])
    weights /= weights.sum()
    members = np.asarray(block)
    for size in rng.choice(sizes, size=subset_budget, p=weights):
        chosen = np.sort(rng.choice(members, size=int(size), replace=False))
        yield tuple(int(p) for p in chosen)


def linkage_condition_check(
    instance: MetricInstance,
    clustering: Clustering,
    alpha: float,
    subset_budget: int = 1000,
    *,
    seed: int = 0,
    max_subset_size: int | None = None,
) -> LinkageConditionResult:
    """Check `alpha * d(A, C \\ A) < d(A, C')` for subsets `A` of optimal clusters.

    Every ordered pair of distinct clusters `(C, C')` is checked. Subsets of
    clusters with at most `EXHAUSTIVE_SUBSET_LIMIT` points are enumerated
    exhaustively, by size then lexicographically; larger clusters get
    `subset_budget` nonempty proper subsets drawn uniformly, size first, from a
    generator seeded with `seed`. `max_subset_size` restricts the check to
    small subsets (1 gives the per-point min-sum stability condition).

    Raises:
        ParameterOutOfRange: If `alpha <= 0`.

    """
    if not alpha > 0.0:
        raise ParameterOutOfRange(f"alpha must be positive, got {alpha}.")
    rng = np.random.default_rng(seed)
    blocks = clustering.blocks
    checked = 0
    for i, block in enumerate(blocks):
        for subset in _proper_subsets(
            block, subset_budget=subset_budget, rng=rng, max_subset_size=max_subset_size
        ):
            checked += 1
            row = instance.dist[list(subset)].sum(axis=0)
            rest = [p for p in block if p not in subset]
            inside = alpha * float(row[rest].sum())
            for j, other in enumerate(blocks):
                if j != i and not inside < float(row[list(other)].sum()):
                    logger.trace(
                        "linkage_condition_violated "
                        + kvformat(A=subset, C=i, C_rival=j)
                    )
                    return LinkageConditionResult(
                        holds=False,
                        witness=(subset, block, other),
                        subsets_checked=checked,
                    )
    return LinkageConditionResult(holds=True, subsets_checked=checked)


def _check_mode(instance: MetricInstance, mode: PerturbationMode) -> None:
    if isinstance(mode, Multiplicative):
        if not 1.0 < mode.alpha < math.inf:
            raise ParameterOutOfRange(
                f"Multiplicative perturbations need 1 < alpha < inf, got {mode.alpha}."
            )
        return
    if not 0.0 < mode.beta <= 1.0:
        raise ParameterOutOfRange(
            f"Additive perturbations need 0 < beta <= 1, got {mode.beta}."
        )
    if not instance.unit_range:
        raise ParameterOutOfRange(
            "Additive perturbations are only defined for distances in [0, 1]."
        )


def _neutral_scale(n: int, mode: PerturbationMode) -> NDArray[np.float64]:
    if isinstance(mode, Multiplicative):
        return np.ones((n, n))
    return np.zeros((n, n))


def _apply_scale(
    instance: MetricInstance, scale: NDArray[np.float64], mode: PerturbationMode
) -> MetricInstance:
    if isinstance(mode, Multiplicative):
        perturbed = instance.dist * scale
    else:
        perturbed = instance.dist + scale
    np.fill_diagonal(perturbed, 0.0)
    return MetricInstance(perturbed)


def _draw_scale(
    rng: np.random.Generator, n: int, mode: PerturbationMode
) -> NDArray[np.float64]:
    scale = _neutral_scale(n, mode)
    upper = np.triu_indices(n, k=1)
    if isinstance(mode, Multiplicative):
        draws = rng.uniform(1.0, mode.alpha, size=len(upper[0]))
    else:
        draws = rng.uniform(0.0, mode.beta, size=len(upper[0]))
    scale[upper] = draws
    scale[upper[1], upper[0]] = draws
    return scale


@dataclass(frozen=True)
class _SampleTask:
    instance: MetricInstance
    k: int
    objective: Objective
    mode: PerturbationMode
    original: Clustering
    budget: Budget


def _evaluate_sample(
    task: _SampleTask, index: int, seed: np.random.SeedSequence
) -> FalsificationWitness | None:
    rng = np.random.default_rng(seed)
    scale = _draw_scale(rng, task.instance.n, task.mode)
    perturbed = _apply_scale(task.instance, scale, task.mode)
    result = solve_exact(perturbed, task.k, task.objective, budget=task.budget)
    if not result.unique_partition:
        reason = FalsificationReason.OPTIMUM_NOT_UNIQUE
    elif not result.clustering.same_partition(task.original):
        reason = FalsificationReason.OPTIMUM_CHANGED
    else:
        return None
    return FalsificationWitness(
        perturbed=perturbed,
        scale=scale,
        mode=task.mode,
        original_optimum=task.original,
        perturbed_optimum=result.clustering,
        reason=reason,
        sample_index=index,
    )


def _evaluate_batch(
    task: _SampleTask, batch: list[tuple[int, np.random.SeedSequence]]
) -> FalsificationWitness | None:
    for index, seed in batch:
        witness = _evaluate_sample(task, index, seed)
        if witness is not None:
            return witness
    return None


def resilience_falsifier(
    instance: MetricInstance,
    k: int,
    objective: Objective,
    mode: PerturbationMode,
    samples: int,
    seed: int,
    *,
    jobs: int = 1,
    budget: Budget | None = None,
) -> FalsificationWitness | NoCounterexampleFound:
    """Search for a perturbation that changes the optimal partition.

    The unperturbed instance is checked first: a non-unique optimum is already a
    witness. Then `samples` perturbations are drawn, each pair `{p, q}` getting
    an independent multiplier uniform on `[1, alpha]` (or offset uniform on
    `[0, beta]`), mirrored so `d'` stays symmetric. The triangle inequality is
    not enforced. The witness with the lowest sample index is returned, also
    when `jobs > 1` spreads samples over worker processes.

    A `NoCounterexampleFound` result is evidence of resilience, not a proof.

    Raises:
        ParameterOutOfRange: If the perturbation parameter is out of range.
        BudgetExceeded: If the exact oracle would exceed its budget.

    """
    _check_mode(instance, mode)
    if samples < 0 or jobs < 1:
        raise ParameterOutOfRange("samples must be >= 0 and jobs >= 1.")
    budget = budget or budget_from_env()
    optimum = solve_exact(instance, k, objective, budget=budget)
    if not optimum.unique_partition:
        witness = FalsificationWitness(
            perturbed=instance,
            scale=_neutral_scale(instance.n, mode),
            mode=mode,
            original_optimum=optimum.clustering,
            perturbed_optimum=optimum.clustering,
            reason=FalsificationReason.OPTIMUM_NOT_UNIQUE,
        )
        logger.debug("falsifier %s", "falsified", extra=FALSIFIED_EXTRA)
        return witness

    task = _SampleTask(instance, k, objective, mode, optimum.clustering, budget)
    seeds = list(enumerate(np.random.SeedSequence(seed).spawn(samples)))
    result: FalsificationWitness | None = None
    if jobs == 1:
        result = _evaluate_batch(task, seeds)
    else:
        batch_size = max(1, samples // (jobs * 8))
        batches = [seeds[i : i + batch_size] for i in range(0, samples, batch_size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for start in range(0, len(batches), jobs):
                window = batches[start : start + jobs]
                found = [
                    w
                    for w in pool.map(_evaluate_batch, [task] * len(window), window)
                    if w is not None
                ]
                if found:
                    result = found[0]
                    break

    if result is None:
        logger.debug("falsifier %s", "no_counterexample", extra=SURVIVED_EXTRA)
        return NoCounterexampleFound(samples=samples)
    logger.debug("falsifier %s", "falsified", extra=FALSIFIED_EXTRA)
    logger.trace(
        "falsifier_witness "
        + kvformat(sample=result.sample_index, reason=result.reason.value)
    )
    return result


def _moved(clustering: Clustering, p: int, receiver: int) -> Clustering:
    assignment = list(clustering.assignment)
    assignment[p] = receiver
    return Clustering(tuple(assignment), clustering.k, clustering.centers)


def _perturb_pairs(
    instance: MetricInstance,
    mode: PerturbationMode,
    pairs: list[tuple[int, int]],
) -> tuple[MetricInstance, NDArray[np.float64]]:
    scale = _neutral_scale(instance.n, mode)
    value = mode.alpha if isinstance(mode, Multiplicative) else mode.beta
    for p, q in pairs:
        if p != q:
            scale[p, q] = scale[q, p] = value
    return _apply_scale(instance, scale, mode), scale


def targeted_minsum_perturbation(
    instance: MetricInstance,
    k: int,
    mode: PerturbationMode,
    p: int,
    donor: int,
    receiver: int,
    *,
    budget: Budget | None = None,
) -> FalsificationWitness | StabilityConfirmed:
    """Inflate every distance from `p` to its own cluster and try moving `p`.

    Cluster indices refer to the certified min-sum optimum, labelled in order of
    first appearance. The perturbation multiplies (or offsets) `d(p, q)` for
    every `q` in the donor cluster and leaves every other distance unchanged.
    A witness is returned iff moving `p` to the receiver is then no more
    expensive than keeping the certified partition; a tie yields
    `OPTIMUM_NOT_UNIQUE`. Moving the only point of a singleton donor would
    drop a cluster, so singletons are always confirmed.

    Raises:
        ParameterOutOfRange: If `p` is not in the donor cluster, the clusters
            coincide, or the perturbation parameter is out of range.

    """
    _check_mode(instance, mode)
    optimum = brute_force_minsum(instance, k, budget=budget).clustering
    if not (0 <= donor < k and 0 <= receiver < k) or donor == receiver:
        raise ParameterOutOfRange(
            f"donor and receiver must be distinct clusters in [0, {k}), "
            f"got {donor} and {receiver}."
        )
    if not 0 <= p < instance.n or optimum.assignment[p] != donor:
        raise ParameterOutOfRange(f"Point {p} is not in donor cluster {donor}.")
    members = optimum.blocks[donor]
    if len(members) == 1:
        return StabilityConfirmed(checked=1)

    perturbed, scale = _perturb_pairs(instance, mode, [(p, q) for q in members])
    stay = float(perturbed.dist[p, list(members)].sum())
    move = float(perturbed.dist[p, list(optimum.blocks[receiver])].sum())
    logger.trace(f"targeted_minsum {kvformat(p=p, stay=stay, move=move)}")
    if move > stay + TOLERANCE:
        return StabilityConfirmed(checked=1)
    reason = (
        FalsificationReason.OPTIMUM_CHANGED
        if move < stay - TOLERANCE
        else FalsificationReason.OPTIMUM_NOT_UNIQUE
    )
    return FalsificationWitness(
        perturbed=perturbed,
        scale=scale,
        mode=mode,
        original_optimum=optimum,
        perturbed_optimum=_moved(optimum, p, receiver),
        reason=reason,
    )


def targeted_center_perturbation(
    instance: MetricInstance,
    k: int,
    mode: PerturbationMode,
    cluster: int,
    *,
    budget: Budget | None = None,
) -> FalsificationWitness | StabilityConfirmed:
    """Inflate every distance inside one optimal k-median cluster.

    Cluster indices refer to the certified k-median optimum. After the
    perturbation, a non-center point of the cluster that is no farther from a
    rival center than from its own center can be moved without increasing the
    cost; the first such `(p, rival)` in index order yields a witness.

    Raises:
        ParameterOutOfRange: If `cluster` is not in `[0, k)` or the perturbation
            parameter is out of range.

    """
    _check_mode(instance, mode)
    optimum = brute_force_kmedian(instance, k, budget=budget).clustering
    if not 0 <= cluster < k:
        raise ParameterOutOfRange(f"cluster must lie in [0, {k}), got {cluster}.")
    assert optimum.centers is not None
    members = optimum.blocks[cluster]
    perturbed, scale = _perturb_pairs(
        instance, mode, list(itertools.combinations(members, 2))
    )
    own = optimum.centers[cluster]
    checked = 0
    for p in members:
        if p == own:
            continue
        for rival, center in enumerate(optimum.centers):
            if rival == cluster:
                continue
            checked += 1
            stay = perturbed.distance(p, own)
            move = perturbed.distance(p, center)
            if move > stay + TOLERANCE:
                continue
            reason = (
                FalsificationReason.OPTIMUM_CHANGED
                if move < stay - TOLERANCE
                else FalsificationReason.OPTIMUM_NOT_UNIQUE
            )
            return FalsificationWitness(
                perturbed=perturbed,
                scale=scale,
                mode=mode,
                original_optimum=optimum,
                perturbed_optimum=_moved(optimum, p, rival),
                reason=reason,
            )
    return StabilityConfirmed(checked=checked)


def revalidate_witness(
    instance: MetricInstance,
    k: int,
    objective: Objective,
    witness: FalsificationWitness,
    *,
    budget: Budget | None = None,
) -> bool:
    """Re-check a witness against its perturbation band and a fresh exact oracle.

    The witness is sound iff `d'` is a symmetric perturbation of `d` within the
    band of its mode, and the original optimum is not the unique optimum
    under `d'`.
    """
    base = instance.dist
    perturbed = witness.perturbed.dist
    if perturbed.shape != base.shape or not np.array_equal(perturbed, perturbed.T):
        return False
    if np.any(np.diag(perturbed) != 0.0) or np.any(perturbed < base - TOLERANCE):
        return False
    if isinstance(witness.mode, Multiplicative):
        upper = witness.mode.alpha * base
    else:
        upper = base + witness.mode.beta
    if np.any(perturbed > upper + TOLERANCE):
        return False
    fresh = solve_exact(witness.perturbed, k, objective, budget=budget)
    return not fresh.unique_partition or not fresh.clustering.same_partition(
        witness.original_optimum
    )
