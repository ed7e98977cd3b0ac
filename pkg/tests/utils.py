from __future__ import annotations

import contextlib
import itertools
import logging
import os
import typing

import numpy as np

import stable_cluster.utils.logging
from stable_cluster.metric import MetricInstance
from stable_cluster.oracles import Graph
from stable_cluster.reductions import PlantedInstance, planted_stable_instance

if typing.TYPE_CHECKING:
    from collections.abc import Iterator


def four_point() -> MetricInstance:
    # Two tight pairs {0, 1} and {2, 3}, far apart.
    return MetricInstance.from_rows(
        [
            [0.0, 0.1, 1.0, 1.0],
            [0.1, 0.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 0.1],
            [1.0, 1.0, 0.1, 0.0],
        ],
        require_triangle=True,
    )


def k3_half() -> MetricInstance:
    return MetricInstance.from_rows(
        [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
    )


def line_instance(positions: typing.Sequence[float]) -> MetricInstance:
    coords = np.asarray(positions, dtype=float)
    return MetricInstance(np.abs(coords[:, None] - coords[None, :]))


def path_graph(n: int) -> Graph:
    return Graph(n, [(v, v + 1) for v in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    return Graph(leaves + 1, [(0, v) for v in range(1, leaves + 1)])


def complete_graph(n: int) -> Graph:
    return Graph(n, itertools.combinations(range(n), 2))


def disjoint_union(*graphs: Graph) -> Graph:
    offset = 0
    edges: list[tuple[int, int]] = []
    for graph in graphs:
        edges.extend((u + offset, v + offset) for u, v in graph.edges)
        offset += graph.n
    return Graph(offset, edges)


def triangles(count: int) -> Graph:
    return disjoint_union(*(complete_graph(3) for _ in range(count)))


def certified_planted(
    count: int,
    alpha: float,
    *,
    max_points: int = 20,
    min_size: int = 1,
    max_k: int = 4,
    seed: int = 0,
) -> Iterator[PlantedInstance]:
    # Cluster counts and sizes are drawn so that n never exceeds `max_points`.
    rng = np.random.default_rng(seed)
    for index in range(count):
        k = int(rng.integers(2, max_k + 1))
        sizes = rng.integers(min_size, max_points // k + 1, size=k)
        planted = planted_stable_instance(
            k, [int(size) for size in sizes], alpha, seed + index, certify=True
        )
        assert planted.certified
        assert planted.report is not None
        yield planted



@contextlib.contextmanager
def override_log_level(log_level: str) -> Iterator[None]:
    os.environ["STABLE_CLUSTER_LOG_LEVEL"] = log_level

    # Force a reload on the logging handlers
    stable_cluster.utils.logging._logger_factory._initialized = False
    stable_cluster.utils.logging.get_logger("stable_cluster")

    try:
        yield
    finally:
        reset_package_logger()
        del os.environ["STABLE_CLUSTER_LOG_LEVEL"]


def reset_package_logger() -> None:
    # Reset the logger so we don't have verbose output in all unit tests
    logging.getLogger("stable_cluster").handlers = []
    logging.getLogger("stable_cluster").setLevel(logging.NOTSET)
