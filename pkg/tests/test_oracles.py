from __future__ import annotations

import itertools
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stable_cluster.config import Budget
from stable_cluster.exceptions import BudgetExceeded, InvalidGraph, ParameterOutOfRange
from stable_cluster.metric import Clustering, MetricInstance, Objective, minsum_cost
from stable_cluster.oracles import (
    Graph,
    brute_force_kmedian,
    brute_force_minsum,
    is_perfect_dominating,
    min_dominating_set,
    solve_exact,
    triangle_partition_decide,
    verify_pdspp_promise,
)
from stable_cluster.reductions import graph_to_halves_metric
from tests.utils import (
    complete_graph,
    four_point,
    k3_half,
    line_instance,
    path_graph,
    star_graph,
    triangles,
)


@pytest.mark.parametrize(
    "edges",
    [[(0, 0)], [(0, 3)], [(0, 1), (1, 0)], [(-1, 1)]],
)
def test_graph_rejects_bad_edges(edges: list[tuple[int, int]]) -> None:
    with pytest.raises(InvalidGraph):
        Graph(3, edges)


def test_graph_normalizes_edges() -> None:
    graph = Graph(4, [(1, 0), (2, 1), (3, 1)])
    assert graph.edges == frozenset({(0, 1), (1, 2), (1, 3)})
    assert graph.has_edge(1, 0)
    assert not graph.has_edge(0, 2)
    assert graph.neighbors(1) == (0, 2, 3)
    assert graph.degree(1) == 3
    assert graph.max_degree == 3
    assert graph == Graph(4, [(0, 1), (1, 2), (1, 3)])


def test_kmedian_four_points() -> None:
    result = brute_force_kmedian(four_point(), 2)
    assert result.cost.value == pytest.approx(0.2)
    assert result.clustering.assignment == (0, 0, 1, 1)
    assert result.clustering.centers == (0, 2)
    assert result.unique_partition
    assert result.all_optimal_count == 1


def test_kmedian_center_ties_keep_partition_unique() -> None:
    result = brute_force_kmedian(k3_half(), 1)
    assert result.cost.value == 1.0
    assert result.clustering.centers == (0,)
    assert result.unique_partition


def test_kmedian_equidistant_point_breaks_uniqueness() -> None:
    result = brute_force_kmedian(line_instance([0.0, 1.0, 2.0]), 2)
    assert result.cost.value == 1.0
    assert not result.unique_partition
    assert result.all_optimal_count == 2


def test_kmedian_every_point_a_center() -> None:
    result = brute_force_kmedian(four_point(), 4)
    assert result.cost.value == 0.0
    assert result.clustering.assignment == (0, 1, 2, 3)


def test_kmedian_coincident_points_keep_their_own_centers() -> None:
    instance = MetricInstance.from_rows(
        [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]], strict_positive=False
    )
    every = brute_force_kmedian(instance, 3)
    assert every.cost.value == 0.0
    assert every.clustering.assignment == (0, 1, 2)
    assert every.clustering.centers == (0, 1, 2)

    pair = brute_force_kmedian(instance, 2)
    assert pair.cost.value == 0.0
    assert pair.clustering.same_partition(Clustering.from_blocks([[0, 1], [2]]))


def test_kmedian_dominating_set_reduction() -> None:
    instance = graph_to_halves_metric(star_graph(3))
    result = brute_force_kmedian(instance, 1)
    assert result.cost.value == 1.5
    assert result.clustering.centers == (0,)
    assert result.unique_partition


def test_minsum_four_points() -> None:
    result = brute_force_minsum(four_point(), 2)
    assert result.cost.value == pytest.approx(0.4)
    assert result.clustering.assignment == (0, 0, 1, 1)
    assert result.clustering.centers is None
    assert result.unique_partition


def test_minsum_path() -> None:
    instance = graph_to_halves_metric(path_graph(3))
    assert brute_force_minsum(instance, 1).cost.value == 4.0


def test_minsum_two_triangles() -> None:
    instance = graph_to_halves_metric(triangles(2))
    result = brute_force_minsum(instance, 2)
    assert result.cost.value == 6.0
    assert result.clustering.blocks == ((0, 1, 2), (3, 4, 5))
    assert result.unique_partition


def test_minsum_counts_tied_partitions() -> None:
    result = brute_force_minsum(line_instance([0.0, 1.0, 2.0]), 2)
    assert result.cost.value == 2.0
    assert result.clustering.assignment == (0, 0, 1)
    assert result.all_optimal_count == 2
    assert not result.unique_partition


@pytest.mark.parametrize("objective", list(Objective))
def test_solve_exact_dispatches(objective: Objective) -> None:
    result = solve_exact(four_point(), 2, objective)
    assert result.cost.objective is objective


def test_oracles_reject_bad_k() -> None:
    with pytest.raises(ParameterOutOfRange):
        brute_force_kmedian(four_point(), 0)
    with pytest.raises(ParameterOutOfRange):
        brute_force_minsum(four_point(), 5)


def test_budget_is_checked_before_enumeration() -> None:
    tiny = Budget(kmedian_subsets=5, minsum_partitions=6)
    with pytest.raises(BudgetExceeded) as info:
        brute_force_kmedian(four_point(), 2, budget=tiny)
    assert info.value.required == 6
    assert info.value.budget == 5
    assert "STABLE_CLUSTER_BUDGET" in str(info.value)
    with pytest.raises(BudgetExceeded) as info:
        brute_force_minsum(four_point(), 2, budget=tiny)
    assert info.value.required == 7


def test_budget_from_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("STABLE_CLUSTER_BUDGET", "kmedian=3")
    with pytest.raises(BudgetExceeded):
        brute_force_kmedian(four_point(), 2)
    assert brute_force_minsum(four_point(), 2).unique_partition


def test_dominating_set_on_path() -> None:
    graph = path_graph(4)
    found = min_dominating_set(graph, 2)
    assert found is not None
    assert found.size == 2
    assert found.vertices == (0, 2)
    assert not is_perfect_dominating(graph, found.vertices)
    assert min_dominating_set(graph, 1) is None


def test_dominating_set_must_include() -> None:
    graph = path_graph(4)
    found = min_dominating_set(graph, 2, must_include=[3])
    assert found is not None
    assert found.vertices == (0, 3)
    assert is_perfect_dominating(graph, found.vertices)


def test_dominating_set_argument_checks() -> None:
    with pytest.raises(ParameterOutOfRange):
        min_dominating_set(path_graph(3), 4)
    with pytest.raises(InvalidGraph):
        min_dominating_set(path_graph(3), 2, must_include=[5])
    with pytest.raises(InvalidGraph):
        is_perfect_dominating(path_graph(3), [7])
    with pytest.raises(BudgetExceeded):
        min_dominating_set(path_graph(6), 3, budget=Budget(dominating_subsets=10))


def test_promise_on_star_holds() -> None:
    check = verify_pdspp_promise(star_graph(3), 1)
    assert check.holds
    assert check.witness is None
    assert check.dominating_sets == 1


def test_promise_on_path_fails() -> None:
    check = verify_pdspp_promise(path_graph(4), 2)
    assert not check.holds
    assert check.witness == (0, 2)
    with pytest.raises(ParameterOutOfRange):
        verify_pdspp_promise(path_graph(4), 5)


def test_triangle_partition() -> None:
    result = triangle_partition_decide(triangles(2))
    assert result.feasible
    assert result.witness == ((0, 1, 2), (3, 4, 5))

    assert not triangle_partition_decide(path_graph(6)).feasible
    with pytest.raises(ParameterOutOfRange):
        triangle_partition_decide(path_graph(4))


def test_triangle_partition_warns_on_high_degree(
    caplog: pytest.LogCaptureFixture,
) -> None:
    with caplog.at_level(logging.WARNING, logger="stable_cluster"):
        result = triangle_partition_decide(complete_graph(6))
    assert result.feasible
    assert "max_degree=5" in caplog.text


def test_triangle_partition_backtracks() -> None:
    # Vertex 5 only fits in {1, 2, 5}, so {0, 1, 2} must be undone.
    graph = Graph(
        6, [(0, 1), (0, 2), (1, 2), (0, 3), (0, 4), (3, 4), (1, 5), (2, 5)]
    )
    result = triangle_partition_decide(graph)
    assert result.feasible
    assert result.witness == ((0, 3, 4), (1, 2, 5))

    stranded = Graph(6, [(0, 1), (0, 2), (1, 2), (0, 3), (0, 4), (3, 4), (1, 5)])
    assert not triangle_partition_decide(stranded).feasible


@settings(max_examples=30, deadline=None)
@given(
    positions=st.lists(
        st.integers(min_value=0, max_value=50), min_size=2, max_size=6, unique=True
    ),
    data=st.data(),
)
def test_oracles_beat_every_candidate(
    positions: list[int], data: st.DataObject
) -> None:
    instance = line_instance([float(p) for p in positions])
    n = instance.n
    k = data.draw(st.integers(min_value=1, max_value=n))

    kmedian = brute_force_kmedian(instance, k)
    for centers in itertools.combinations(range(n), k):
        cost = instance.dist[:, list(centers)].min(axis=1).sum()
        assert kmedian.cost.value <= cost + 1e-9

    minsum = brute_force_minsum(instance, k)
    labels = list(range(k)) + [0] * (n - k)
    candidate = minsum_cost(instance, Clustering(tuple(labels), k))
    assert minsum.cost.value <= candidate.value + 1e-9
    assert minsum.all_optimal_count >= 1
