from __future__ import annotations

import json
import math

import pytest

from stable_cluster.exceptions import InvalidClustering, InvalidGraph, InvalidInstance
from stable_cluster.formats import (
    deserialize_certificate,
    deserialize_clustering,
    deserialize_instance,
    deserialize_mode,
    deserialize_tree,
    dumps,
    format_graph,
    format_threedm,
    loads,
    parse_graph,
    parse_order,
    parse_threedm,
    report_numbers,
    serialize_certificate,
    serialize_clustering,
    serialize_instance,
    serialize_mode,
    serialize_report,
    serialize_tree,
    serialize_witness,
    to_csv,
)
from stable_cluster.linkage import average_linkage_tree
from stable_cluster.metric import Clustering
from stable_cluster.oracles import Graph
from stable_cluster.reductions import make_kmedian_hardness_instance
from stable_cluster.stability import (
    Additive,
    FalsificationWitness,
    Multiplicative,
    stability_profile,
    targeted_center_perturbation,
)
from tests.utils import four_point, k3_half, star_graph


def test_dumps_is_deterministic() -> None:
    expected = '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'
    assert dumps({"b": 1, "a": [1, 2]}) == expected


def test_loads_reports_malformed_json() -> None:
    assert loads('{"a": 1}') == {"a": 1}
    with pytest.raises(InvalidInstance, match="Malformed graph"):
        loads("{", what="graph")


def test_instance_document() -> None:
    truth = Clustering((0, 0, 1, 1), 2, (0, 2))
    data = serialize_instance(four_point(), truth)
    assert data["n"] == 4
    assert data["d"][0] == [0.0, 0.1, 1.0, 1.0]
    assert data["ground_truth"] == {"assignment": [0, 0, 1, 1], "centers": [0, 2]}

    instance, ground_truth = deserialize_instance(json.loads(dumps(data)))
    assert instance == four_point()
    assert ground_truth == truth
    assert "ground_truth" not in serialize_instance(k3_half())


@pytest.mark.parametrize(
    "data",
    [
        [],
        {"n": 2},
        {"d": "matrix"},
        {"d": [[0.0, 1.0], [1.0]]},
        {"n": 3, "d": [[0.0, 1.0], [1.0, 0.0]]},
        {"d": [[0.0, 1.0], [2.0, 0.0]]},
    ],
)
def test_instance_document_rejects(data: object) -> None:
    with pytest.raises(InvalidInstance):
        deserialize_instance(data)


def test_instance_document_allows_zero_distances() -> None:
    instance, _ = deserialize_instance(
        {"d": [[0.0, 0.0], [0.0, 0.0]]}, strict_positive=False
    )
    assert instance.n == 2


def test_clustering_document() -> None:
    assert serialize_clustering(Clustering((0, 1, 1), 2)) == {"assignment": [0, 1, 1]}
    assert deserialize_clustering({"assignment": [1, 0, 0]}).k == 2
    with pytest.raises(InvalidClustering):
        deserialize_clustering({"labels": [0]})
    with pytest.raises(InvalidClustering):
        deserialize_clustering({"assignment": ["x"]})


def test_graph_text() -> None:
    graph = parse_graph("4 3\n0 1\n\n2 1\n1 3\n")
    assert graph == Graph(4, [(0, 1), (1, 2), (1, 3)])
    assert format_graph(graph) == "4 3\n0 1\n1 2\n1 3\n"
    assert parse_graph(format_graph(graph)) == graph
    assert parse_graph("3 0\n") == Graph(3, [])


@pytest.mark.parametrize(
    "text",
    ["", "4\n", "4 2\n0 1\n", "3 1\n0 1 2\n", "3 1\n0 a\n", "3 1\n0 0\n"],
)
def test_graph_text_rejects(text: str) -> None:
    with pytest.raises(InvalidGraph):
        parse_graph(text)


def test_threedm_text() -> None:
    source = parse_threedm("2 3\n0 0 0\n1 1 1\n0 1 1\n")
    assert source.m == 2
    assert source.triples == ((0, 0, 0), (1, 1, 1), (0, 1, 1))
    assert format_threedm(source) == "2 3\n0 0 0\n1 1 1\n0 1 1\n"
    with pytest.raises(InvalidGraph):
        parse_threedm("2 1\n0 0\n")


def test_order_text() -> None:
    assert parse_order("3\n1\n0\n2\n") == [3, 1, 0, 2]
    with pytest.raises(InvalidInstance):
        parse_order("1\nfoo\n")


def test_certificate_document() -> None:
    _, _, certificate = make_kmedian_hardness_instance(star_graph(3), 1)
    data = serialize_certificate(certificate)
    assert data == {
        "source_kind": "domset",
        "parameters": {"n": 4, "k": 1, "d": 1, "m": None},
        "expected_cost": 1.5,
        "stability_floor": 2.0,
        "beta_floor": 0.5,
        "promise_verified": None,
    }
    assert deserialize_certificate(json.loads(dumps(data))) == certificate


@pytest.mark.parametrize(
    "data",
    [
        {},
        {"source_kind": "domset"},
        {"source_kind": "domset", "parameters": {}},
        {"source_kind": "knapsack", "parameters": {"n": 4}},
        {"source_kind": "domset", "parameters": [4]},
        [],
    ],
)
def test_certificate_document_rejects(data: object) -> None:
    with pytest.raises(InvalidInstance):
        deserialize_certificate(data)  # type: ignore[arg-type]


def test_report_document() -> None:
    data = serialize_report(stability_profile(four_point(), 2))
    assert data["objective"] == "kmedian"
    assert data["assignment"] == [0, 0, 1, 1]
    assert data["centers"] == [0, 2]
    assert data["strict_separation"] is True
    assert data["t"] == 2.0

    unbounded = serialize_report(stability_profile(k3_half(), 1))
    assert unbounded["alpha_center"] == "inf"
    numbers = report_numbers(json.loads(dumps(unbounded)))
    assert numbers["alpha_center"] == math.inf
    assert numbers["t"] == 1.5
    assert numbers["beta_center"] == 1.0


def test_tree_document() -> None:
    tree = average_linkage_tree(four_point())
    data = serialize_tree(tree)
    assert data[-1] == {"left": 4, "right": 5, "height": 1.0}
    assert deserialize_tree(json.loads(dumps(data))) == tree


@pytest.mark.parametrize("mode", [Multiplicative(2.5), Additive(0.25)])
def test_mode_document(mode: Multiplicative | Additive) -> None:
    assert deserialize_mode(serialize_mode(mode)) == mode


def test_witness_document() -> None:
    witness = targeted_center_perturbation(four_point(), 2, Multiplicative(30.0), 0)
    assert isinstance(witness, FalsificationWitness)
    data = json.loads(dumps(serialize_witness(witness)))
    assert data["result"] == "falsified"
    assert data["reason"] == "optimum_changed"
    assert data["sample_index"] is None
    assert data["mode"] == {"kind": "multiplicative", "alpha": 30.0}
    assert data["perturbed"][0][1] == pytest.approx(3.0)
    assert data["scale"][2][3] == 1.0
    assert data["original_optimum"]["assignment"] == [0, 0, 1, 1]
    assert data["perturbed_optimum"]["assignment"] == [0, 1, 1, 1]


def test_csv() -> None:
    rows = [{"seed": 0, "centers": [0, 2]}, {"seed": 1, "centers": [1, 3]}]
    assert to_csv(rows) == 'seed,centers\n0,"[0, 2]"\n1,"[1, 3]"\n'
    assert to_csv([]) == ""
