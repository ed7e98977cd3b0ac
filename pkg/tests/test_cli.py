from __future__ import annotations

import json
import typing
from collections import Counter

import pytest
from click.testing import CliRunner

from stable_cluster.cli import cli, run
from stable_cluster.formats import dumps, serialize_instance
from stable_cluster.metric import MetricInstance
from tests.utils import four_point, k3_half

if typing.TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture(name="runner")
def fixture_runner() -> CliRunner:
    return CliRunner()


@pytest.fixture(name="instance_path")
def fixture_instance_path(tmp_path: Path) -> Path:
    path = tmp_path / "four.json"
    path.write_text(dumps(serialize_instance(four_point())))
    return path


def write_graph(tmp_path: Path, text: str, name: str = "graph.txt") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def invoke(runner: CliRunner, *args: str | Path) -> dict[str, typing.Any]:
    result = runner.invoke(cli, [str(arg) for arg in args])
    assert result.exit_code == 0, result.output
    return typing.cast("dict[str, typing.Any]", json.loads(result.stdout))


def test_version(runner: CliRunner) -> None:
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "0.1.0" in result.output


def test_gen_reduce_domset(runner: CliRunner, tmp_path: Path) -> None:
    graph = write_graph(tmp_path, "4 3\n0 1\n0 2\n0 3\n")
    report = invoke(runner, "gen", "reduce-domset", "--graph", graph, "--d", "1")
    assert report["command"] == "gen reduce-domset"
    assert list(report["inputs"]) == [str(graph)]
    summary = report["summary"]
    assert summary["k"] == 1
    assert summary["certificate"]["expected_cost"] == 1.5
    assert summary["certificate"]["promise_verified"] is None
    assert summary["instance"]["d"][0] == [0.0, 0.5, 0.5, 0.5]


def test_gen_reduce_domset_writes_sidecar(runner: CliRunner, tmp_path: Path) -> None:
    graph = write_graph(tmp_path, "4 3\n0 1\n0 2\n0 3\n")
    output = tmp_path / "star.json"
    report = invoke(
        runner,
        "gen",
        "reduce-domset",
        "--graph",
        graph,
        "--d",
        "1",
        "--check-promise",
        "-o",
        output,
    )
    sidecar = tmp_path / "star.cert.json"
    assert report["outputs"] == [str(output), str(sidecar)]
    assert "instance" not in report["summary"]
    assert json.loads(output.read_text())["n"] == 4
    assert json.loads(sidecar.read_text())["promise_verified"] is True


def test_gen_reduce_trianglepart(runner: CliRunner, tmp_path: Path) -> None:
    graph = write_graph(tmp_path, "6 6\n0 1\n1 2\n0 2\n3 4\n4 5\n3 5\n")
    summary = invoke(runner, "gen", "reduce-trianglepart", "--graph", graph)[
        "summary"
    ]
    assert summary["k"] == 2
    assert summary["certificate"]["source_kind"] == "triangle_partition"
    assert summary["certificate"]["expected_cost"] == 6.0


def test_gen_from_3dm_feeds_domset_oracle(runner: CliRunner, tmp_path: Path) -> None:
    source = write_graph(tmp_path, "2 3\n0 0 0\n1 1 1\n0 1 1\n", "match.txt")
    graph = tmp_path / "match-graph.txt"
    report = invoke(runner, "gen", "from-3dm", source, "-o", graph)
    assert report["summary"]["d"] == 3
    assert graph.read_text().startswith("10 12\n")

    summary = invoke(
        runner,
        "oracle",
        "domset",
        "--graph",
        graph,
        "--max-size",
        "3",
        "--must-include",
        "9",
    )["summary"]
    assert summary == {"size": 3, "vertices": [6, 7, 9], "perfect": True}


def test_oracle_domset_without_solution(runner: CliRunner, tmp_path: Path) -> None:
    graph = write_graph(tmp_path, "4 3\n0 1\n1 2\n2 3\n")
    summary = invoke(runner, "oracle", "domset", "--graph", graph, "--max-size", "1")[
        "summary"
    ]
    assert summary == {"size": None, "vertices": None, "perfect": None}


def test_oracle_triangle_partition(runner: CliRunner, tmp_path: Path) -> None:
    graph = write_graph(tmp_path, "6 6\n0 1\n1 2\n0 2\n3 4\n4 5\n3 5\n")
    summary = invoke(runner, "oracle", "triangle-partition", "--graph", graph)[
        "summary"
    ]
    assert summary == {"feasible": True, "witness": [[0, 1, 2], [3, 4, 5]]}


def test_gen_planted(runner: CliRunner, tmp_path: Path) -> None:
    output = tmp_path / "planted.json"
    result = runner.invoke(
        cli,
        [
            "gen",
            "planted",
            "--k",
            "2",
            "--sizes",
            "2,3",
            "--alpha",
            "3",
            "--seed",
            "5",
            "--count",
            "2",
            "-o",
            str(output),
            "--format",
            "csv",
        ],
    )
    assert result.exit_code == 0, result.output
    header, first, second = result.stdout.strip().split("\n")
    assert header == "seed,n,certified,attempts,alpha_center"
    assert first.startswith("5,5,True,")
    assert second.startswith("6,5,True,")

    document = json.loads((tmp_path / "planted-5.json").read_text())
    assert document["n"] == 5
    assert sorted(Counter(document["ground_truth"]["assignment"]).values()) == [2, 3]
    assert (tmp_path / "planted-6.json").exists()


def test_gen_planted_rejects_bad_sizes(runner: CliRunner) -> None:
    args = ["gen", "planted", "--k", "2", "--sizes", "2,x", "--alpha", "3"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 2


def test_solve_exact(runner: CliRunner, instance_path: Path) -> None:
    summary = invoke(runner, "solve", "kmedian", instance_path, "--k", "2")["summary"]
    assert summary["method"] == "exact"
    assert summary["cost"] == pytest.approx(0.2)
    assert summary["unique_partition"] is True
    assert summary["optimal_partitions"] == 1
    assert summary["assignment"] == [0, 0, 1, 1]
    assert summary["centers"] == [0, 2]


def test_solve_linkage(
    runner: CliRunner, instance_path: Path, tmp_path: Path
) -> None:
    tree_path = tmp_path / "tree.json"
    report = invoke(
        runner,
        "solve",
        "minsum",
        instance_path,
        "--k",
        "2",
        "--linkage",
        "--tree-out",
        tree_path,
    )
    assert report["summary"]["method"] == "linkage"
    assert report["summary"]["cost"] == pytest.approx(0.4)
    assert report["summary"]["assignment"] == [0, 0, 1, 1]
    assert "tree" not in report["summary"]
    assert report["outputs"] == [str(tree_path)]
    assert len(json.loads(tree_path.read_text())) == 3


def test_solve_writes_report(
    runner: CliRunner, instance_path: Path, tmp_path: Path
) -> None:
    output = tmp_path / "report.json"
    result = runner.invoke(
        cli, ["solve", "minsum", str(instance_path), "--k", "2", "-o", str(output)]
    )
    assert result.exit_code == 0
    assert result.stdout == ""
    assert json.loads(output.read_text())["summary"]["cost"] == pytest.approx(0.4)


@pytest.mark.parametrize("order", ["given", "random", "reverse"])
def test_stream(runner: CliRunner, instance_path: Path, order: str) -> None:
    summary = invoke(
        runner, "stream", "kmedian", instance_path, "--k", "2", "--order", order
    )["summary"]
    assert sorted(summary["order"]) == [0, 1, 2, 3]
    assert summary["distance_evaluations"] == 5
    assert summary["peak_candidates"] == 3
    assert summary["assignment"] in ([0, 0, 1, 1], [1, 1, 0, 0])


def test_stream_order_file(
    runner: CliRunner, instance_path: Path, tmp_path: Path
) -> None:
    order = write_graph(tmp_path, "3\n2\n1\n0\n", "order.txt")
    report = invoke(
        runner, "stream", "kmedian", instance_path, "--k", "2", "--order-file", order
    )
    assert report["summary"]["centers"] == [1, 3]
    assert report["summary"]["order"] == [3, 2, 1, 0]
    assert set(report["inputs"]) == {str(instance_path), str(order)}


def test_verify_stability(runner: CliRunner, instance_path: Path) -> None:
    summary = invoke(runner, "verify", "stability", instance_path, "--k", "2")[
        "summary"
    ]
    assert summary["alpha_center"] == pytest.approx(10.0)
    assert summary["beta_center"] == pytest.approx(0.9)
    assert summary["unique_partition"] is True
    assert summary["strict_separation"] is True


def test_verify_stability_infinite_values(runner: CliRunner, tmp_path: Path) -> None:
    path = tmp_path / "k3.json"
    path.write_text(dumps(serialize_instance(k3_half())))
    summary = invoke(runner, "verify", "stability", path, "--k", "1")["summary"]
    assert summary["alpha_center"] == "inf"
    assert summary["t"] == 1.5


def test_verify_falsify(runner: CliRunner, instance_path: Path) -> None:
    summary = invoke(
        runner, "verify", "falsify", instance_path, "--k", "2", "--alpha", "30"
    )["summary"]
    assert summary["result"] == "falsified"
    assert summary["samples"] == 1000
    assert summary["revalidated"] is True
    assert summary["sample_index"] == summary["witness"]["sample_index"]


def test_verify_falsify_survives(runner: CliRunner, instance_path: Path) -> None:
    summary = invoke(
        runner,
        "verify",
        "falsify",
        instance_path,
        "--k",
        "2",
        "--beta",
        "0.5",
        "--samples",
        "50",
    )["summary"]
    assert summary == {"result": "no_counterexample", "samples": 50, "witness": None}


@pytest.mark.parametrize("extra", [[], ["--alpha", "2", "--beta", "0.5"]])
def test_verify_falsify_needs_one_band(
    runner: CliRunner, instance_path: Path, extra: list[str]
) -> None:
    args = ["verify", "falsify", str(instance_path), "--k", "2", *extra]
    result = runner.invoke(cli, args)
    assert result.exit_code == 2
    assert "exactly one" in result.output


def test_verify_structural_checks(runner: CliRunner, instance_path: Path) -> None:
    separation = invoke(runner, "verify", "strict-sep", instance_path, "--k", "2")
    assert separation["summary"] == {"holds": True, "witness": None}

    margin = invoke(runner, "verify", "lemma3", instance_path, "--k", "2")
    assert margin["summary"]["holds"] is True
    assert margin["summary"]["alpha"] == pytest.approx(10.0)

    broken = invoke(
        runner, "verify", "lemma3", instance_path, "--k", "2", "--alpha", "20"
    )
    assert broken["summary"]["witness"] == [0, 1, 1, 2]

    linkage = invoke(
        runner,
        "verify",
        "linkage-cond",
        instance_path,
        "--k",
        "2",
        "--objective",
        "minsum",
    )
    assert linkage["summary"]["alpha"] == 6.0
    assert linkage["summary"]["holds"] is True
    assert linkage["summary"]["subsets_checked"] == 4


def test_linkage_condition_needs_alpha_with_singletons(
    runner: CliRunner, instance_path: Path
) -> None:
    args = ["verify", "linkage-cond", str(instance_path), "--k", "3"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 1
    assert "--alpha" in result.output


def test_invalid_instance_is_a_domain_error(
    runner: CliRunner, tmp_path: Path
) -> None:
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"d": [[0.0, 1.0], [2.0, 0.0]]}))
    result = runner.invoke(cli, ["solve", "kmedian", str(path), "--k", "1"])
    assert result.exit_code == 1
    assert "asymmetry" in result.output


def test_budget_option(runner: CliRunner, instance_path: Path) -> None:
    args = ["solve", "kmedian", str(instance_path), "--k", "2"]
    result = runner.invoke(cli, ["--budget", "1", *args])
    assert result.exit_code == 1
    assert "HINT" in result.output

    result = runner.invoke(cli, args, env={"STABLE_CLUSTER_BUDGET": "kmedian=5"})
    assert result.exit_code == 1

    result = runner.invoke(cli, ["--budget", "lots", *args])
    assert result.exit_code == 2


def test_run_returns_report(instance_path: Path) -> None:
    report = run(["solve", "kmedian", str(instance_path), "--k", "2"])
    assert report.exit_code == 0
    assert report.command == "solve kmedian"
    assert report.summary["cost"] == pytest.approx(0.2)


def test_run_reports_exit_codes(instance_path: Path, tmp_path: Path) -> None:
    assert run(["solve", "kmedian", str(instance_path)]).exit_code == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{")
    report = run(["verify", "stability", str(bad), "--k", "1"])
    assert report.exit_code == 1
    assert "Malformed" in report.summary["error"]
    assert report.command == "verify stability"


def test_instance_fixture_is_valid(instance_path: Path) -> None:
    data = json.loads(instance_path.read_text())
    assert MetricInstance.from_rows(data["d"]) == four_point()
