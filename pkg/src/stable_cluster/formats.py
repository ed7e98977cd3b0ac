"""Conversion between package objects and their file representations.

JSON payloads are built as plain dicts by `serialize_*()` helpers and turned
back into objects by the matching `deserialize_*()` helpers. Text formats
(graphs, 3DM instances, stream orders) have `parse_*()` and `format_*()`
helpers. Infinite values are written as the string `"inf"`.
"""

from __future__ import annotations

import csv
import io
import json
import typing

from .exceptions import InvalidClustering, InvalidGraph, InvalidInstance
from .linkage import Merge, MergeTree
from .metric import Clustering, MetricInstance
from .oracles import Graph
from .reductions import ReductionCertificate, SourceKind, ThreeDMInstance
from .stability import Additive, Multiplicative, PerturbationMode
from .utils.misc import json_number, parse_json_number

if typing.TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from .stability import FalsificationWitness, StabilityReport


def dumps(payload: typing.Any) -> str:
    """Render a payload as deterministic JSON."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def loads(text: str, *, what: str = "JSON document") -> typing.Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInstance(f"Malformed {what}: {exc}") from None


def serialize_clustering(clustering: Clustering) -> dict[str, typing.Any]:
    data: dict[str, typing.Any] = {"assignment": list(clustering.assignment)}
    if clustering.centers is not None:
        data["centers"] = list(clustering.centers)
    return data


def deserialize_clustering(data: Mapping[str, typing.Any]) -> Clustering:
    try:
        assignment = tuple(int(label) for label in data["assignment"])
        centers = data.get("centers")
    except (KeyError, TypeError, ValueError):
        raise InvalidClustering(
            "A clustering needs an integer 'assignment' list."
        ) from None
    if centers is not None:
        return Clustering(assignment, len(centers), tuple(centers))
    return Clustering(assignment, max(assignment, default=-1) + 1)


def serialize_instance(
    instance: MetricInstance, ground_truth: Clustering | None = None
) -> dict[str, typing.Any]:
    data: dict[str, typing.Any] = {"n": instance.n, "d": instance.dist.tolist()}
    if ground_truth is not None:
        data["ground_truth"] = serialize_clustering(ground_truth)
    return data


def deserialize_instance(
    data: typing.Any, *, strict_positive: bool = True
) -> tuple[MetricInstance, Clustering | None]:
    """Load an instance document, validating everything but the triangle inequality.

    Raises:
        InvalidInstance: If the document is malformed, the matrix is ragged or
            violates symmetry, nonnegativity or the zero diagonal, or `n`
            disagrees with the matrix.

    """
    if not isinstance(data, dict) or "d" not in data:
        raise InvalidInstance("An instance document needs a 'd' matrix.")
    rows = data["d"]
    if not isinstance(rows, list) or any(not isinstance(row, list) for row in rows):
        raise InvalidInstance("'d' must be a list of rows.")
    if len({len(row) for row in rows}) > 1:
        raise InvalidInstance("Distance matrix rows are ragged.")
    instance = MetricInstance.from_rows(rows, strict_positive=strict_positive)
    if "n" in data and data["n"] != instance.n:
        raise InvalidInstance(
            f"'n' is {data['n']} but the matrix has {instance.n} rows."
        )
    ground_truth = None
    if data.get("ground_truth") is not None:
        ground_truth = deserialize_clustering(data["ground_truth"])
    return instance, ground_truth


def _pairs(text: str, what: str, width: int) -> tuple[list[int], list[list[int]]]:
    lines = [line.split() for line in text.splitlines() if line.strip()]
    try:
        rows = [[int(token) for token in line] for line in lines]
    except ValueError:
        raise InvalidGraph(f"{what} files contain integers only.") from None
    if not rows or len(rows[0]) != 2:
        raise InvalidGraph(f"The first line of a {what} file holds two counts.")
    header, body = rows[0], rows[1:]
    if len(body) != header[1] or any(len(row) != width for row in body):
        raise InvalidGraph(
            f"Expected {header[1]} lines of {width} integers after the {what} header."
        )
    return header, body


def parse_graph(text: str) -> Graph:
    """Parse `n m` followed by `m` lines `u v` of 0-based vertex indices."""
    (n, _), edges = _pairs(text, "graph", 2)
    return Graph(n, [(u, v) for u, v in edges])


def format_graph(graph: Graph) -> str:
    lines = [f"{graph.n} {len(graph.edges)}"]
    lines.extend(f"{u} {v}" for u, v in sorted(graph.edges))
    return "\n".join(lines) + "\n"


def parse_threedm(text: str) -> ThreeDMInstance:
    """Parse `m L` followed by `L` lines `x y z` of 0-based element indices."""
    (m, _), triples = _pairs(text, "3DM", 3)
    return ThreeDMInstance(m, tuple((x, y, z) for x, y, z in triples))


def format_threedm(instance: ThreeDMInstance) -> str:
    lines = [f"{instance.m} {instance.size}"]
    lines.extend(f"{x} {y} {z}" for x, y, z in instance.triples)
    return "\n".join(lines) + "\n"


def parse_order(text: str) -> list[int]:
    """Parse a stream replay file: one point index per line."""
    try:
        return [int(line) for line in text.split()]
    except ValueError:
        raise InvalidInstance("Stream order files hold one integer per line.") from None


def serialize_certificate(certificate: ReductionCertificate) -> dict[str, typing.Any]:
    return {
        "source_kind": certificate.source_kind.value,
        "parameters": {
            "n": certificate.n,
            "k": certificate.k,
            "d": certificate.d,
            "m": certificate.m,
        },
        "expected_cost": certificate.expected_cost,
        "stability_floor": certificate.stability_floor,
        "beta_floor": certificate.beta_floor,
        "promise_verified": certificate.promise_verified,
    }


def deserialize_certificate(data: Mapping[str, typing.Any]) -> ReductionCertificate:
    try:
        parameters = data["parameters"]
        return ReductionCertificate(
            source_kind=SourceKind(data["source_kind"]),
            n=parameters["n"],
            k=parameters.get("k"),
            d=parameters.get("d"),
            m=parameters.get("m"),
            expected_cost=data.get("expected_cost"),
            stability_floor=data.get("stability_floor"),
            beta_floor=data.get("beta_floor"),
            promise_verified=data.get("promise_verified"),
        )
    except (KeyError, TypeError, ValueError, AttributeError):
        raise InvalidInstance(
            "Certificate documents need source_kind and parameters.n."
        ) from None


def serialize_report(report: StabilityReport) -> dict[str, typing.Any]:
    data: dict[str, typing.Any] = {
        "objective": report.objective.value,
        "alpha_center": json_number(report.alpha_center),
        "alpha_minsum": json_number(report.alpha_minsum),
        "beta_center": report.beta_center,
        "beta_minsum": report.beta_minsum,
        "t": json_number(report.t),
        "strict_separation": report.strict_separation,
        "unique_partition": report.unique_partition,
    }
    data.update(serialize_clustering(report.clustering))
    return data


def report_numbers(data: Mapping[str, typing.Any]) -> dict[str, float | None]:
    """Read the numeric fields of a serialized report back as floats."""
    numbers: dict[str, float | None] = {}
    for key in ("alpha_center", "alpha_minsum", "t"):
        numbers[key] = parse_json_number(data[key])
    for key in ("beta_center", "beta_minsum"):
        numbers[key] = None if data[key] is None else float(data[key])
    return numbers


def serialize_tree(tree: MergeTree) -> list[dict[str, typing.Any]]:
    return [
        {"left": merge.left, "right": merge.right, "height": merge.height}
        for merge in tree.merges
    ]


def deserialize_tree(data: Sequence[Mapping[str, typing.Any]]) -> MergeTree:
    merges = tuple(
        Merge(int(item["left"]), int(item["right"]), float(item["height"]))
        for item in data
    )
    return MergeTree(len(merges) + 1, merges)


def serialize_mode(mode: PerturbationMode) -> dict[str, typing.Any]:
    if isinstance(mode, Multiplicative):
        return {"kind": "multiplicative", "alpha": mode.alpha}
    return {"kind": "additive", "beta": mode.beta}


def deserialize_mode(data: Mapping[str, typing.Any]) -> PerturbationMode:
    if data["kind"] == "multiplicative":
        return Multiplicative(float(data["alpha"]))
    return Additive(float(data["beta"]))


def serialize_witness(witness: FalsificationWitness) -> dict[str, typing.Any]:
    return {
        "result": "falsified",
        "reason": witness.reason.value,
        "sample_index": witness.sample_index,
        "mode": serialize_mode(witness.mode),
        "scale": witness.scale.tolist(),
        "perturbed": witness.perturbed.dist.tolist(),
        "original_optimum": serialize_clustering(witness.original_optimum),
        "perturbed_optimum": serialize_clustering(witness.perturbed_optimum),
    }


def to_csv(rows: Sequence[Mapping[str, typing.Any]]) -> str:
    """Render flat records as CSV, columns in the order of the first record."""
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(
            {
                key: json.dumps(value) if isinstance(value, (list, dict)) else value
                for key, value in row.items()
            }
        )
    return buffer.getvalue()
