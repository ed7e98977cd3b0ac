"""The `stable-cluster` command line.

Every command prints (or writes with `-o`) a JSON run report holding the file
digests of its inputs, the files it wrote and a command-specific summary.
Domain errors exit with status 1, usage errors with status 2. Falsification
outcomes are part of the summary, never of the exit status.
"""

from __future__ import annotations

import functools
import math
import typing
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from .__version__ import __version__
from .config import BUDGET_ENV_VAR, Budget, parse_budget
from .exceptions import ParameterOutOfRange, StableClusterException
from .formats import (
    deserialize_instance,
    dumps,
    format_graph,
    loads,
    parse_graph,
    parse_order,
    parse_threedm,
    serialize_certificate,
    serialize_clustering,
    serialize_instance,
    serialize_report,
    serialize_tree,
    serialize_witness,
    to_csv,
)
from .linkage import average_linkage_tree, best_k_pruning
from .metric import MetricInstance, Objective
from .oracles import (
    is_perfect_dominating,
    min_dominating_set,
    solve_exact,
    triangle_partition_decide,
)
from .reductions import (
    make_kmedian_hardness_instance,
    make_minsum_hardness_instance,
    planted_batch,
    threedm_to_pdspp,
)
from .stability import (
    Additive,
    FalsificationWitness,
    Multiplicative,
    PerturbationMode,
    lemma3_margin_check,
    linkage_condition_check,
    resilience_falsifier,
    revalidate_witness,
    stability_profile,
    strict_separation_check,
)
from .streaming import CountingOracle, MatrixOracle, StepRecord, induce_partition
from .streaming import stream_kmedian as run_stream
from .utils.logging import LOG_LEVELS, configure_logging, get_logger
from .utils.misc import file_digest, json_number

if typing.TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from .metric import Clustering

logger = get_logger(__name__)

P = typing.ParamSpec("P")

INPUT_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, writable=True, path_type=Path)
OBJECTIVES = click.Choice([objective.value for objective in Objective])


@dataclass
class RunReport:
    command: str
    inputs: dict[str, str] = field(default_factory=dict)
    """Input path → sha256 digest."""

    outputs: list[str] = field(default_factory=list)
    summary: dict[str, typing.Any] = field(default_factory=dict)
    exit_code: int = 0


def domain_errors(func: Callable[P, RunReport]) -> Callable[P, RunReport]:
    """Turn package exceptions into click errors, which exit with status 1."""

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> RunReport:
        try:
            return func(*args, **kwargs)
        except StableClusterException as exc:
            logger.debug(f"domain_error type={type(exc).__name__}")
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _budget() -> Budget:
    return typing.cast("Budget", click.get_current_context().find_root().obj)


def _command_name() -> str:
    return " ".join(click.get_current_context().command_path.split()[1:])


def _read_instance(path: Path) -> tuple[MetricInstance, Clustering | None]:
    return deserialize_instance(loads(path.read_text(), what=f"instance {path}"))


def _inputs(*paths: Path | None) -> dict[str, str]:
    return {str(path): file_digest(path) for path in paths if path is not None}


def _rows(summary: dict[str, typing.Any]) -> list[dict[str, typing.Any]]:
    if "rows" in summary:
        return typing.cast("list[dict[str, typing.Any]]", summary["rows"])
    return [summary]


def _emit(
    report: RunReport, *, output: Path | None = None, fmt: str = "json"
) -> RunReport:
    """Write the report to `output` or stdout and return it."""
    text = to_csv(_rows(report.summary)) if fmt == "csv" else dumps(asdict(report))
    if output is None:
        click.echo(text, nl=False)
    else:
        output.write_text(text)
    return report


def output_options(func: Callable[P, RunReport]) -> Callable[P, RunReport]:
    func = click.option(
        "--format",
        "fmt",
        type=click.Choice(["json", "csv"]),
        default="json",
        show_default=True,
        help="Render the report as JSON or, for tabular summaries, CSV.",
    )(func)
    return click.option(
        "-o", "--output", type=OUTPUT_FILE, help="Write the report to a file."
    )(func)


@click.group()
@click.version_option(__version__, prog_name="stable-cluster")
@click.option(
    "--budget",
    envvar=BUDGET_ENV_VAR,
    default="",
    help="Enumeration budget override: N, or kmedian=N,minsum=N,domset=N.",
)
@click.option(
    "--log-level",
    type=click.Choice(list(LOG_LEVELS), case_sensitive=False),
    help="Log package events to stderr.",
)
@click.pass_context
def cli(ctx: click.Context, budget: str, log_level: str | None) -> None:
    """Generate, certify and solve stability-constrained clustering instances."""
    if log_level is not None:
        configure_logging(log_level)
    try:
        ctx.obj = parse_budget(budget)
    except ParameterOutOfRange as exc:
        raise click.BadParameter(str(exc), param_hint="--budget") from exc


# gen


@cli.group()
def gen() -> None:
    """Generate certified benchmark instances."""


def _write_generated(
    report: RunReport,
    output: Path | None,
    artifact: str,
    certificate: dict[str, typing.Any],
) -> None:
    """Write a generated artifact and its sidecar certificate next to it."""
    if output is None:
        return
    sidecar = output.with_suffix(".cert.json")
    output.write_text(artifact)
    sidecar.write_text(dumps(certificate))
    report.outputs.extend([str(output), str(sidecar)])


@gen.command("reduce-domset")
@click.option("--graph", "graph_path", type=INPUT_FILE, required=True)
@click.option("--d", "d", type=int, required=True, help="Dominating set size bound.")
@click.option(
    "--check-promise",
    is_flag=True,
    help="Verify that every dominating set of size at most d is perfect.",
)
@click.option("-o", "--output", type=OUTPUT_FILE, help="Instance JSON output path.")
@domain_errors
def gen_reduce_domset(
    *, graph_path: Path, d: int, check_promise: bool, output: Path | None
) -> RunReport:
    """Reduce a dominating set instance to k-median."""
    graph = parse_graph(graph_path.read_text())
    instance, k, certificate = make_kmedian_hardness_instance(
        graph, d, check_promise=check_promise, budget=_budget()
    )
    report = RunReport(_command_name(), _inputs(graph_path))
    report.summary = {"k": k, "certificate": serialize_certificate(certificate)}
    if output is None:
        report.summary["instance"] = serialize_instance(instance)
    artifact = dumps(serialize_instance(instance))
    _write_generated(report, output, artifact, report.summary["certificate"])
    return _emit(report)


@gen.command("reduce-trianglepart")
@click.option("--graph", "graph_path", type=INPUT_FILE, required=True)
@click.option("-o", "--output", type=OUTPUT_FILE, help="Instance JSON output path.")
@domain_errors
def gen_reduce_trianglepart(graph_path: Path, output: Path | None) -> RunReport:
    """Reduce a triangle partition instance to min-sum."""
    graph = parse_graph(graph_path.read_text())
    instance, k, certificate = make_minsum_hardness_instance(graph)
    report = RunReport(_command_name(), _inputs(graph_path))
    report.summary = {"k": k, "certificate": serialize_certificate(certificate)}
    if output is None:
        report.summary["instance"] = serialize_instance(instance)
    artifact = dumps(serialize_instance(instance))
    _write_generated(report, output, artifact, report.summary["certificate"])
    return _emit(report)


@gen.command("from-3dm")
@click.argument("source", type=INPUT_FILE)
@click.option("-o", "--output", type=OUTPUT_FILE, help="Graph text output path.")
@domain_errors
def gen_from_3dm(source: Path, output: Path | None) -> RunReport:
    """Build the dominating set instance of a 3D matching instance."""
    graph, d, certificate = threedm_to_pdspp(parse_threedm(source.read_text()))
    report = RunReport(_command_name(), _inputs(source))
    report.summary = {"d": d, "certificate": serialize_certificate(certificate)}
    if output is None:
        report.summary["graph"] = format_graph(graph)
    artifact = format_graph(graph)
    _write_generated(report, output, artifact, report.summary["certificate"])
    return _emit(report)


def _parse_sizes(
    ctx: click.Context, param: click.Parameter, value: str
) -> tuple[int, ...]:
    try:
        return tuple(int(item) for item in value.split(","))
    except ValueError:
        raise click.BadParameter("expected comma separated integers") from None


@gen.command("planted")
@click.option("--k", "k", type=int, required=True)
@click.option(
    "--sizes", required=True, callback=_parse_sizes, help="Cluster sizes, e.g. 5,5,5."
)
@click.option("--alpha", "alpha", type=float, required=True, help="Target stability.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--unit-range/--no-unit-range", default=True, show_default=True)
@click.option(
    "-o",
    "--output",
    type=OUTPUT_FILE,
    help="Instance JSON path; with --count > 1 the seed is added to the file name.",
)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@domain_errors
def gen_planted(
    *,
    k: int,
    sizes: tuple[int, ...],
    alpha: float,
    seed: int,
    count: int,
    jobs: int,
    unit_range: bool,
    output: Path | None,
    fmt: str,
) -> RunReport:
    """Plant well separated clusters; certify them exactly when small."""
    seeds = list(range(seed, seed + count))
    planted = planted_batch(k, sizes, alpha, seeds, unit_range=unit_range, jobs=jobs)
    report = RunReport(_command_name())
    rows = []
    for item_seed, item in zip(seeds, planted):
        alpha_center = item.report.alpha_center if item.report else None
        rows.append(
            {
                "seed": item_seed,
                "n": item.instance.n,
                "certified": item.certified,
                "attempts": item.attempts,
                "alpha_center": None
                if alpha_center is None
                else json_number(alpha_center),
            }
        )
        document = serialize_instance(item.instance, item.ground_truth)
        if output is None:
            rows[-1]["instance"] = document
            continue
        path = output
        if count > 1:
            path = output.with_name(f"{output.stem}-{item_seed}{output.suffix}")
        path.write_text(dumps(document))
        report.outputs.append(str(path))
    report.summary = {"rows": rows}
    return _emit(report, fmt=fmt)


# solve


@cli.group()
def solve() -> None:
    """Solve an instance exactly or through average linkage."""


def _solve(
    instance_path: Path,
    k: int,
    objective: Objective,
    *,
    linkage: bool,
    tree_out: Path | None,
    output: Path | None,
    fmt: str,
) -> RunReport:
    instance, _ = _read_instance(instance_path)
    report = RunReport(_command_name(), _inputs(instance_path))
    if linkage:
        tree = average_linkage_tree(instance)
        clustering, cost = best_k_pruning(tree, instance, k, objective=objective)
        report.summary = {"method": "linkage", "cost": cost.value}
        if tree_out is not None:
            tree_out.write_text(dumps(serialize_tree(tree)))
            report.outputs.append(str(tree_out))
        else:
            report.summary["tree"] = serialize_tree(tree)
    else:
        result = solve_exact(instance, k, objective, budget=_budget())
        clustering = result.clustering
        report.summary = {
            "method": "exact",
            "cost": result.cost.value,
            "unique_partition": result.unique_partition,
            "optimal_partitions": result.all_optimal_count,
        }
    report.summary.update(serialize_clustering(clustering))
    return _emit(report, output=output, fmt=fmt)


def solve_options(func: Callable[P, RunReport]) -> Callable[P, RunReport]:
    func = output_options(func)
    func = click.option(
        "--tree-out", type=OUTPUT_FILE, help="Write the merge tree JSON here."
    )(func)
    func = click.option(
        "--exact/--linkage",
        default=True,
        help="Brute-force oracle (default) or average linkage with tree pruning.",
    )(func)
    func = click.option("--k", "k", type=int, required=True)(func)
    return click.argument("instance_path", type=INPUT_FILE)(func)


@solve.command("kmedian")
@solve_options
@domain_errors
def solve_kmedian(
    *,
    instance_path: Path,
    k: int,
    exact: bool,
    tree_out: Path | None,
    output: Path | None,
    fmt: str,
) -> RunReport:
    """Find an optimal k-median clustering."""
    return _solve(
        instance_path,
        k,
        Objective.KMEDIAN,
        linkage=not exact,
        tree_out=tree_out,
        output=output,
        fmt=fmt,
    )


@solve.command("minsum")
@solve_options
@domain_errors
def solve_minsum(
    *,
    instance_path: Path,
    k: int,
    exact: bool,
    tree_out: Path | None,
    output: Path | None,
    fmt: str,
) -> RunReport:
    """Find an optimal min-sum clustering."""
    return _solve(
        instance_path,
        k,
        Objective.MINSUM,
        linkage=not exact,
        tree_out=tree_out,
        output=output,
        fmt=fmt,
    )


# stream


@cli.group()
def stream() -> None:
    """Replay an instance as a one-pass stream."""


@stream.command("kmedian")
@click.argument("instance_path", type=INPUT_FILE)
@click.option("--k", "k", type=int, required=True)
@click.option(
    "--order",
    type=click.Choice(["given", "random", "reverse"]),
    default="given",
    show_default=True,
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--order-file",
    type=INPUT_FILE,
    help="Replay file with one point index per line; overrides --order.",
)
@output_options
@domain_errors
def stream_kmedian(
    instance_path: Path,
    k: int,
    order: str,
    seed: int,
    order_file: Path | None,
    output: Path | None,
    fmt: str,
) -> RunReport:
    """Recover k-median centers in one pass and induce the partition."""
    instance, _ = _read_instance(instance_path)
    if order_file is not None:
        sequence = parse_order(order_file.read_text())
    elif order == "random":
        sequence = np.random.default_rng(seed).permutation(instance.n).tolist()
    elif order == "reverse":
        sequence = list(reversed(range(instance.n)))
    else:
        sequence = list(range(instance.n))

    oracle = CountingOracle(MatrixOracle(instance))
    peak = 0

    def observe(record: StepRecord) -> None:
        nonlocal peak
        peak = max(peak, record.peak)

    centers = run_stream(instance, sequence, k, oracle=oracle, observer=observe)
    report = RunReport(_command_name(), _inputs(instance_path, order_file))
    report.summary = {
        "centers": list(centers),
        "order": [int(point) for point in sequence],
        "distance_evaluations": oracle.calls,
        "peak_candidates": peak,
        "assignment": list(induce_partition(instance, centers).assignment),
    }
    return _emit(report, output=output, fmt=fmt)


# verify


@cli.group()
def verify() -> None:
    """Measure and check stability properties."""


def verify_options(func: Callable[P, RunReport]) -> Callable[P, RunReport]:
    func = output_options(func)
    func = click.option(
        "--objective", type=OBJECTIVES, default="kmedian", show_default=True
    )(func)
    func = click.option("--k", "k", type=int, required=True)(func)
    return click.argument("instance_path", type=INPUT_FILE)(func)


@verify.command("stability")
@verify_options
@domain_errors
def verify_stability(
    instance_path: Path, k: int, objective: str, output: Path | None, fmt: str
) -> RunReport:
    """Certify the optimum and measure its stability parameters."""
    instance, _ = _read_instance(instance_path)
    profile = stability_profile(instance, k, Objective(objective), budget=_budget())
    report = RunReport(_command_name(), _inputs(instance_path))
    report.summary = serialize_report(profile)
    return _emit(report, output=output, fmt=fmt)


def _falsification_summary(
    witness: FalsificationWitness | None, samples: int, *, revalidated: bool | None
) -> dict[str, typing.Any]:
    if witness is None:
        return {"result": "no_counterexample", "samples": samples, "witness": None}
    return {
        "result": "falsified",
        "samples": samples,
        "reason": witness.reason.value,
        "sample_index": witness.sample_index,
        "revalidated": revalidated,
        "witness": serialize_witness(witness),
    }


@verify.command("falsify")
@verify_options
@click.option("--alpha", "alpha", type=float, help="Multiplicative band [1, alpha].")
@click.option("--beta", "beta", type=float, help="Additive band [0, beta].")
@click.option("--samples", type=click.IntRange(min=0), default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@domain_errors
def verify_falsify(
    instance_path: Path,
    k: int,
    objective: str,
    output: Path | None,
    fmt: str,
    alpha: float | None,
    beta: float | None,
    samples: int,
    seed: int,
    jobs: int,
) -> RunReport:
    """Sample perturbations looking for one that changes the optimum."""
    if (alpha is None) == (beta is None):
        raise click.UsageError("Pass exactly one of --alpha and --beta.")
    mode: PerturbationMode
    if alpha is not None:
        mode = Multiplicative(alpha)
    else:
        assert beta is not None
        mode = Additive(beta)
    instance, _ = _read_instance(instance_path)
    chosen = Objective(objective)
    result = resilience_falsifier(
        instance, k, chosen, mode, samples, seed, jobs=jobs, budget=_budget()
    )
    witness = result if isinstance(result, FalsificationWitness) else None
    revalidated = None
    if witness is not None:
        revalidated = revalidate_witness(
            instance, k, chosen, witness, budget=_budget()
        )
    report = RunReport(_command_name(), _inputs(instance_path))
    report.summary = _falsification_summary(witness, samples, revalidated=revalidated)
    return _emit(report, output=output, fmt=fmt)


@verify.command("strict-sep")
@verify_options
@domain_errors
def verify_strict_sep(
    instance_path: Path, k: int, objective: str, output: Path | None, fmt: str
) -> RunReport:
    """Check that the optimum is strictly separated."""
    instance, _ = _read_instance(instance_path)
    optimum = solve_exact(instance, k, Objective(objective), budget=_budget())
    result = strict_separation_check(instance, optimum.clustering)
    report = RunReport(_command_name(), _inputs(instance_path))
    report.summary = {
        "holds": result.holds,
        "witness": list(result.witness) if result.witness else None,
    }
    return _emit(report, output=output, fmt=fmt)


@verify.command("lemma3")
@verify_options
@click.option(
    "--alpha",
    "alpha",
    type=float,
    help="Stability to check the margin for; defaults to the certified alpha_center.",
)
@domain_errors
def verify_lemma3(
    instance_path: Path,
    k: int,
    objective: str,
    output: Path | None,
    fmt: str,
    alpha: float | None,
) -> RunReport:
    """Check the center margin implied by center stability."""
    instance, _ = _read_instance(instance_path)
    profile = stability_profile(instance, k, Objective(objective), budget=_budget())
    alpha = profile.alpha_center if alpha is None else alpha
    result = lemma3_margin_check(instance, profile.clustering, alpha)
    report = RunReport(_command_name(), _inputs(instance_path))
    report.summary = {
        "alpha": json_number(alpha),
        "holds": result.holds,
        "witness": list(result.witness) if result.witness else None,
    }
    return _emit(report, output=output, fmt=fmt)


@verify.command("linkage-cond")
@verify_options
@click.option(
    "--alpha",
    "alpha",
    type=float,
    help="Condition strength; defaults to 3t of the certified optimum.",
)
@click.option("--subset-budget", type=click.IntRange(min=1), default=1000)
@click.option("--seed", type=int, default=0, show_default=True)
@domain_errors
def verify_linkage_cond(
    instance_path: Path,
    k: int,
    objective: str,
    output: Path | None,
    fmt: str,
    alpha: float | None,
    subset_budget: int,
    seed: int,
) -> RunReport:
    """Check that no subset of an optimal cluster prefers a rival cluster."""
    instance, _ = _read_instance(instance_path)
    profile = stability_profile(instance, k, Objective(objective), budget=_budget())
    alpha = 3.0 * profile.t if alpha is None else alpha
    if math.isinf(alpha):
        raise ParameterOutOfRange("The optimum has a singleton cluster; pass --alpha.")
    result = linkage_condition_check(
        instance, profile.clustering, alpha, subset_budget, seed=seed
    )
    report = RunReport(_command_name(), _inputs(instance_path))
    report.summary = {
        "alpha": alpha,
        "holds": result.holds,
        "subsets_checked": result.subsets_checked,
        "witness": None
        if result.witness is None
        else [list(part) for part in result.witness],
    }
    return _emit(report, output=output, fmt=fmt)


# oracle


@cli.group()
def oracle() -> None:
    """Run the exact combinatorial oracles."""


@oracle.command("domset")
@click.option("--graph", "graph_path", type=INPUT_FILE, required=True)
@click.option("--max-size", type=int, required=True)
@click.option("--must-include", type=int, multiple=True, help="Required vertex.")
@output_options
@domain_errors
def oracle_domset(
    graph_path: Path,
    max_size: int,
    must_include: tuple[int, ...],
    output: Path | None,
    fmt: str,
) -> RunReport:
    """Find a minimum dominating set of bounded size."""
    graph = parse_graph(graph_path.read_text())
    found = min_dominating_set(
        graph, max_size, must_include=must_include, budget=_budget()
    )
    report = RunReport(_command_name(), _inputs(graph_path))
    report.summary = {
        "size": found.size if found else None,
        "vertices": list(found.vertices) if found else None,
        "perfect": is_perfect_dominating(graph, found.vertices) if found else None,
    }
    return _emit(report, output=output, fmt=fmt)


@oracle.command("triangle-partition")
@click.option("--graph", "graph_path", type=INPUT_FILE, required=True)
@output_options
@domain_errors
def oracle_triangle_partition(
    graph_path: Path, output: Path | None, fmt: str
) -> RunReport:
    """Decide whether a graph splits into vertex-disjoint triangles."""
    result = triangle_partition_decide(parse_graph(graph_path.read_text()))
    report = RunReport(_command_name(), _inputs(graph_path))
    report.summary = {
        "feasible": result.feasible,
        "witness": [list(t) for t in result.witness] if result.witness else None,
    }
    return _emit(report, output=output, fmt=fmt)


def run(argv: Sequence[str]) -> RunReport:
    """Run one command in-process and return its report instead of exiting.

    Errors are reported through `RunReport.exit_code`: 2 for usage errors, 1 for
    domain errors.
    """
    command = " ".join(arg for arg in argv[:2] if not arg.startswith("-"))
    try:
        result = cli.main(
            args=list(argv), prog_name="stable-cluster", standalone_mode=False
        )
    except click.ClickException as exc:
        exc.show()
        return RunReport(
            command, summary={"error": exc.format_message()}, exit_code=exc.exit_code
        )
    if not isinstance(result, RunReport):
        return RunReport(command)
    return result


def main() -> None:
    cli(prog_name="stable-cluster")
