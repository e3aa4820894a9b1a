"""
Command-line entry point: generators, exact tables, densities and experiments
"""
import json
from functools import partial
from pathlib import Path
from typing import Any, Dict, Optional

import structlog
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from multigraph_limits.config import get_settings, load_config_file, merge_config
from multigraph_limits.densities import graphon_density_mc, hom_density_mc, split_streams
from multigraph_limits.errors import ConfigError, MultigraphError
from multigraph_limits.exact_oracle import (
    DistributionTable,
    enumerate_and_solve,
    enumerate_multigraphs,
    exact_pag_distribution,
    stationary_probability,
)
from multigraph_limits.experiments import (
    EXPERIMENT_DEFAULTS,
    ExperimentRunner,
    emit_plot_data,
    pattern_label,
    render_report,
)
from multigraph_limits.generators import RngStream, configuration_model, pag
from multigraph_limits.graph_core import AdjacencyMatrix, DegreeSequence
from multigraph_limits.logging_config import configure_logging
from multigraph_limits.models import (
    ChainKind,
    DensityOutput,
    ExperimentConfig,
    ExperimentName,
    ExperimentReport,
    OutputFormat,
)
from multigraph_limits.multigraphon import multigraphon_from_spec

logger = structlog.get_logger(__name__)

app = typer.Typer(
    name="multigraph-limits",
    help="Dense random multigraphs: preferential attachment, configuration model and their multigraphon limits",
    add_completion=False,
    no_args_is_help=True,
)
stderr_console = Console(stderr=True)

USAGE_ERROR = 2
FAILED_CHECK = 1


@app.callback()
def setup(log_json: bool = typer.Option(False, "--log-json", help="Render log events as JSON lines")) -> None:
    settings = get_settings()
    configure_logging(settings.log_level, json=log_json or settings.log_json)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        typer.echo(text, nl=False)
        return
    out.write_text(text, encoding="utf-8", newline="\n")
    logger.info("wrote output", path=str(out), size=len(text))


def _fail(message: str) -> typer.Exit:
    stderr_console.print(f"[red]error:[/red] {message}")
    return typer.Exit(code=USAGE_ERROR)


def _read_matrix(path: Path) -> AdjacencyMatrix:
    """Edge-list file, or a JSON array of rows"""
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        return AdjacencyMatrix(json.loads(text), validate=True)
    return AdjacencyMatrix.from_edge_list(text)


def _edge_count(n: int, m: Optional[int], rho: Optional[float]) -> int:
    if (m is None) == (rho is None):
        raise ConfigError("give exactly one of --m and --rho")
    return m if m is not None else int(rho * n * n // 2)


@app.command()
def gen(
    n: int = typer.Option(..., "--n", min=1, help="Vertex count"),
    m: Optional[int] = typer.Option(None, "--m", min=1, help="Edge count"),
    rho: Optional[float] = typer.Option(None, "--rho", help="Edge density; m = floor(rho n^2 / 2)"),
    kappa: float = typer.Option(1.0, "--kappa", help="Preferential attachment parameter"),
    seed: int = typer.Option(0, "--seed", min=0, help="Master seed"),
    method: str = typer.Option("dirichlet", "--method", help="Urn sampler: dirichlet or sequential"),
    degrees: Optional[str] = typer.Option(
        None, "--degrees", help="Comma-separated degree sequence; samples the configuration model instead"
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="Output file; stdout when missing"),
) -> None:
    """Sample a PAG (or a configuration model) and print its edge list"""
    try:
        rng = RngStream(seed)
        if degrees is not None:
            sequence = DegreeSequence(int(part) for part in degrees.split(",") if part.strip())
            if sequence.n != n:
                raise ConfigError(f"--degrees has {sequence.n} entries, --n is {n}")
            graph = configuration_model(sequence, rng)
        else:
            if method not in ("dirichlet", "sequential"):
                raise ConfigError(f"unknown urn method {method!r}")
            graph = pag(n, _edge_count(n, m, rho), kappa, rng, method=method)
    except (MultigraphError, ValueError) as e:
        raise _fail(str(e))
    _emit(graph.to_edge_list(), out)


@app.command()
def exact(
    n: int = typer.Option(..., "--n", min=1, help="Vertex count"),
    m: int = typer.Option(..., "--m", min=1, help="Edge count"),
    kappa: float = typer.Option(1.0, "--kappa", help="Preferential attachment parameter"),
    table: str = typer.Option("pag", "--table", help="pag, stationary or chain"),
    chain: ChainKind = typer.Option(ChainKind.EDGE_RECONNECT, "--chain", help="Chain solved by --table chain"),
    detach_first: bool = typer.Option(False, "--detach-first", help="Edge chain reads degrees after detaching"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output file; stdout when missing"),
) -> None:
    """Print an exact finite law as JSON keyed by canonical edge lists"""
    try:
        if table == "pag":
            law = exact_pag_distribution(n, m, kappa)
        elif table == "stationary":
            law = DistributionTable(
                {graph: stationary_probability(graph, kappa) for graph in enumerate_multigraphs(n, m)}
            )
        elif table == "chain":
            law = enumerate_and_solve(n, m, kappa, chain, detach_first=detach_first)
        else:
            raise ConfigError(f"unknown table {table!r}")
    except (MultigraphError, ValueError) as e:
        raise _fail(str(e))
    _emit(law.to_json() + "\n", out)


@app.command()
def density(
    pattern: Path = typer.Option(..., "--pattern", exists=True, dir_okay=False, help="Pattern as edge list or JSON rows"),
    graph: Optional[Path] = typer.Option(None, "--graph", exists=True, dir_okay=False, help="Target graph file"),
    kernel: Optional[str] = typer.Option(
        None, "--kernel", help="Target multigraphon as a JSON document or a path to one"
    ),
    samples: int = typer.Option(100_000, "--samples", min=1, help="Monte Carlo sample count"),
    seed: int = typer.Option(0, "--seed", min=0, help="Master seed"),
    streams: int = typer.Option(1, "--streams", min=1, help="Independent child streams to pool"),
    injective: bool = typer.Option(False, "--injective", help="Sample injective maps only (graph target)"),
) -> None:
    """Estimate the induced density of a pattern in a graph or a multigraphon"""
    try:
        if (graph is None) == (kernel is None):
            raise ConfigError("give exactly one of --graph and --kernel")
        pattern_matrix = _read_matrix(pattern)
        if graph is not None:
            estimator = partial(hom_density_mc, pattern_matrix, _read_matrix(graph), injective=injective)
        else:
            document = kernel if kernel.lstrip().startswith("{") else Path(kernel).read_text(encoding="utf-8")
            estimator = partial(graphon_density_mc, pattern_matrix, multigraphon_from_spec(document))
        estimate = split_streams(estimator, samples, RngStream(seed), streams)
    except ValidationError as e:
        raise _fail(f"invalid multigraphon document: {e}")
    except (MultigraphError, ValueError, OSError) as e:
        raise _fail(str(e))
    output = DensityOutput(
        pattern=pattern_label(pattern_matrix), mean=estimate.mean, stderr=estimate.stderr, samples=estimate.samples
    )
    typer.echo(output.model_dump_json())


def _print_checks(report: ExperimentReport) -> None:
    table = Table(title=f"{report.experiment}: {'PASS' if report.passed else 'FAIL'}")
    table.add_column("check")
    table.add_column("result")
    table.add_column("detail", overflow="fold")
    for check in report.checks:
        table.add_row(check.name, "[green]pass[/green]" if check.passed else "[red]fail[/red]", check.detail)
    stderr_console.print(table)


def build_config(name: ExperimentName, config_file: Optional[Path], flags: Dict[str, Any]) -> ExperimentConfig:
    """Defaults < config file < flags, validated into an ExperimentConfig"""
    merged = merge_config(EXPERIMENT_DEFAULTS[name], load_config_file(config_file), flags)
    merged["experiment"] = name
    return ExperimentConfig(**merged)


@app.command()
def experiment(
    name: ExperimentName = typer.Argument(..., help="Experiment to run"),
    n: Optional[int] = typer.Option(None, "--n", help="Vertex count"),
    m: Optional[int] = typer.Option(None, "--m", help="Edge count"),
    rho: Optional[float] = typer.Option(None, "--rho", help="Edge density"),
    kappa: Optional[float] = typer.Option(None, "--kappa", help="Preferential attachment parameter"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed"),
    samples: Optional[int] = typer.Option(None, "--samples", help="Monte Carlo sample budget"),
    replicas: Optional[int] = typer.Option(None, "--replicas", help="Seed replicas"),
    sizes: Optional[str] = typer.Option(None, "--sizes", help="Comma-separated n values for a sweep"),
    out: Optional[Path] = typer.Option(None, "--out", help="Report file; stdout when missing"),
    output_format: Optional[OutputFormat] = typer.Option(None, "--format", help="Report format"),
    config_file: Optional[Path] = typer.Option(None, "--config", help="Flat key=value config file"),
) -> None:
    """Run a verification experiment; exit 0 when every check passes, 1 otherwise"""
    flags = {
        "n": n,
        "m": m,
        "rho": rho,
        "kappa": kappa,
        "seed": seed,
        "samples": samples,
        "replicas": replicas,
        "sizes": sizes,
        "out": out,
        "format": output_format,
    }
    try:
        config = build_config(name, config_file, flags)
        report = ExperimentRunner().run(config)
    except ValidationError as e:
        raise _fail(f"invalid configuration: {e}")
    except MultigraphError as e:
        raise _fail(str(e))

    _emit(render_report(report, config.format), config.out)
    _print_checks(report)
    if not report.passed:
        raise typer.Exit(code=FAILED_CHECK)


@app.command("plot-data")
def plot_data(
    report_path: Path = typer.Argument(..., exists=True, dir_okay=False, help="Saved JSON report"),
    out: Optional[Path] = typer.Option(None, "--out", help="CSV file; stdout when missing"),
) -> None:
    """Convert a saved JSON report into tidy CSV"""
    try:
        report = ExperimentReport.model_validate_json(report_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise _fail(f"not an experiment report: {e}")
    _emit(emit_plot_data(report), out)


if __name__ == "__main__":
    app()
