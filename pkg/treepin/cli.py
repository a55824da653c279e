"""Command-line interface for treepin."""
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, NoReturn, Optional, Tuple

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .core.closedform import (
    beta_c,
    curve_table,
    f_gap,
    mean_g,
    phi,
    second_moment_hd,
)
from .core.config import Config, RunConfig, config, load_run_config
from .core.disorder import has_finite_support, log_mgf, support
from .core.exceptions import (
    CheckFailedError,
    ConfigurationError,
    DomainError,
    InvalidParameterError,
    TreePinError,
    WrongModelKindError,
)
from .core.models import NoDefect, Realization, SubtreeConstant
from .core.montecarlo import (
    concentration_profile,
    empirical_pinned_profile,
    estimate_free_energy,
    martingale_trace,
    phase_scan,
)
from .core.treesim import (
    MAX_ASSIGNMENTS,
    brute_force_log_partition,
    exact_expectation_oracle,
    log_partition,
    st_decomposition,
)
from .utils.cache import critical_cache
from .utils.formatting import (
    ensure_output_dir,
    format_cell,
    model_label,
    output_filename,
    write_table,
)
from .utils.records import load_record, make_record, record_path, save_record
from .utils.rng import replica_seed

console = Console()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3

ORACLE_MAX_DEPTH = 8
ORACLE_MAX_SEEDS = 20
ORACLE_EXPECTATION_DEPTH = 3
DISPLAY_ROWS = 25


@dataclass
class CommandOutput:
    """Tables to write, the results payload for the run record, and failed checks."""
    title: str
    tables: Dict[str, Tuple[List[str], List[Dict[str, Any]]]]
    results: Dict[str, Any]
    summary: List[Tuple[str, Any]] = field(default_factory=list)
    failed: List[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Command bodies (pure functions of the run config)
# ---------------------------------------------------------------------------

def compute_critical(run: RunConfig) -> CommandOutput:
    bulk, d = run.model.bulk, run.model.d
    crit = beta_c(bulk, d)
    rows = [
        {"beta": b, "lambda": log_mgf(bulk, b), "phi": phi(bulk, d, b), "f_gap": f_gap(bulk, d, b)}
        for b in run.beta_grid
    ]
    return CommandOutput(
        title="Critical point",
        tables={"": (["beta", "lambda", "phi", "f_gap"], rows)},
        results={**crit.to_dict(), "rows": rows},
        summary=[("beta_c", crit.beta_c), ("lambda(beta_c)", crit.lambda_at_beta_c),
                 ("lambda(beta_c) + log d", crit.phi_cap)],
    )


def compute_phase_diagram(run: RunConfig) -> CommandOutput:
    model = run.model
    if not isinstance(model.defect, SubtreeConstant):
        raise WrongModelKindError("phase-diagram needs a subtree_constant defect")
    betas = [b for b in run.beta_grid if b > 0.0]
    if not betas:
        raise InvalidParameterError("beta_grid has no positive values")

    cells = phase_scan(model, run.beta_grid, run.u_grid, run.n, run.replicas, run.seed,
                       threads=run.threads, tol=run.boundary_tol)
    top = max(betas)
    curve_betas = [top * (i + 1) / run.curve_points for i in range(run.curve_points)]
    curves = curve_table(model.bulk, model.d, model.d1, curve_betas)
    bad = [row["beta"] for row in curves if row["J"] is not None and not row["J"] < row["F"]]
    if bad:
        raise CheckFailedError(f"J >= F at beta = {bad[:5]}")

    crit = beta_c(model.bulk, model.d)
    cell_rows = [c.to_dict() for c in cells]
    counts: Dict[str, int] = {}
    for c in cells:
        counts[c.label.value] = counts.get(c.label.value, 0) + 1
    return CommandOutput(
        title="Phase diagram",
        tables={
            "": (["beta", "u", "label", "F", "J", "F_at_beta_c", "free_energy_mean",
                  "free_energy_stderr", "pinned_fraction_mean"], cell_rows),
            "curves": (["beta", "F", "J", "F_at_beta_c", "u_c_br", "u_c_det"], curves),
        },
        results={"beta_c": crit.beta_c, "cells": cell_rows, "curves": curves},
        summary=[("beta_c", crit.beta_c), ("cells", len(cells))] + sorted(counts.items()),
    )


def compute_free_energy(run: RunConfig) -> CommandOutput:
    report = estimate_free_energy(run.model, run.beta, run.potential, run.n_list, run.replicas,
                                  run.seed, threads=run.threads, extrapolate=run.extrapolate)
    rows = []
    for est in report.estimates:
        lower, upper = report.anchors_for(est.n)
        rows.append({**est.to_dict(), "anchor_lower": lower, "anchor_upper": upper,
                     "anchor_name": report.anchor_name})
    columns = ["n", "replicas", "mean", "stderr", "min", "max", "anchor_lower", "anchor_upper", "anchor_name"]
    summary = [("anchor", report.anchor_name), ("anchor lower", report.anchor_lower),
               ("anchor upper", report.anchor_upper)]
    if report.extrapolated is not None:
        summary.append(("1/n extrapolation", report.extrapolated))
    return CommandOutput(
        title="Free energy ladder",
        tables={"": (columns, rows)},
        results=report.to_dict(),
        summary=summary,
    )


def _deviation(a: float, b: float) -> float:
    return abs(a - b)


def _check_row(name: str, cases: int, deviation: Optional[float], tolerance: float,
               note: str = "") -> Dict[str, Any]:
    if deviation is None:
        status = "skipped"
    else:
        status = "pass" if deviation <= tolerance else "fail"
    return {"check": name, "cases": cases, "max_deviation": deviation, "tolerance": tolerance,
            "status": status, "note": note}


def _expectation_depths(run: RunConfig) -> List[int]:
    d, atoms = run.model.d, len(support(run.model.bulk))
    depths = []
    for n in range(1, ORACLE_EXPECTATION_DEPTH + 1):
        if atoms ** sum(d ** t for t in range(1, n + 1)) > MAX_ASSIGNMENTS:
            break
        depths.append(n)
    return depths


def compute_oracle_check(run: RunConfig) -> CommandOutput:
    model = run.model.with_potential(run.potential)
    beta, tol, d = run.beta, run.tolerance, model.d
    depth = min(run.n, ORACLE_MAX_DEPTH)
    while depth > 1 and d ** depth > config.brute_force_limit:
        depth -= 1
    seeds = [replica_seed(run.seed, r) for r in range(min(run.replicas, ORACLE_MAX_SEEDS))]
    checks = []

    worst, cases = 0.0, 0
    worst_split = 0.0
    for n in range(1, depth + 1):
        for seed in seeds:
            real = Realization(model, seed, n)
            recursive = log_partition(real, beta, threads=run.threads)
            worst = max(worst, _deviation(recursive, brute_force_log_partition(real, beta)))
            if not isinstance(model.defect, NoDefect):
                worst_split = max(worst_split, _deviation(st_decomposition(real, beta).recombine(), recursive))
            cases += 1
    checks.append(_check_row("recursive_vs_brute_force", cases, worst, tol))
    if isinstance(model.defect, NoDefect):
        checks.append(_check_row("decomposition_identity", 0, None, tol, "homogeneous model has no defect"))
    else:
        checks.append(_check_row("decomposition_identity", cases, worst_split, tol))

    if has_finite_support(model.bulk):
        bulk = model.bulk
        homogeneous = model.model_copy(update={"defect": NoDefect()})
        lam, log_d = log_mgf(bulk, beta), math.log(d)
        first, second, g_dev, g_cases = 0.0, 0.0, 0.0, 0
        depths = _expectation_depths(run)
        for n in depths:
            first = max(first, _deviation(
                exact_expectation_oracle(homogeneous, beta, 0.0, n, power=1), n * (lam + log_d)))
            second = max(second, _deviation(
                exact_expectation_oracle(homogeneous, beta, 0.0, n, power=2), second_moment_hd(bulk, d, beta, n)))
            if isinstance(model.defect, SubtreeConstant):
                for k in range(n):
                    g_dev = max(g_dev, _deviation(
                        exact_expectation_oracle(model, beta, model.u, n, target="g", k=k),
                        mean_g(bulk, d, model.d1, beta, k, n)))
                    g_cases += 1
        checks.append(_check_row("first_moment", len(depths), first, tol))
        checks.append(_check_row("second_moment", len(depths), second, tol))
        if isinstance(model.defect, SubtreeConstant):
            checks.append(_check_row("exit_generation_mean", g_cases, g_dev, tol))
    else:
        note = "continuous disorder: expectations are only checked by Monte Carlo"
        for name in ("first_moment", "second_moment"):
            checks.append(_check_row(name, 0, None, tol, note))

    failed = [c["check"] for c in checks if c["status"] == "fail"]
    return CommandOutput(
        title="Oracle checks",
        tables={"": (["check", "cases", "max_deviation", "tolerance", "status", "note"], checks)},
        results={"checks": checks},
        summary=[("passed", sum(c["status"] == "pass" for c in checks)), ("failed", len(failed))],
        failed=failed,
    )


def compute_pinned_profile(run: RunConfig) -> CommandOutput:
    profile = empirical_pinned_profile(run.model, run.beta, run.potential, run.n, run.replicas,
                                       run.seed, threads=run.threads)
    bins = [f"bin{i}" for i in range(len(profile.pinned_fraction.histogram))]
    rows = []
    for name, summary in (("pinned_fraction", profile.pinned_fraction),
                          ("dominant_fraction", profile.dominant_fraction)):
        row: Dict[str, Any] = {"observable": name, "mean": summary.mean, "stderr": summary.stderr}
        row.update(zip(bins, summary.histogram))
        rows.append(row)
    return CommandOutput(
        title="Pinned profile",
        tables={"": (["observable", "mean", "stderr"] + bins, rows)},
        results=profile.to_dict(),
        summary=[("n", profile.n), ("replicas", profile.replicas)],
    )


def compute_martingale(run: RunConfig) -> CommandOutput:
    trace = martingale_trace(run.model, run.beta, run.n_list, run.replicas, run.seed, threads=run.threads)
    rows = [{"n": n, "mean_log_m": m, "stderr": s, "mean_log_m_per_n": m / n}
            for n, m, s in zip(trace.n_list, trace.mean, trace.stderr)]
    return CommandOutput(
        title="Normalized partition function",
        tables={"": (["n", "mean_log_m", "stderr", "mean_log_m_per_n"], rows)},
        results=trace.to_dict(),
    )


def compute_concentration(run: RunConfig) -> CommandOutput:
    profile = concentration_profile(run.model, run.beta, run.potential, run.n_list, run.replicas,
                                    run.seed, threads=run.threads)
    rows = [{"n": n, "stdev": s} for n, s in zip(profile.n_list, profile.stdev)]
    return CommandOutput(
        title="Concentration",
        tables={"": (["n", "stdev"], rows)},
        results=profile.to_dict(),
        summary=[("non-increasing", profile.decreasing)],
    )


COMMANDS: Dict[str, Callable[[RunConfig], CommandOutput]] = {
    "critical": compute_critical,
    "phase-diagram": compute_phase_diagram,
    "free-energy": compute_free_energy,
    "oracle-check": compute_oracle_check,
    "pinned-profile": compute_pinned_profile,
    "martingale": compute_martingale,
    "concentration": compute_concentration,
}


# ---------------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------------

def _fail(message: str, code: int) -> NoReturn:
    console.print(f"[red]{message}[/red]")
    sys.exit(code)


def _compute(command: str, run: RunConfig) -> CommandOutput:
    """Run a command body, mapping errors onto exit codes."""
    try:
        return COMMANDS[command](run)
    except ConfigurationError as e:
        _fail(f"Configuration error: {e}", EXIT_CONFIG)
    except DomainError as e:
        _fail(f"Domain error: {e}", EXIT_DOMAIN)
    except CheckFailedError as e:
        _fail(f"Check failed: {e}", EXIT_CHECK)
    except TreePinError as e:
        _fail(f"Internal error: {e}", EXIT_CHECK)


def _print_output(output: CommandOutput, run: RunConfig) -> None:
    header = Table(title=f"{output.title}: {model_label(run.model)}")
    header.add_column("Quantity", style="cyan")
    header.add_column("Value", style="green")
    for name, value in output.summary:
        header.add_row(name, format_cell(value))
    if output.summary:
        console.print(header)

    for suffix, (columns, rows) in output.tables.items():
        table = Table(title=suffix or None, show_lines=False)
        for col in columns:
            table.add_column(col, style="cyan" if col == columns[0] else None)
        for row in rows[:DISPLAY_ROWS]:
            table.add_row(*(format_cell(row.get(col)) for col in columns))
        console.print(table)
        if len(rows) > DISPLAY_ROWS:
            console.print(f"[dim]... {len(rows) - DISPLAY_ROWS} more rows in the output file[/dim]")


def _execute(command: str, config_path: Optional[str], out_dir: Optional[str], fmt: str,
             overrides: Dict[str, Any]) -> None:
    try:
        config.validate()
        run = load_run_config(config_path, overrides)
    except ConfigurationError as e:
        _fail(f"Configuration error: {e}", EXIT_CONFIG)

    output = _compute(command, run)
    path = ensure_output_dir(out_dir or config.default_output_dir)
    for suffix, (columns, rows) in output.tables.items():
        target = write_table(path / output_filename(command, run.model, suffix), columns, rows, fmt)
        console.print(f"[green]✅ Wrote {target}[/green]")
    record = make_record(command, run.model_dump(mode="json"), output.results)
    save_record(record, record_path(path, command))
    _print_output(output, run)

    if output.failed:
        _fail(f"❌ Failed checks: {', '.join(output.failed)}", EXIT_CHECK)


def run_options(fn: Callable) -> Callable:
    """Options shared by every analysis command; flags override the config file."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON run configuration"),
        click.option("--out", "out_dir", help="Output directory (default: TREEPIN_OUTPUT_DIR)"),
        click.option("--seed", type=int, help="Master seed (unsigned 64-bit)"),
        click.option("--threads", type=int, help="Worker threads (results do not depend on it)"),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
                     help="Table format"),
        click.option("--beta", type=float, help="Inverse temperature"),
        click.option("--u", "u", type=float, help="Defect potential"),
        click.option("--n", "n", type=int, help="Tree depth"),
        click.option("--replicas", type=int, help="Disorder replicas per estimate"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _analysis_command(name: str, doc: str) -> None:
    @cli.command(name=name, help=doc)
    @run_options
    def command(config_path, out_dir, seed, threads, fmt, beta, u, n, replicas):
        overrides = {"seed": seed, "threads": threads, "beta": beta, "u": u, "n": n, "replicas": replicas}
        _execute(name, config_path, out_dir, fmt, overrides)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

@click.group()
@click.option("--env-file", help="Path to environment file (.env)")
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging")
@click.pass_context
def cli(ctx, env_file, verbose):
    """treepin - directed polymers on a disordered tree with a defect."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose

    if env_file:
        try:
            Config(env_file)
            critical_cache.reload()
        except TreePinError as e:
            _fail(f"Failed to load env file: {e}", EXIT_CONFIG)

    logging.basicConfig(
        level=logging.DEBUG if verbose else config.log_level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=verbose)],
        force=True,
    )


_analysis_command("critical", "Critical inverse temperature and the free energy on the beta grid.")
_analysis_command("phase-diagram", "Phase labels, estimates and boundary curves on a (beta, u) grid.")
_analysis_command("free-energy", "Replica-averaged free energy over the depth ladder with its anchor.")
_analysis_command("oracle-check", "Cross-check the recursive engine, decomposition and moment formulas.")
_analysis_command("pinned-profile", "Distribution of the Gibbs pinned fraction across replicas.")
_analysis_command("martingale", "Replica mean of log M_n for the homogeneous model.")
_analysis_command("concentration", "Replica spread of the free energy per depth.")


@cli.command()
@click.argument("record_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def replay(record_file):
    """Re-run a recorded command and compare its results."""
    try:
        record = load_record(record_file)
        if record.command not in COMMANDS:
            raise ConfigurationError(f"Unknown command {record.command!r} in record")
        run = RunConfig.model_validate(record.config)
    except (ConfigurationError, ValueError) as e:
        _fail(f"Configuration error: {e}", EXIT_CONFIG)

    output = _compute(record.command, run)
    if json.dumps(output.results, sort_keys=True) != json.dumps(record.results, sort_keys=True):
        _fail(f"❌ Results of {record.command} differ from {record_file}", EXIT_CHECK)
    console.print(f"[green]✅ {record.command} reproduced {record_file} exactly[/green]")


@cli.group()
def config_cmd():
    """Configuration management commands."""
    pass


@config_cmd.command("check")
def config_check():
    """Check configuration validity."""
    try:
        config.validate()
    except ConfigurationError as e:
        _fail(f"❌ Configuration error: {e}", EXIT_CONFIG)
    console.print("[green]✅ Configuration is valid[/green]")

    table = Table(title="Current Configuration")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", style="green")

    table.add_row("Node Budget", str(config.node_budget))
    table.add_row("Brute Force Limit", str(config.brute_force_limit))
    table.add_row("Block Size", str(config.block_size))
    table.add_row("Threads", str(config.threads))
    table.add_row("Output Directory", config.default_output_dir)
    table.add_row("Cache Enabled", str(config.enable_cache))
    table.add_row("Log Level", config.log_level)

    console.print(table)


@cli.group()
def cache_cmd():
    """Cache management commands."""
    pass


@cache_cmd.command("stats")
def cache_stats():
    """Show cache statistics."""
    stats = critical_cache.stats()

    table = Table(title="Cache Statistics")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")

    table.add_row("Persistent", str(stats.get("persistent")))
    table.add_row("In-memory entries", str(stats.get("entries", 0)))
    if stats.get("persistent"):
        table.add_row("Disk entries", str(stats.get("disk_entries", "Unknown")))
        table.add_row("Disk Usage", f"{stats.get('disk_usage', 0) / 1024 / 1024:.1f} MB")
        table.add_row("Cache Directory", str(stats.get("cache_dir", "Unknown")))

    console.print(table)


@cache_cmd.command("clear")
@click.confirmation_option(prompt="Are you sure you want to clear the cache?")
def cache_clear():
    """Clear all cached critical points."""
    try:
        critical_cache.clear()
        console.print("[green]✅ Cache cleared[/green]")
    except TreePinError as e:
        _fail(f"Error clearing cache: {e}", EXIT_CHECK)


cli.add_command(config_cmd, name="config")
cli.add_command(cache_cmd, name="cache")


def main():
    """Entry point for the CLI."""
    try:
        cli()
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted by user[/yellow]")
        sys.exit(1)
    except Exception as e:
        if "--verbose" in sys.argv or "-v" in sys.argv:
            raise
        console.print(f"[red]Unexpected error: {e}[/red]")
        sys.exit(1)


if __name__ == "__main__":
    main()
