import json
import logging
import math
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.rule import Rule
from rich.table import Table

from censorfit.errors import DataError, UsageError

# Get a logger for this module
logger = logging.getLogger(__name__)


def load_json_data(filepath: str) -> Any:
    """Loads data from a JSON file."""
    logger.debug(f"Attempting to load JSON data from: {filepath}")
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        logger.error(f"Input file not found at {filepath}")
        raise DataError(f"File not found: {filepath}") from e
    except json.JSONDecodeError as e:
        logger.error(f"Could not decode JSON from {filepath}: {e}", exc_info=True)
        raise DataError(f"Invalid JSON in {filepath}: {e}") from e
    logger.debug(f"Successfully decoded JSON from {filepath}")
    return data


def to_jsonable(obj: Any) -> Any:
    """Converts numpy scalars and arrays to plain Python; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def dump_json(data: Any) -> str:
    return json.dumps(to_jsonable(data), indent=2)


def save_json(data: Any, path: str):
    logger.info(f"Saving results to: {path}")
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_json(data) + "\n")


def parse_profile_grid(text: str) -> Tuple[float, float, int]:
    """Parses 'lower,upper,points' for the profile log-likelihood series."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise UsageError(f"--profile-grid expects lower,upper,points; got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise UsageError(f"--profile-grid expects lower,upper,points; got {text!r}") from e


def _fmt(value: Any, digits: int = 4) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{value:.{digits}f}"
    return str(value)


def _interval(entry: Dict[str, Any] | None) -> str:
    if not entry:
        return "-"
    return f"({entry['lower']:.3f}, {entry['upper']:.3f})"


def display_sample_summary(summary: Dict[str, Any], console: Console):
    """Counts and per-cause lifetime summaries of a sample."""
    counts = ", ".join(f"[cyan]{k}:[/cyan] {summary[k]}" for k in ("n", "m", "m1", "m2", "J") if k in summary)
    console.print(Panel(counts, title="Sample", border_style="green", expand=False))
    causes = summary.get("causes")
    if causes:
        table = Table(title="Lifetimes by cause", show_header=True, header_style="bold magenta")
        table.add_column("Cause", style="dim")
        table.add_column("Count", justify="right")
        table.add_column("Mean", justify="right")
        table.add_column("SD", justify="right")
        for cause, stats in causes.items():
            table.add_row(str(cause), str(stats["count"]), _fmt(stats["mean"]), _fmt(stats["sd"]))
        console.print(table)


def display_fits(fits: Dict[str, Dict[str, Any]], console: Console):
    console.print(Rule(title="Maximum likelihood fits", style="bold blue"))
    table = Table(show_header=True, header_style="bold magenta")
    for column in ("Model", "alpha", "lambda1", "lambda2", "beta", "loglik", "iterations", "method", "boundary"):
        table.add_column(column, justify="right" if column != "Model" else "left")
    for name, fit in fits.items():
        table.add_row(
            name,
            _fmt(fit["alpha"]),
            _fmt(fit["lambda1"]),
            _fmt(fit["lambda2"]),
            _fmt(fit["beta"]) if "beta" in fit else "-",
            _fmt(fit["loglik"]),
            str(fit["iterations"]),
            fit["method"],
            "[yellow]yes[/yellow]" if fit["boundary"] else "no",
        )
    console.print(table)


def display_lrt(lrt: Dict[str, Any], console: Console):
    decision = "[bold red]reject[/bold red]" if lrt["reject"] else "[green]do not reject[/green]"
    body = (
        f"[cyan]Lambda:[/cyan] {lrt['lambda_stat']:.4f}\n"
        f"[cyan]critical (level {lrt['level']}):[/cyan] {lrt['critical']:.2f}\n"
        f"[cyan]p-value:[/cyan] {lrt['p_value']:.4g}\n"
        f"[cyan]H0 lambda1 = lambda2:[/cyan] {decision}"
    )
    console.print(Panel(body, title="Likelihood-ratio test", border_style="blue", expand=False))


def display_analysis(results: Dict[str, Dict[str, Any]], console: Console):
    """Point and interval estimates, one table per model family (MLE, BB, PB, BE, SCRI, HPD)."""
    for name, result in results.items():
        console.print(Rule(title=f"{name} model, {result['level']:.0%} intervals", style="bold blue"))
        table = Table(show_header=True, header_style="bold magenta")
        for column in ("Parameter", "MLE", "BB", "PB", "BE", "SCRI", "HPD CRI"):
            table.add_column(column, justify="right" if column != "Parameter" else "left")
        for parameter, row in result["parameters"].items():
            table.add_row(
                parameter,
                _fmt(row["MLE"], 3),
                _interval(row.get("BB")),
                _interval(row.get("PB")),
                _fmt(row["BE"], 3) if "BE" in row else "-",
                _interval(row.get("SCRI")),
                _interval(row.get("HPD")),
            )
        console.print(table)
        posterior = result.get("posterior")
        if posterior and posterior.get("flagged"):
            console.print(f"[yellow]Warning:[/yellow] effective sample size {posterior['ess']:.1f} is low")
        if result.get("bootstrap", {}).get("flagged"):
            console.print("[yellow]Warning:[/yellow] more than 10% of bootstrap refits failed")


def display_rows(rows: Sequence[Any], console: Console, parameters: List[str] | None = None):
    """Compact study summary: MLE/BE bias and the four coverages per parameter."""
    console.print(Rule(title="Simulation study", style="bold blue"))
    table = Table(show_header=True, header_style="bold magenta")
    for column in ("Scenario", "Model", "Param", "Bias", "MSE", "CPB", "CPP", "BE Bias", "CPS", "CPH", "Used"):
        table.add_column(column, justify="left" if column in ("Scenario", "Model", "Param") else "right")
    for row in rows:
        for name, metrics in row.params.items():
            if parameters and name not in parameters:
                continue
            table.add_row(
                row.scenario,
                row.model,
                name,
                _fmt(metrics.mle_bias, 3),
                _fmt(metrics.mle_mse, 3),
                _fmt(metrics.cpb, 3),
                _fmt(metrics.cpp, 3),
                _fmt(metrics.be_bias, 3),
                _fmt(metrics.cps, 3),
                _fmt(metrics.cph, 3),
                f"[yellow]{row.used}[/yellow]" if row.flagged else str(row.used),
            )
    console.print(table)
