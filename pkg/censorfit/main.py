import argparse
import dataclasses
import logging
import os
import sys
from typing import Any, Dict, List

import pandas as pd
from rich.console import Console

from censorfit import __version__
from censorfit.config import settings
from censorfit.core import runner
from censorfit.core.bayes import PROPOSALS, Priors
from censorfit.core.censoring import (
    CensoringPlan,
    generate_sample,
    parse_duration,
    read_plan,
    read_sample,
    write_sample,
)
from censorfit.core.likelihood import SOLVER_METHODS, FitOptions, lrt_equal_scales, profile_series
from censorfit.core.sampling import DATA_SLOT, seed_stream, stream_id
from censorfit.errors import CensorFitError, UsageError
from censorfit.evaluation import render_table
from censorfit.logging_config import LOG_FORMAT_DETAILED, set_log_level, setup_logging
from censorfit.models import get_model, list_available_models
from censorfit.utils.helper import (
    display_analysis,
    display_fits,
    display_lrt,
    display_rows,
    display_sample_summary,
    dump_json,
    parse_profile_grid,
    save_json,
)

logger = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


# --- Argument types ---
def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def duration(text: str) -> float:
    try:
        return parse_duration(text)
    except CensorFitError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=f"Master seed (default: CENSORFIT_SEED or {settings.SEED}).")
    common.add_argument("--out", type=str, default=argparse.SUPPRESS, help="Output path (sample CSV for simulate, JSON for analyses, file prefix for study).")
    common.add_argument("--format", choices=["rich", "json"], default=argparse.SUPPRESS, help="Console output: rich tables or JSON on stdout (default: rich).")
    common.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, default=argparse.SUPPRESS, help=f"Logging level (default: {settings.LOG_LEVEL}).")

    analysis = argparse.ArgumentParser(add_help=False)
    analysis.add_argument("-i", "--input", required=True, help="Sample CSV (index,time,cause,removed).")
    analysis.add_argument("--plan", default=None, help="Plan JSON; defaults to the sidecar next to the sample.")
    models = analysis.add_mutually_exclusive_group()
    models.add_argument("--restricted", action="store_true", help="Only the order-restricted model (lambda1 >= lambda2).")
    models.add_argument("--unrestricted", action="store_true", help="Only the unrestricted model.")
    analysis.add_argument("--eps", type=positive_float, default=None, help="Solver tolerance.")
    analysis.add_argument("--max-iter", type=positive_int, default=None, help="Solver iteration cap.")
    analysis.add_argument("--method", choices=SOLVER_METHODS, default=None, help="Profile maximizer.")
    analysis.add_argument("--alpha0", type=positive_float, default=None, help="Starting shape (default: regression prestimate).")

    parser = argparse.ArgumentParser(
        prog="censorfit",
        description="Weibull competing-risks inference under adaptive progressive Type-II censoring.",
        formatter_class=argparse.RawTextHelpFormatter,
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="Generate a censored competing-risks sample.")
    sim.add_argument("--n", type=positive_int, required=True, help="Units on test.")
    sim.add_argument("--m", type=positive_int, required=True, help="Observed failures.")
    sim.add_argument("--scheme", required=True, help="right:k, fsp:k, osp:k or a comma list of removals.")
    sim.add_argument("--T", type=duration, default=float("inf"), help="Ideal test duration, a number or 'inf'.")
    sim.add_argument("--alpha", type=positive_float, required=True, help="Common Weibull shape.")
    sim.add_argument("--l1", type=positive_float, required=True, help="Cause-1 scale lambda1.")
    sim.add_argument("--l2", type=positive_float, required=True, help="Cause-2 scale lambda2.")

    fit = sub.add_parser("fit", parents=[common, analysis], help="Maximum likelihood fits.")
    fit.add_argument("--level", type=float, default=0.05, help="Significance level of the likelihood-ratio test (default: 0.05).")
    fit.add_argument("--lrt", action="store_true", help="Also test H0: lambda1 = lambda2.")
    fit.add_argument("--profile-out", default=None, help="CSV path for the (alpha, p1) profile series.")
    fit.add_argument("--profile-grid", default="0.05,10,200", help="lower,upper,points of the profile grid.")

    lrt = sub.add_parser("lrt", parents=[common, analysis], help="Likelihood-ratio test of equal scales (fit --lrt).")
    lrt.add_argument("--level", type=float, default=0.05, help="Significance level (default: 0.05).")

    boot = sub.add_parser("bootstrap", parents=[common, analysis], help="Parametric bootstrap intervals.")
    boot.add_argument("--level", type=float, default=0.95, help="Confidence / credible level (default: 0.95).")
    boot.add_argument("--B", type=positive_int, default=None, help="Bootstrap resamples.")
    boot.add_argument("--M", type=positive_int, default=None, help="Importance draws.")
    boot.add_argument("--no-bayes", action="store_true", help="Skip the Bayes estimates and credible intervals.")
    boot.add_argument("--proposal", choices=PROPOSALS, default=None, help="Shape proposal for the restricted model.")

    bayes = sub.add_parser("bayes", parents=[common, analysis], help="Bayes estimates and credible intervals.")
    bayes.add_argument("--level", type=float, default=0.95, help="Credible / confidence level (default: 0.95).")
    bayes.add_argument("--M", type=positive_int, default=None, help="Importance draws.")
    bayes.add_argument("--B", type=positive_int, default=None, help="Bootstrap resamples.")
    bayes.add_argument("--no-bootstrap", action="store_true", help="Skip the bootstrap intervals.")
    bayes.add_argument("--proposal", choices=PROPOSALS, default=None, help="Shape proposal for the restricted model.")

    study = sub.add_parser("study", parents=[common], help="Monte Carlo simulation study.")
    study.add_argument("--config", required=True, help="JSON array of scenario objects.")
    study.add_argument("--workers", type=positive_int, default=None, help="Worker processes for replications.")
    study.add_argument("--reps", type=positive_int, default=None, help="Override the replication count of every scenario.")
    study.add_argument("--B", type=positive_int, default=None, help="Override B of every scenario.")
    study.add_argument("--M", type=positive_int, default=None, help="Override M of every scenario.")
    study.add_argument("--eps", type=positive_float, default=None, help="Solver tolerance.")
    study.add_argument("--method", choices=SOLVER_METHODS, default=None, help="Profile maximizer.")
    return parser


# --- Command helpers ---
def _selected_models(args) -> List[str]:
    if args.restricted:
        return ["restricted"]
    if args.unrestricted:
        return ["unrestricted"]
    return list_available_models()


def _fit_options(args) -> FitOptions:
    return FitOptions.from_defaults(
        eps=args.eps,
        max_iter=getattr(args, "max_iter", None),
        method=args.method,
        alpha0=getattr(args, "alpha0", None),
    )


def _load_sample(args):
    plan = read_plan(args.plan) if args.plan else None
    return read_sample(args.input, plan)


def _sample_summary(sample) -> Dict[str, Any]:
    return {
        "n": sample.n,
        "m": sample.m,
        "m1": sample.m1,
        "m2": sample.m2,
        "J": sample.j_change,
        "causes": sample.cause_summary(),
    }


def _emit(payload: Dict[str, Any], args, console: Console):
    out = getattr(args, "out", None)
    if out:
        save_json(payload, out)
        console.print(f"[green]Results JSON saved to:[/green] {os.path.abspath(out)}")
    if args.format == "json":
        print(dump_json(payload))


# --- Subcommands ---
def cmd_simulate(args, console: Console):
    out = getattr(args, "out", None)
    if not out:
        raise UsageError("simulate needs --out for the sample CSV")
    plan = CensoringPlan.from_scheme(args.n, args.m, args.scheme, args.T)
    rng = seed_stream(args.seed, stream_id(0, DATA_SLOT))
    sample = generate_sample(plan, args.alpha, args.l1, args.l2, rng)
    sidecar = write_sample(sample, out)
    summary = {"n": sample.n, "m": sample.m, "m1": sample.m1, "m2": sample.m2, "J": sample.j_change}
    logger.info(f"Sample written to {out} (plan: {sidecar})")
    if args.format == "json":
        print(dump_json({**summary, "sample": out, "plan": sidecar}))
    else:
        display_sample_summary(summary, console)
        console.print(f"[green]Sample saved to:[/green] {os.path.abspath(out)}")


def cmd_fit(args, console: Console):
    sample = _load_sample(args)
    opts = _fit_options(args)
    fits = {name: get_model(name).fit(sample, opts).to_dict() for name in _selected_models(args)}
    payload: Dict[str, Any] = {"sample": _sample_summary(sample), "fits": fits}

    if args.command == "lrt" or args.lrt:
        payload["lrt"] = lrt_equal_scales(sample, level=args.level, opts=opts).to_dict()

    profile_out = getattr(args, "profile_out", None)
    if profile_out:
        lower, upper, points = parse_profile_grid(args.profile_grid)
        series = pd.DataFrame(profile_series(sample, lower, upper, points), columns=["alpha", "p1"])
        series.to_csv(profile_out, index=False, float_format="%.10g")
        payload["profile"] = profile_out
        logger.info(f"Profile series written to {profile_out}")

    if args.format != "json":
        display_sample_summary(payload["sample"], console)
        display_fits(fits, console)
        if "lrt" in payload:
            display_lrt(payload["lrt"], console)
    _emit(payload, args, console)


def cmd_analyze(args, console: Console):
    """bootstrap and bayes share one path and emit MLE, BB, PB, BE, SCRI and HPD unless a half is skipped."""
    sample = _load_sample(args)
    analysis_settings = runner.AnalysisSettings(priors=Priors.from_defaults(), opts=_fit_options(args))
    if args.proposal:
        analysis_settings.proposal = args.proposal
    if args.command == "bootstrap":
        with_bootstrap, with_bayes = True, not args.no_bayes
    else:
        with_bootstrap, with_bayes = not args.no_bootstrap, True

    results = {
        name: runner.analyze_dataset(
            sample,
            name,
            level=args.level,
            B=args.B,
            M=args.M,
            seed=args.seed,
            settings=analysis_settings,
            with_bootstrap=with_bootstrap,
            with_bayes=with_bayes,
        )
        for name in _selected_models(args)
    }
    if args.format != "json":
        display_analysis(results, console)
    _emit(results, args, console)


def cmd_study(args, console: Console):
    specs = runner.load_study_config(args.config)
    overrides = {k: v for k, v in (("replications", args.reps), ("B", args.B), ("M", args.M)) if v is not None}
    if overrides:
        specs = [dataclasses.replace(spec, **overrides) for spec in specs]
    analysis_settings = runner.AnalysisSettings(opts=FitOptions.from_defaults(eps=args.eps, method=args.method))
    workers = args.workers if args.workers is not None else settings.WORKERS

    rows = runner.run_study(specs, workers=workers, settings=analysis_settings)
    for row in rows:
        if row.flagged:
            print(f"FLAGGED: scenario {row.scenario} ({row.model}): {row.failures} of {row.replications} replications failed", file=sys.stderr)

    prefix = getattr(args, "out", None) or "censorfit_study"
    csv_path, md_path = f"{prefix}.csv", f"{prefix}.md"
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(render_table(rows, "csv"))
    with open(md_path, "w", encoding="utf-8") as f:
        f.write(render_table(rows, "markdown"))
    logger.info(f"Study tables written to {csv_path} and {md_path}")

    if args.format == "json":
        print(dump_json([row.to_dict() for row in rows]))
    else:
        display_rows(rows, console)
        console.print(f"[green]Tables saved to:[/green] {os.path.abspath(csv_path)}, {os.path.abspath(md_path)}")


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "lrt": cmd_fit,
    "bootstrap": cmd_analyze,
    "bayes": cmd_analyze,
    "study": cmd_study,
}


# --- Main Execution Logic ---
def main(argv: List[str] | None = None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed = getattr(args, "seed", settings.SEED)
    args.format = getattr(args, "format", "rich")
    args.log_level = getattr(args, "log_level", settings.LOG_LEVEL)

    # Setup Logging & Console; rich output moves to stderr when stdout carries JSON
    log_level = getattr(logging, args.log_level, logging.INFO)
    setup_logging(level=log_level, log_format=LOG_FORMAT_DETAILED)
    set_log_level(log_level)
    console = Console(stderr=args.format == "json")
    logger.debug(f"Running '{args.command}' with seed {args.seed}")

    try:
        COMMANDS[args.command](args, console)
    except CensorFitError as e:
        logger.error(f"{type(e).__name__}: {e}", exc_info=log_level <= logging.DEBUG)
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(e.exit_code)
    except OSError as e:
        logger.error(f"I/O error: {e}", exc_info=True)
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(3)
    except KeyboardInterrupt:
        logger.warning("Interrupted by user (Ctrl+C).")
        sys.exit(130)
    except Exception as e:
        logger.error(f"Unexpected error during '{args.command}': {e}", exc_info=True)
        console.print(f"\n[bold red]An unexpected error occurred:[/bold red]\n{e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
