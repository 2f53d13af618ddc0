import concurrent.futures
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

from censorfit.config import load_defaults
from censorfit.core.bayes import ImportanceDraws, Priors, bayes_estimate, hpd_cri, posterior_summary, symmetric_cri
from censorfit.core.bootstrap import bootstrap_mles, normal_bootstrap_interval, percentile_interval
from censorfit.core.censoring import CensoringPlan, CompetingRisksSample, generate_sample
from censorfit.core.likelihood import FitOptions, FitResult
from censorfit.core.sampling import DATA_SLOT, POSTERIOR_SLOT, seed_stream, stream_id
from censorfit.errors import CensorFitError, UsageError
from censorfit.evaluation import (
    MetricsRow,
    ParameterRecord,
    ReplicationRecord,
    aggregate_replications,
    count_flags,
)
from censorfit.models import CompetingRisksModel, get_model, list_available_models
from censorfit.utils.helper import load_json_data

logger = logging.getLogger(__name__)

GRID_SCHEMES = ("right:10", "fsp:10", "osp:10")
GRID_DURATIONS = (0.25, 0.75)
GRID_SHAPES = (0.5, 1.5)
GRID_SCALES = ((1.2, 1.0), (1.4, 1.0))


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of a simulation study."""
    name: str
    plan: CensoringPlan
    alpha: float
    lambda1: float
    lambda2: float
    models: Tuple[str, ...] = ("restricted", "unrestricted")
    replications: int = 500
    B: int = 500
    M: int = 2000
    level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if self.replications < 1:
            raise UsageError(f"Scenario '{self.name}': replications must be at least 1")
        if not 0 < self.level < 1:
            raise UsageError(f"Scenario '{self.name}': level must lie in (0, 1), got {self.level}")
        if self.B < 2 or self.M < 2:
            raise UsageError(f"Scenario '{self.name}': B and M must be at least 2")
        if not self.models:
            raise UsageError(f"Scenario '{self.name}': no model families given")
        for model_name in self.models:
            # Validates the family name and the truth against the family's domain
            get_model(model_name).true_values(self.alpha, self.lambda1, self.lambda2)

    @property
    def gamma(self) -> float:
        return 1.0 - self.level

    @classmethod
    def from_dict(cls, data: Dict[str, Any], index: int = 0) -> "ScenarioSpec":
        """Builds a spec from a study-config object; R may be a list or a scheme shorthand."""
        study = load_defaults()["study"]
        try:
            plan = CensoringPlan.from_dict(data)
            spec = cls(
                name=str(data.get("name", f"scenario-{index + 1}")),
                plan=plan,
                alpha=float(data["alpha"]),
                lambda1=float(data["lambda1"]),
                lambda2=float(data["lambda2"]),
                models=tuple(data.get("models", list_available_models())),
                replications=int(data.get("reps", study["replications"])),
                B=int(data.get("B", study["B"])),
                M=int(data.get("M", study["M"])),
                level=float(data.get("level", study["level"])),
                seed=int(data.get("seed", index)),
            )
        except KeyError as e:
            raise UsageError(f"Scenario {index + 1} is missing key {e}") from e
        except CensorFitError:
            raise
        except (TypeError, ValueError) as e:
            raise UsageError(f"Scenario {index + 1} has an invalid value: {e}") from e
        return spec

    def to_dict(self) -> Dict[str, Any]:
        result = self.plan.to_dict()
        result.update({
            "name": self.name,
            "alpha": self.alpha,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "reps": self.replications,
            "B": self.B,
            "M": self.M,
            "level": self.level,
            "seed": self.seed,
            "models": list(self.models),
        })
        return result


def _default_proposal() -> str:
    return str(load_defaults()["bayes"]["proposal"])


@dataclass
class AnalysisSettings:
    """Inference options shared by every replication of a run."""
    priors: Priors = field(default_factory=Priors.from_defaults)
    opts: FitOptions = field(default_factory=FitOptions.from_defaults)
    proposal: str = field(default_factory=_default_proposal)


# --- Single-dataset analysis ---
def _analyze_model(
    model: CompetingRisksModel,
    sample: CompetingRisksSample,
    gamma: float,
    B: int,
    M: int,
    seed: int,
    replication: int,
    settings: AnalysisSettings,
    with_bootstrap: bool = True,
    with_bayes: bool = True,
    fit: FitResult | None = None,
) -> Tuple[ReplicationRecord, ImportanceDraws | None]:
    """Fit, bootstrap intervals and posterior summaries of every monitored parameter."""
    fit = fit or model.fit(sample, settings.opts)
    estimates = model.estimates(fit)
    records = {name: ParameterRecord(mle=value, be=math.nan) for name, value in estimates.items()}
    record = ReplicationRecord(replication=replication, parameters=records, boundary=fit.boundary)

    if with_bootstrap:
        draws = bootstrap_mles(fit, sample.plan, model.functionals(), B, seed, model.name, replication, settings.opts)
        for name, boot in draws.items():
            records[name].intervals["normal-bootstrap"] = normal_bootstrap_interval(boot, gamma)
            records[name].intervals["percentile"] = percentile_interval(boot, gamma)
            record.bootstrap_flagged = record.bootstrap_flagged or boot.flagged

    posterior = None
    if with_bayes:
        rng = seed_stream(seed, stream_id(replication, POSTERIOR_SLOT))
        posterior = model.draw_posterior(sample, settings.priors, M, rng, proposal=settings.proposal)
        record.ess_flagged = posterior.flagged
        for name in estimates:
            records[name].be = bayes_estimate(posterior, name)
            records[name].intervals["symmetric"] = symmetric_cri(posterior, name, gamma)
            records[name].intervals["hpd"] = hpd_cri(posterior, name, gamma)
    return record, posterior


def analyze_dataset(
    sample: CompetingRisksSample,
    model_name: str,
    level: float = 0.95,
    B: int | None = None,
    M: int | None = None,
    seed: int = 0,
    settings: AnalysisSettings | None = None,
    with_bootstrap: bool = True,
    with_bayes: bool = True,
) -> Dict[str, Any]:
    """
    Point and interval estimates of one dataset under one model family.

    Returns:
        {"model", "level", "fit", "parameters": {name: {MLE, BB, PB, BE, SCRI, HPD}}}
        where BB is the bias-corrected normal bootstrap interval and PB the
        percentile bootstrap interval. Skipped parts are omitted.
    """
    if not 0 < level < 1:
        raise UsageError(f"level must lie in (0, 1), got {level}")
    settings = settings or AnalysisSettings()
    defaults = load_defaults()
    B = B if B is not None else int(defaults["bootstrap"]["B"])
    M = M if M is not None else int(defaults["bayes"]["M"])
    model = get_model(model_name)
    gamma = 1.0 - level

    fit = model.fit(sample, settings.opts)
    record, posterior = _analyze_model(
        model, sample, gamma, B, M, seed, 0, settings, with_bootstrap, with_bayes, fit=fit
    )

    parameters: Dict[str, Dict[str, Any]] = {}
    for name, entry in record.parameters.items():
        row: Dict[str, Any] = {"MLE": entry.mle}
        if with_bootstrap:
            row["BB"] = entry.intervals["normal-bootstrap"].to_dict()
            row["PB"] = entry.intervals["percentile"].to_dict()
        if with_bayes:
            row["BE"] = entry.be
            row["SCRI"] = entry.intervals["symmetric"].to_dict()
            row["HPD"] = entry.intervals["hpd"].to_dict()
        parameters[name] = row

    result: Dict[str, Any] = {"model": model.name, "level": level, "fit": fit.to_dict(), "parameters": parameters}
    if with_bootstrap:
        result["bootstrap"] = {"B": B, "flagged": record.bootstrap_flagged}
    if posterior is not None:
        result["posterior"] = posterior_summary(posterior, gamma, model.parameter_names)
    return result


# --- Monte Carlo study ---
def _run_replication(
    spec: ScenarioSpec, replication: int, settings: AnalysisSettings
) -> Tuple[int, Dict[str, ReplicationRecord] | None, str | None]:
    """
    Generates one dataset and analyzes it under every model family of the scenario.

    Returns (replication, records, error); a failure under any family discards
    the replication for all families.
    """
    try:
        rng = seed_stream(spec.seed, stream_id(replication, DATA_SLOT))
        sample = generate_sample(spec.plan, spec.alpha, spec.lambda1, spec.lambda2, rng)
        records = {
            name: _analyze_model(
                get_model(name), sample, spec.gamma, spec.B, spec.M, spec.seed, replication, settings
            )[0]
            for name in spec.models
        }
        return replication, records, None
    except CensorFitError as e:
        logger.debug(f"Scenario '{spec.name}' replication {replication} failed: {e}")
        return replication, None, f"{type(e).__name__}: {e}"


def run_scenario(
    spec: ScenarioSpec,
    workers: int | None = None,
    settings: AnalysisSettings | None = None,
) -> List[MetricsRow]:
    """
    Runs every replication of a scenario and aggregates the metrics.

    Replications are independent and use pre-assigned stream ids, so the rows
    do not depend on `workers`. With workers > 1 they run in a process pool.

    Returns:
        One MetricsRow per model family, in the scenario's model order.
    """
    settings = settings or AnalysisSettings()
    logger.info(f"Running scenario '{spec.name}' ({spec.replications} replications, B={spec.B}, M={spec.M})")
    results: Dict[int, Dict[str, ReplicationRecord] | None] = {}
    errors: Dict[int, str] = {}

    if workers is not None and workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            future_to_replication = {
                executor.submit(_run_replication, spec, r, settings): r for r in range(spec.replications)
            }
            for future in concurrent.futures.as_completed(future_to_replication):
                r = future_to_replication[future]
                _, records, error = future.result()
                results[r] = records
                if error:
                    errors[r] = error
    else:
        for r in range(spec.replications):
            _, records, error = _run_replication(spec, r, settings)
            results[r] = records
            if error:
                errors[r] = error

    succeeded = [results[r] for r in range(spec.replications) if results[r] is not None]
    failures = spec.replications - len(succeeded)
    flag_fraction = float(load_defaults()["study"]["failure_flag_fraction"])
    flagged = failures / spec.replications > flag_fraction
    if flagged:
        logger.warning(
            f"Scenario '{spec.name}': {failures} of {spec.replications} replications failed; row is flagged. "
            f"First error: {errors[min(errors)]}"
        )

    rows = []
    for name in spec.models:
        model = get_model(name)
        records = [records_by_model[name] for records_by_model in succeeded]
        tallies = count_flags(records)
        tallies["failed"] = failures
        rows.append(MetricsRow(
            scenario=spec.name,
            model=name,
            label=spec.plan.label(),
            T=spec.plan.T,
            replications=spec.replications,
            used=len(records),
            failures=failures,
            flagged=flagged,
            params=aggregate_replications(records, model.true_values(spec.alpha, spec.lambda1, spec.lambda2)),
            tallies=tallies,
        ))
    logger.info(f"Scenario '{spec.name}' done: {len(succeeded)} replications used, {failures} failed")
    return rows


def run_study(
    specs: Sequence[ScenarioSpec],
    workers: int | None = None,
    settings: AnalysisSettings | None = None,
) -> List[MetricsRow]:
    """Runs scenarios in config order and concatenates their rows."""
    if not specs:
        raise UsageError("The study configuration contains no scenarios")
    rows: List[MetricsRow] = []
    for i, spec in enumerate(specs):
        logger.info(f"--- Scenario {i + 1}/{len(specs)}: {spec.name} ---")
        rows.extend(run_scenario(spec, workers, settings))
    flagged = [row for row in rows if row.flagged]
    if flagged:
        logger.warning(f"{len(flagged)} of {len(rows)} rows are flagged for replication failures")
    return rows


def load_study_config(path: str) -> List[ScenarioSpec]:
    """Reads a JSON array of scenario objects (or an object with a 'scenarios' list)."""
    data = load_json_data(path)
    if isinstance(data, dict):
        data = data.get("scenarios")
    if not isinstance(data, list):
        raise UsageError(f"Study config {path} must be a JSON array of scenario objects")
    return [ScenarioSpec.from_dict(entry, i) for i, entry in enumerate(data)]


def standard_grid_config(
    replications: int = 500,
    B: int = 500,
    M: int = 2000,
    level: float = 0.95,
    base_seed: int = 1000,
) -> List[Dict[str, Any]]:
    """The 3 schemes x 2 durations x 2 shapes x 2 scale pairs design with n = 50, m = 40."""
    config = []
    for scheme in GRID_SCHEMES:
        for T in GRID_DURATIONS:
            for alpha in GRID_SHAPES:
                for lambda1, lambda2 in GRID_SCALES:
                    config.append({
                        "name": f"{scheme.split(':')[0]}-T{T}-a{alpha}-l{lambda1}",
                        "n": 50,
                        "m": 40,
                        "R": scheme,
                        "T": T,
                        "alpha": alpha,
                        "lambda1": lambda1,
                        "lambda2": lambda2,
                        "reps": replications,
                        "B": B,
                        "M": M,
                        "level": level,
                        "seed": base_seed + len(config),
                        "models": ["restricted", "unrestricted"],
                    })
    return config


def standard_grid(**kwargs) -> List[ScenarioSpec]:
    return [ScenarioSpec.from_dict(entry, i) for i, entry in enumerate(standard_grid_config(**kwargs))]

