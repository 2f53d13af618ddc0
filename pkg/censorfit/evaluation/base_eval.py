import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np

from censorfit.core.intervals import IntervalEstimate

# Get a logger for this module
logger = logging.getLogger(__name__)

# Interval method -> (coverage column, average-length column)
INTERVAL_COLUMNS = {
    "normal-bootstrap": ("cpb", "alb"),
    "percentile": ("cpp", "alp"),
    "symmetric": ("cps", "als"),
    "hpd": ("cph", "alh"),
}

METRIC_COLUMNS = (
    "mle_bias", "mle_mse", "cpb", "alb", "cpp", "alp",
    "be_bias", "be_mse", "cps", "als", "cph", "alh",
)


@dataclass
class ParameterRecord:
    """Point estimates and intervals for one parameter in one replication."""
    mle: float
    be: float
    intervals: Dict[str, IntervalEstimate] = field(default_factory=dict)


@dataclass
class ReplicationRecord:
    """Everything a single replication contributes for one model family."""
    replication: int
    parameters: Dict[str, ParameterRecord]
    bootstrap_flagged: bool = False
    ess_flagged: bool = False
    boundary: bool = False


@dataclass
class ParameterMetrics:
    parameter: str
    true_value: float
    mle_bias: float = math.nan
    mle_mse: float = math.nan
    cpb: float = math.nan
    alb: float = math.nan
    cpp: float = math.nan
    alp: float = math.nan
    be_bias: float = math.nan
    be_mse: float = math.nan
    cps: float = math.nan
    als: float = math.nan
    cph: float = math.nan
    alh: float = math.nan

    def metric_values(self) -> List[float]:
        return [getattr(self, name) for name in METRIC_COLUMNS]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class MetricsRow:
    """Monte Carlo performance of one model family on one scenario."""
    scenario: str
    model: str
    label: str
    T: float
    replications: int
    used: int
    failures: int
    flagged: bool
    params: Dict[str, ParameterMetrics]
    tallies: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "model": self.model,
            "label": self.label,
            "T": self.T if math.isfinite(self.T) else "inf",
            "replications": self.replications,
            "used": self.used,
            "failures": self.failures,
            "flagged": self.flagged,
            "params": {name: metrics.to_dict() for name, metrics in self.params.items()},
            "tallies": dict(self.tallies),
        }


def summarize_parameter(name: str, true_value: float, records: Sequence[ParameterRecord]) -> ParameterMetrics:
    """
    Bias, MSE, coverage and average length of one parameter over replications.

    Args:
        name: Parameter name.
        true_value: Generating value of the parameter.
        records: One ParameterRecord per successful replication, in replication order.

    Returns:
        ParameterMetrics; every metric is NaN when `records` is empty.
    """
    metrics = ParameterMetrics(parameter=name, true_value=true_value)
    if not records:
        logger.warning(f"No successful replications to summarize for '{name}'")
        return metrics

    mle_errors = np.array([r.mle for r in records]) - true_value
    be_errors = np.array([r.be for r in records]) - true_value
    metrics.mle_bias = float(np.mean(mle_errors))
    metrics.mle_mse = float(np.mean(mle_errors**2))
    metrics.be_bias = float(np.mean(be_errors))
    metrics.be_mse = float(np.mean(be_errors**2))

    for method, (cp_column, al_column) in INTERVAL_COLUMNS.items():
        intervals = [r.intervals[method] for r in records if method in r.intervals]
        if not intervals:
            continue
        setattr(metrics, cp_column, float(np.mean([iv.contains(true_value) for iv in intervals])))
        setattr(metrics, al_column, float(np.mean([iv.length for iv in intervals])))
    return metrics


def aggregate_replications(
    records: Sequence[ReplicationRecord],
    truths: Mapping[str, float],
) -> Dict[str, ParameterMetrics]:
    """Per-parameter metrics in the order of `truths`."""
    return {
        name: summarize_parameter(name, value, [record.parameters[name] for record in records])
        for name, value in truths.items()
    }


def count_flags(records: Sequence[ReplicationRecord]) -> Dict[str, int]:
    return {
        "bootstrap_flagged": sum(r.bootstrap_flagged for r in records),
        "ess_flagged": sum(r.ess_flagged for r in records),
        "boundary": sum(r.boundary for r in records),
    }
