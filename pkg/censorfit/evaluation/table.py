"""Renders study results in the layout of the simulation tables."""
import io
import logging
import math
from typing import Dict, List, Sequence

import pandas as pd

from censorfit.config import load_defaults
from censorfit.errors import UsageError

from .base_eval import METRIC_COLUMNS, MetricsRow

logger = logging.getLogger(__name__)

ID_COLUMNS = ("scenario", "model", "scheme", "T", "parameter", "true_value")
COUNT_COLUMNS = ("used", "failures", "flagged")
TABLE_FORMATS = ("csv", "markdown")

# Likelihood side then Bayes side, as the tables print them
MARKDOWN_HEADERS = ("Bias", "MSE", "CPB", "ALB", "CPP", "ALP", "Bias", "MSE", "CPS", "ALS", "CPH", "ALH")

_PRECISION_GROUP = {
    "mle_bias": "bias", "be_bias": "bias",
    "mle_mse": "mse", "be_mse": "mse",
    "cpb": "cp", "cpp": "cp", "cps": "cp", "cph": "cp",
    "alb": "al", "alp": "al", "als": "al", "alh": "al",
}


def _fmt(value: float, digits: int) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return f"{value:.{digits}f}"


def _records(rows: Sequence[MetricsRow], precision: Dict[str, int]) -> List[Dict[str, str]]:
    records = []
    for row in rows:
        for name, metrics in row.params.items():
            record = {
                "scenario": row.scenario,
                "model": row.model,
                "scheme": row.label,
                "T": _fmt(row.T, 2),
                "parameter": name,
                "true_value": f"{metrics.true_value:.4g}",
            }
            for column in METRIC_COLUMNS:
                record[column] = _fmt(getattr(metrics, column), int(precision[_PRECISION_GROUP[column]]))
            record.update({"used": str(row.used), "failures": str(row.failures), "flagged": str(row.flagged).lower()})
            records.append(record)
    return records


def render_table(rows: Sequence[MetricsRow], fmt: str = "csv", precision: Dict[str, int] | None = None) -> str:
    """
    Renders one line per (scenario, model, parameter) with the 12 metric columns.

    Args:
        rows: Study output.
        fmt: "csv" (snake_case headers) or "markdown" (table headers).
        precision: Decimals per metric group (bias, mse, cp, al); defaults.yaml when None.

    Returns:
        The rendered text.
    """
    if not rows:
        raise UsageError("Cannot render an empty table")
    if fmt not in TABLE_FORMATS:
        raise UsageError(f"Unsupported table format '{fmt}'. Supported formats: {list(TABLE_FORMATS)}")
    digits = dict(load_defaults()["table"]["precision"])
    digits.update(precision or {})

    frame = pd.DataFrame(_records(rows, digits), columns=[*ID_COLUMNS, *METRIC_COLUMNS, *COUNT_COLUMNS])
    if fmt == "csv":
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, lineterminator="\n")
        return buffer.getvalue()

    headers = ["Scenario", "Model", "Scheme", "T", "Parameter", "True", *MARKDOWN_HEADERS, "Used", "Failures", "Flagged"]
    lines = [
        "| " + " | ".join(headers) + " |",
        "|" + "|".join("---" for _ in headers) + "|",
    ]
    for values in frame.itertuples(index=False):
        lines.append("| " + " | ".join(str(v) for v in values) + " |")
    logger.debug(f"Rendered {len(frame)} table lines as markdown")
    return "\n".join(lines) + "\n"
