from .base_eval import (
    INTERVAL_COLUMNS,
    METRIC_COLUMNS,
    MetricsRow,
    ParameterMetrics,
    ParameterRecord,
    ReplicationRecord,
    aggregate_replications,
    count_flags,
    summarize_parameter,
)
from .table import TABLE_FORMATS, render_table

__all__ = [
    "INTERVAL_COLUMNS",
    "METRIC_COLUMNS",
    "MetricsRow",
    "ParameterMetrics",
    "ParameterRecord",
    "ReplicationRecord",
    "aggregate_replications",
    "count_flags",
    "summarize_parameter",
    "TABLE_FORMATS",
    "render_table",
]
