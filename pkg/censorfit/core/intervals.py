from dataclasses import dataclass
from typing import Any, Dict

INTERVAL_METHODS = ("percentile", "normal-bootstrap", "symmetric", "hpd")


@dataclass(frozen=True)
class IntervalEstimate:
    """A two-sided interval for a named scalar functional."""
    lower: float
    upper: float
    level: float
    method: str
    functional: str = ""
    B: int | None = None
    failures: int | None = None

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "functional": self.functional,
            "method": self.method,
            "level": self.level,
            "lower": self.lower,
            "upper": self.upper,
        }
        if self.B is not None:
            result["B"] = self.B
            result["failures"] = self.failures
        return result
