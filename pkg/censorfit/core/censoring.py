"""
Adaptive progressive Type-II censored competing-risks samples: plan, data model,
generator, validator and CSV I/O.
"""
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd

from censorfit.core.sampling import RngStream, sample_subset, sample_weibull
from censorfit.errors import (
    ParameterDomainError,
    PlanError,
    SampleValidationError,
    SchemaError,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("index", "time", "cause", "removed")
SCHEME_KINDS = ("right", "fsp", "osp")


@dataclass(frozen=True)
class CensoringPlan:
    """n units on test, m observed failures, removals R_1..R_m and ideal duration T."""
    n: int
    m: int
    removals: Tuple[int, ...]
    T: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "removals", tuple(int(r) for r in self.removals))
        object.__setattr__(self, "T", float(self.T))
        problems = []
        if not (self.n >= self.m >= 1):
            problems.append(f"n >= m >= 1 (got n={self.n}, m={self.m})")
        if len(self.removals) != self.m:
            problems.append(f"len(R) = m (got {len(self.removals)} removals for m={self.m})")
        if any(r < 0 for r in self.removals):
            problems.append("R_j >= 0")
        if self.m + sum(self.removals) != self.n:
            problems.append(f"m + sum(R) = n (got {self.m} + {sum(self.removals)} != {self.n})")
        if math.isnan(self.T) or self.T <= 0:
            problems.append(f"T > 0 or T = inf (got {self.T})")
        if problems:
            raise PlanError("Invalid censoring plan: " + "; ".join(problems))

    @classmethod
    def from_scheme(cls, n: int, m: int, scheme: str, T: float = math.inf) -> "CensoringPlan":
        return cls(n, m, parse_scheme(scheme, n, m), T)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "R": list(self.removals),
            "T": "inf" if math.isinf(self.T) else self.T,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CensoringPlan":
        try:
            n, m = int(data["n"]), int(data["m"])
            removals = data["R"]
        except KeyError as e:
            raise PlanError(f"Plan is missing key {e}") from e
        if isinstance(removals, str):
            removals = parse_scheme(removals, n, m)
        return cls(n, m, tuple(removals), parse_duration(data.get("T", "inf")))

    def label(self) -> str:
        """Compact scheme label in the (0,...,0,10) style."""
        nonzero = [(i, r) for i, r in enumerate(self.removals) if r]
        if len(nonzero) == 1 and self.m > 2:
            i, r = nonzero[0]
            if i == self.m - 1:
                return f"(0,...,0,{r})"
            if i == 0:
                return f"({r},0,...,0)"
            return f"(0,...,{r},...,0)"
        return "(" + ",".join(str(r) for r in self.removals) + ")"


def parse_duration(value) -> float:
    """Parses T given as a number or the string 'inf'."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            return float(text)
        except ValueError as e:
            raise PlanError(f"T must be a number or 'inf', got {value!r}") from e
    return float(value)


def parse_scheme(text: str, n: int, m: int) -> Tuple[int, ...]:
    """
    Expands a removal-scheme shorthand.

    right:k -> (0,...,0,k); fsp:k -> (k,0,...,0); osp:k -> k removals at
    position ceil(m/2); anything else is read as an explicit comma list.
    """
    text = text.strip()
    kind, _, count = text.partition(":")
    kind = kind.lower()
    if kind in SCHEME_KINDS and count:
        try:
            k = int(count)
        except ValueError as e:
            raise PlanError(f"Scheme count must be an integer: {text!r}") from e
        if k != n - m:
            raise PlanError(f"Scheme {text!r} removes {k} units but n - m = {n - m}")
        removals = [0] * m
        position = {"right": m - 1, "fsp": 0, "osp": math.ceil(m / 2) - 1}[kind]
        removals[position] = k
        return tuple(removals)
    try:
        return tuple(int(r) for r in text.split(",") if r.strip())
    except ValueError as e:
        raise PlanError(f"Unrecognized scheme {text!r}; use right:k, fsp:k, osp:k or a comma list") from e


@dataclass(frozen=True, eq=False)
class CompetingRisksSample:
    """Ordered failure times, cause labels, effective removals R* and change index J."""
    times: np.ndarray
    causes: np.ndarray
    r_star: np.ndarray
    j_change: int
    plan: CensoringPlan

    def __post_init__(self):
        for name, dtype in (("times", float), ("causes", int), ("r_star", int)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "j_change", int(self.j_change))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompetingRisksSample):
            return NotImplemented
        return (
            self.plan == other.plan
            and self.j_change == other.j_change
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.causes, other.causes)
            and np.array_equal(self.r_star, other.r_star)
        )

    __hash__ = None

    @property
    def m(self) -> int:
        return len(self.times)

    @property
    def n(self) -> int:
        return self.plan.n

    @property
    def m1(self) -> int:
        return int(np.sum(self.causes == 1))

    @property
    def m2(self) -> int:
        return int(np.sum(self.causes == 2))

    def index_set(self, cause: int) -> np.ndarray:
        """0-based positions of failures from `cause` (the set I_cause)."""
        return np.flatnonzero(self.causes == cause)

    def cause_times(self, cause: int) -> np.ndarray:
        return self.times[self.causes == cause]

    @property
    def weights(self) -> np.ndarray:
        """R*_i + 1, the multiplicity attached to x_i in every power sum."""
        return self.r_star + 1

    def scaled(self, c: float) -> "CompetingRisksSample":
        """Same sample with every time (and T) multiplied by c > 0."""
        if not c > 0:
            raise ParameterDomainError(f"Scale factor must be positive, got {c}")
        plan = CensoringPlan(self.plan.n, self.plan.m, self.plan.removals, self.plan.T * c)
        return CompetingRisksSample(self.times * c, self.causes, self.r_star, self.j_change, plan)

    def cause_summary(self) -> Dict[str, Dict[str, float]]:
        """Per-cause failure count, mean lifetime and standard deviation."""
        summary = {}
        for cause in (1, 2):
            t = self.cause_times(cause)
            summary[f"cause{cause}"] = {
                "count": int(t.size),
                "mean": float(np.mean(t)) if t.size else math.nan,
                "sd": float(np.std(t, ddof=1)) if t.size > 1 else math.nan,
            }
        return summary


def _check_increasing(times: np.ndarray, m: int):
    if times.ndim != 1 or len(times) != m:
        raise SampleValidationError([f"length: expected {m} failure times, got {times.size}"])
    if np.any(np.diff(times) <= 0):
        raise SampleValidationError(["strict ordering: failure times must be strictly increasing"])


def change_index(plan: CensoringPlan, times) -> int:
    """J = #{i : x_i <= T}; a failure exactly at T counts as before T."""
    return int(np.sum(np.asarray(times, dtype=float) <= plan.T))


def effective_scheme(plan: CensoringPlan, failure_times) -> np.ndarray:
    """
    The adapted removal vector R*.

    R*_j = R_j for j <= J, 0 for J < j < m, and n - m - sum_{j<=J} R_j at j = m.
    J = m (every failure before T) returns R unchanged.
    """
    times = np.asarray(failure_times, dtype=float)
    _check_increasing(times, plan.m)
    removals = np.asarray(plan.removals, dtype=int)
    J = change_index(plan, times)
    if J >= plan.m:
        return removals.copy()
    r_star = np.zeros(plan.m, dtype=int)
    r_star[:J] = removals[:J]
    r_star[-1] = plan.n - plan.m - int(removals[:J].sum())
    return r_star


def generate_sample(
    plan: CensoringPlan,
    alpha: float,
    lambda1: float,
    lambda2: float,
    rng: RngStream,
) -> CompetingRisksSample:
    """
    Simulates one adaptive progressively censored competing-risks sample.

    Each unit carries latent lifetimes X1 ~ We(alpha, lambda1) and
    X2 ~ We(alpha, lambda2); it fails at min(X1, X2) from the argmin cause
    (cause 1 on ties). After the j-th failure, R_j survivors are withdrawn at
    random while the failure time is <= T, none once T has passed, and all
    remaining units at j = m.
    """
    x1 = sample_weibull(rng, alpha, lambda1, size=plan.n)
    x2 = sample_weibull(rng, alpha, lambda2, size=plan.n)
    lifetimes = np.minimum(x1, x2)
    cause_of = np.where(x1 <= x2, 1, 2)

    order = np.argsort(lifetimes, kind="stable")
    alive = np.ones(plan.n, dtype=bool)  # indexed by rank in `order`
    times = np.empty(plan.m)
    causes = np.empty(plan.m, dtype=int)
    r_star = np.zeros(plan.m, dtype=int)

    cursor = 0
    for j in range(plan.m):
        while not alive[cursor]:
            cursor += 1
        unit = order[cursor]
        alive[cursor] = False
        times[j] = lifetimes[unit]
        causes[j] = cause_of[unit]

        survivors = np.flatnonzero(alive)
        if j == plan.m - 1:
            k = survivors.size
        elif times[j] <= plan.T:
            k = plan.removals[j]
        else:
            k = 0
        if k:
            alive[sample_subset(rng, survivors, k)] = False
        r_star[j] = k

    sample = CompetingRisksSample(times, causes, r_star, change_index(plan, times), plan)
    logger.debug(f"Generated sample: m1={sample.m1}, m2={sample.m2}, J={sample.j_change}")
    return sample


def validate_sample(sample: CompetingRisksSample) -> List[str]:
    """Returns every invariant violation found; an empty list means the sample is valid."""
    violations: List[str] = []
    plan = sample.plan
    x, causes, r_star = sample.times, sample.causes, sample.r_star

    if not (len(x) == len(causes) == len(r_star) == plan.m):
        violations.append(
            f"length: expected {plan.m} rows, got times={len(x)}, causes={len(causes)}, removed={len(r_star)}"
        )
        return violations
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        violations.append("positive times: every failure time must be positive and finite")
    ordered = bool(np.all(np.diff(x) > 0))
    if not ordered:
        violations.append("strict ordering: failure times must be strictly increasing")
    if not np.all(np.isin(causes, (1, 2))):
        violations.append("cause labels: causes must be 1 or 2")
    if np.any(r_star < 0):
        violations.append("negative removal: removed counts must be non-negative")
    if plan.m + int(r_star.sum()) != plan.n:
        violations.append(f"removal sum: m + sum(removed) = {plan.m + int(r_star.sum())}, expected n = {plan.n}")
    if ordered:
        if sample.j_change != change_index(plan, x):
            violations.append(f"change index: J = {sample.j_change}, expected {change_index(plan, x)}")
        expected = effective_scheme(plan, x)
        if not np.array_equal(expected, r_star):
            violations.append(f"effective scheme: removed {r_star.tolist()} differs from R* {expected.tolist()}")
    return violations


def plan_sidecar_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".plan.json"


def write_sample(sample: CompetingRisksSample, path: str, write_plan: bool = True) -> str | None:
    """
    Writes the sample CSV (index,time,cause,removed) and, by default, the plan sidecar.

    Returns the sidecar path when one was written.
    """
    violations = validate_sample(sample)
    if violations:
        raise SampleValidationError(violations)
    frame = pd.DataFrame({
        "index": np.arange(1, sample.m + 1),
        "time": sample.times,
        "cause": sample.causes,
        "removed": sample.r_star,
    })
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote {sample.m} failures to {path}")
    if not write_plan:
        return None
    sidecar = plan_sidecar_path(path)
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump(sample.plan.to_dict(), f, indent=2)
    return sidecar


def read_plan(path: str) -> CensoringPlan:
    with open(path, "r", encoding="utf-8") as f:
        return CensoringPlan.from_dict(json.load(f))


def read_sample(path: str, plan: CensoringPlan | None = None) -> CompetingRisksSample:
    """
    Reads a sample CSV; the plan comes from `plan` or from the JSON sidecar.

    Raises:
        SchemaError: missing/unknown columns or malformed rows.
        SampleValidationError: the rows break a sample invariant.
    """
    if plan is None:
        sidecar = plan_sidecar_path(path)
        if not os.path.exists(sidecar):
            raise SchemaError(f"No plan given and no sidecar found at {sidecar}")
        plan = read_plan(sidecar)

    try:
        frame = pd.read_csv(path, float_precision="round_trip", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaError(f"Could not parse {path}: {e}") from e

    columns = [c.strip() for c in frame.columns]
    for column in CSV_COLUMNS:
        if column not in columns:
            raise SchemaError(f"Missing column '{column}' in {path}; expected header {','.join(CSV_COLUMNS)}", column)
    extra = [c for c in columns if c not in CSV_COLUMNS]
    if extra:
        raise SchemaError(f"Unexpected column(s) {extra} in {path}", extra[0])
    frame.columns = columns

    for column in CSV_COLUMNS:
        values = pd.to_numeric(frame[column], errors="coerce")
        if values.isna().any():
            row = int(np.flatnonzero(values.isna().to_numpy())[0]) + 1
            raise SchemaError(f"Malformed value in column '{column}' at data row {row}", column)
        frame[column] = values
    for column in ("index", "cause", "removed"):
        if not np.all(np.equal(np.mod(frame[column].to_numpy(), 1), 0)):
            raise SchemaError(f"Column '{column}' must hold integers", column)

    if not np.array_equal(frame["index"].to_numpy(), np.arange(1, len(frame) + 1)):
        raise SchemaError("Column 'index' must run 1..m in order", "index")
    if len(frame) != plan.m:
        raise SampleValidationError([f"length: file has {len(frame)} rows, plan expects m = {plan.m}"])

    times = frame["time"].to_numpy(dtype=float)
    sample = CompetingRisksSample(
        times,
        frame["cause"].to_numpy(dtype=int),
        frame["removed"].to_numpy(dtype=int),
        change_index(plan, times),
        plan,
    )
    violations = validate_sample(sample)
    if violations:
        raise SampleValidationError(violations)
    logger.info(f"Read {sample.m} failures from {path} (m1={sample.m1}, m2={sample.m2}, J={sample.j_change})")
    return sample
