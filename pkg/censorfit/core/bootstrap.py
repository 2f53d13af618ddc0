"""
Parametric bootstrap: resample from the fitted model under the same censoring
plan, refit, and turn the refitted functionals into percentile and
bias-corrected normal intervals.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Mapping

import numpy as np
from scipy import stats

from censorfit.config import load_defaults
from censorfit.core.censoring import CensoringPlan, generate_sample
from censorfit.core.intervals import IntervalEstimate
from censorfit.core.likelihood import FitOptions, FitResult, fit_restricted, fit_unrestricted
from censorfit.core.sampling import BOOTSTRAP_OFFSET, seed_stream, stream_id
from censorfit.errors import BootstrapFailureError, CensorFitError, UsageError

logger = logging.getLogger(__name__)

Functional = Callable[[FitResult], float]

_REFIT = {
    "restricted": fit_restricted,
    "unrestricted": fit_unrestricted,
}


@dataclass
class BootstrapDraws:
    name: str
    estimates: np.ndarray
    point_estimate: float
    B: int
    failures: int
    flagged: bool = False

    def __post_init__(self):
        self.estimates = np.asarray(self.estimates, dtype=float)
        if self.B < 2:
            raise UsageError(f"Bootstrap needs B >= 2, got {self.B}")
        if len(self.estimates) != self.B - self.failures:
            raise UsageError(
                f"{self.name}: {len(self.estimates)} estimates do not match B - failures = {self.B - self.failures}"
            )

    @property
    def successes(self) -> int:
        return len(self.estimates)


def _check_gamma(gamma: float):
    if not 0 < gamma < 1:
        raise UsageError(f"gamma = 1 - confidence must lie in (0, 1), got {gamma}")


def _require_estimates(draws: BootstrapDraws):
    if draws.successes < 2:
        raise UsageError(f"{draws.name}: at least 2 successful bootstrap estimates are needed, got {draws.successes}")


def bootstrap_mles(
    fit: FitResult,
    plan: CensoringPlan,
    functionals: Mapping[str, Functional],
    B: int,
    seed: int,
    model: str,
    replication: int = 0,
    opts: FitOptions | None = None,
) -> Dict[str, BootstrapDraws]:
    """
    Draws B parametric bootstrap MLEs of every functional.

    Resample b uses stream (seed, stream_id(replication, BOOTSTRAP_OFFSET + b)),
    so the output does not depend on scheduling. A failed refit counts as a
    failure for every functional; it is never imputed.

    Args:
        fit: Converged fit on the original data; its parameters drive generation.
        plan: Censoring plan reused for every resample.
        functionals: Name -> map from a FitResult to a scalar.
        B: Number of resamples.
        seed: Master seed.
        model: "restricted" or "unrestricted"; the family refitted on each resample.
        replication: Replication id used to derive the stream ids.
        opts: Solver options for the refits.

    Returns:
        Name -> BootstrapDraws, in the order the functionals were given.

    Raises:
        UsageError: B < 2, unknown model, or a boundary fit with a zero rate.
        BootstrapFailureError: more than the allowed fraction of refits failed.
    """
    if B < 2:
        raise UsageError(f"Bootstrap needs B >= 2, got {B}")
    if model not in _REFIT:
        raise UsageError(f"Unknown model '{model}'. Supported: {list(_REFIT)}")
    if not (fit.lambda1 > 0 and fit.lambda2 > 0):
        raise UsageError(
            f"Cannot resample from a boundary fit (lambda1={fit.lambda1:.4g}, lambda2={fit.lambda2:.4g})"
        )
    refit = _REFIT[model]
    limits = load_defaults()["bootstrap"]

    collected: Dict[str, list] = {name: [] for name in functionals}
    failures = 0
    for b in range(B):
        rng = seed_stream(seed, stream_id(replication, BOOTSTRAP_OFFSET + b))
        try:
            resample = generate_sample(plan, fit.alpha, fit.lambda1, fit.lambda2, rng)
            refitted = refit(resample, opts)
            values = {name: float(fn(refitted)) for name, fn in functionals.items()}
        except CensorFitError as e:
            logger.debug(f"Bootstrap resample {b} failed: {e}")
            failures += 1
            continue
        if not all(math.isfinite(v) for v in values.values()):
            logger.debug(f"Bootstrap resample {b} produced non-finite functionals: {values}")
            failures += 1
            continue
        for name, value in values.items():
            collected[name].append(value)

    fraction = failures / B
    if fraction > float(limits["max_failure_fraction"]):
        raise BootstrapFailureError(f"{failures} of {B} bootstrap refits failed ({fraction:.0%})")
    flagged = fraction > float(limits["warn_failure_fraction"])
    if flagged:
        logger.warning(f"{failures} of {B} bootstrap refits failed ({fraction:.0%}); intervals are flagged")
    logger.debug(f"Bootstrap done: B={B}, failures={failures}, model={model}")

    return {
        name: BootstrapDraws(
            name=name,
            estimates=np.asarray(collected[name]),
            point_estimate=float(fn(fit)),
            B=B,
            failures=failures,
            flagged=flagged,
        )
        for name, fn in functionals.items()
    }


def percentile_interval(draws: BootstrapDraws, gamma: float) -> IntervalEstimate:
    """Order statistics ceil(B'*gamma/2) and ceil(B'*(1-gamma/2)), 1-based, no interpolation."""
    _check_gamma(gamma)
    _require_estimates(draws)
    ordered = np.sort(draws.estimates)
    count = len(ordered)

    def order_stat(q: float) -> float:
        # tolerance keeps exact products such as 1000*0.975 on their integer
        k = min(max(math.ceil(count * q - 1e-9), 1), count)
        return float(ordered[k - 1])

    return IntervalEstimate(
        lower=order_stat(gamma / 2.0),
        upper=order_stat(1.0 - gamma / 2.0),
        level=1.0 - gamma,
        method="percentile",
        functional=draws.name,
        B=draws.B,
        failures=draws.failures,
    )


def normal_bootstrap_interval(draws: BootstrapDraws, gamma: float) -> IntervalEstimate:
    """tau_hat - b -/+ z_{gamma/2} sqrt(v) with bootstrap bias b and unbiased variance v."""
    _check_gamma(gamma)
    _require_estimates(draws)
    bias = float(np.mean(draws.estimates)) - draws.point_estimate
    variance = float(np.var(draws.estimates, ddof=1))
    z = float(stats.norm.ppf(1.0 - gamma / 2.0))
    centre = draws.point_estimate - bias
    half_width = z * math.sqrt(variance)
    return IntervalEstimate(
        lower=centre - half_width,
        upper=centre + half_width,
        level=1.0 - gamma,
        method="normal-bootstrap",
        functional=draws.name,
        B=draws.B,
        failures=draws.failures,
    )
