"""
Log-likelihoods, the profile log-likelihood of the common shape, MLE solvers for
the order-restricted, unrestricted and equal-scales models, and the
likelihood-ratio test of equal scales.

Power sums are evaluated in the log domain, so x**alpha never overflows even for
extreme alpha iterates or heavily rescaled data.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy import optimize, special, stats

from censorfit.config import load_defaults
from censorfit.core.censoring import CompetingRisksSample
from censorfit.errors import (
    ConvergenceError,
    DegenerateSampleError,
    FixedPointDomainError,
    ParameterDomainError,
    SolverInconsistencyError,
    UsageError,
)

logger = logging.getLogger(__name__)

SOLVER_METHODS = ("fixed-point", "newton", "bounded")


# --- Parameter containers ---
@dataclass(frozen=True)
class RestrictedParams:
    """theta = (alpha, lambda1, beta) with lambda2 = beta * lambda1, 0 < beta <= 1.

    beta = 0 only appears as a flagged boundary MLE (no cause-2 failures).
    """
    alpha: float
    lambda1: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.lambda1 > 0 and 0 <= self.beta <= 1):
            raise ParameterDomainError(
                f"Restricted parameters need alpha > 0, lambda1 > 0, 0 < beta <= 1; got {self}"
            )

    @property
    def lambda2(self) -> float:
        return self.beta * self.lambda1

    def as_dict(self) -> Dict[str, float]:
        return {"alpha": self.alpha, "lambda1": self.lambda1, "lambda2": self.lambda2, "beta": self.beta}


@dataclass(frozen=True)
class UnrestrictedParams:
    """zeta = (alpha, lambda1, lambda2); a zero rate only appears as a flagged boundary MLE."""
    alpha: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.lambda1 >= 0 and self.lambda2 >= 0):
            raise ParameterDomainError(f"Unrestricted parameters must be positive; got {self}")

    @property
    def beta(self) -> float:
        return self.lambda2 / self.lambda1 if self.lambda1 > 0 else math.inf

    def as_dict(self) -> Dict[str, float]:
        return {"alpha": self.alpha, "lambda1": self.lambda1, "lambda2": self.lambda2}


@dataclass(frozen=True)
class NullParams:
    """Equal-scales model lambda1 = lambda2 = lam."""
    alpha: float
    lam: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.lam > 0):
            raise ParameterDomainError(f"Null-model parameters must be positive; got {self}")

    @property
    def lambda1(self) -> float:
        return self.lam

    @property
    def lambda2(self) -> float:
        return self.lam

    def as_dict(self) -> Dict[str, float]:
        return {"alpha": self.alpha, "lambda1": self.lam, "lambda2": self.lam}


@dataclass
class FitOptions:
    alpha0: float | None = None
    eps: float = 1e-8
    max_iter: int = 500
    method: str = "fixed-point"
    bracket: Tuple[float, float] = (1e-4, 1e4)
    fallback_tol: float = 1e-10

    def __post_init__(self):
        if self.method not in SOLVER_METHODS:
            raise UsageError(f"Unknown solver method '{self.method}'. Supported: {list(SOLVER_METHODS)}")
        if self.eps <= 0 or self.max_iter < 1:
            raise UsageError("eps must be positive and max_iter at least 1")
        if self.alpha0 is not None and not self.alpha0 > 0:
            raise UsageError(f"alpha0 must be positive, got {self.alpha0}")

    @classmethod
    def from_defaults(cls, **overrides) -> "FitOptions":
        solver = load_defaults()["solver"]
        values = {
            "eps": float(solver["eps"]),
            "max_iter": int(solver["max_iter"]),
            "method": solver["method"],
            "bracket": tuple(float(b) for b in solver["bracket"]),
            "fallback_tol": float(solver["fallback_tol"]),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class FitResult:
    model: str
    params: RestrictedParams | UnrestrictedParams | NullParams
    max_loglik: float
    iterations: int
    converged: bool
    method: str
    boundary: bool = False
    solver_trace: List[float] = field(default_factory=list)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def lambda1(self) -> float:
        return self.params.lambda1

    @property
    def lambda2(self) -> float:
        return self.params.lambda2

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {"model": self.model}
        result.update(self.params.as_dict())
        result.update({
            "loglik": self.max_loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "method": self.method,
            "boundary": self.boundary,
        })
        return result


# --- Power sums ---
def _log_power_moments(sample: CompetingRisksSample, alpha: float) -> Tuple[float, float, float]:
    """(log g, g1/g, g2/g) computed with a softmax over alpha*ln x + ln(R*+1)."""
    log_x = np.log(sample.times)
    log_terms = alpha * log_x + np.log(sample.weights)
    log_g = special.logsumexp(log_terms)
    p = np.exp(log_terms - log_g)
    return float(log_g), float(p @ log_x), float(p @ log_x**2)


def log_power_sum(sample: CompetingRisksSample, alpha) -> np.ndarray | float:
    """log g(alpha), vectorized over an array of alpha values."""
    log_x = np.log(sample.times)
    log_w = np.log(sample.weights)
    alphas = np.asarray(alpha, dtype=float)
    log_g = special.logsumexp(np.multiply.outer(alphas, log_x) + log_w, axis=-1)
    return float(log_g) if np.ndim(log_g) == 0 else log_g


def weighted_power_sums(sample: CompetingRisksSample, alpha: float) -> Tuple[float, float, float]:
    """g = sum (R*_i+1) x_i^a, g1 = sum (R*_i+1) x_i^a ln x_i, g2 = sum (R*_i+1) x_i^a (ln x_i)^2."""
    log_g, r1, r2 = _log_power_moments(sample, alpha)
    g = math.exp(log_g)
    return g, g * r1, g * r2


# --- Log-likelihoods ---
def _sum_log_x(sample: CompetingRisksSample) -> float:
    return float(np.sum(np.log(sample.times)))


def loglik_restricted(params: RestrictedParams, sample: CompetingRisksSample) -> float:
    m, m2 = sample.m, sample.m2
    g = math.exp(log_power_sum(sample, params.alpha))
    return float(
        m * (math.log(params.alpha) + math.log(params.lambda1))
        + special.xlogy(m2, params.beta)
        + (params.alpha - 1.0) * _sum_log_x(sample)
        - params.lambda1 * (1.0 + params.beta) * g
    )


def loglik_unrestricted(params: UnrestrictedParams, sample: CompetingRisksSample) -> float:
    g = math.exp(log_power_sum(sample, params.alpha))
    return float(
        sample.m * math.log(params.alpha)
        + special.xlogy(sample.m1, params.lambda1)
        + special.xlogy(sample.m2, params.lambda2)
        + (params.alpha - 1.0) * _sum_log_x(sample)
        - (params.lambda1 + params.lambda2) * g
    )


def loglik_null(params: NullParams, sample: CompetingRisksSample) -> float:
    g = math.exp(log_power_sum(sample, params.alpha))
    return float(
        sample.m * (math.log(params.alpha) + math.log(params.lam))
        + (params.alpha - 1.0) * _sum_log_x(sample)
        - 2.0 * params.lam * g
    )


# --- Profile log-likelihood ---
def profile_p1(alpha: float, sample: CompetingRisksSample) -> float:
    """p1(alpha) = m ln alpha - m ln g(alpha) + (alpha - 1) sum ln x_i (also serves as p3)."""
    if not alpha > 0:
        return -math.inf
    m = sample.m
    return float(m * math.log(alpha) - m * log_power_sum(sample, alpha) + (alpha - 1.0) * _sum_log_x(sample))


def profile_p2(beta: float, m: int, m2: int) -> float:
    """p2(beta) = -m ln(1 + beta) + m2 ln beta."""
    return float(-m * math.log1p(beta) + special.xlogy(m2, beta))


def profile_p1_derivatives(alpha: float, sample: CompetingRisksSample) -> Tuple[float, float]:
    """(p1'(alpha), p1''(alpha))."""
    m = sample.m
    _, r1, r2 = _log_power_moments(sample, alpha)
    first = m / alpha - m * r1 + _sum_log_x(sample)
    second = -m / alpha**2 - m * (r2 - r1**2)
    return float(first), float(second)


def fixed_point_map_h(alpha: float, sample: CompetingRisksSample) -> float:
    """h(alpha) = [g1/g - (1/m) sum ln x_i]^(-1); its fixed point is the profile maximizer."""
    _, r1, _ = _log_power_moments(sample, alpha)
    denominator = r1 - _sum_log_x(sample) / sample.m
    if not (np.isfinite(denominator) and denominator > 0):
        raise FixedPointDomainError(f"h({alpha:.6g}) has non-positive denominator {denominator:.3g}")
    return float(1.0 / denominator)


def profile_series(
    sample: CompetingRisksSample,
    lower: float = 0.05,
    upper: float = 10.0,
    points: int = 200,
) -> List[Tuple[float, float]]:
    """(alpha, p1(alpha)) pairs over a log-spaced grid, for plotting the profile."""
    if not (0 < lower < upper) or points < 2:
        raise UsageError(f"Profile grid needs 0 < lower < upper and points >= 2; got ({lower}, {upper}, {points})")
    return [(float(a), profile_p1(float(a), sample)) for a in np.geomspace(lower, upper, points)]


# --- Solvers ---
def check_fittable(sample: CompetingRisksSample):
    if sample.m < 2:
        raise DegenerateSampleError(f"At least two failures are needed to fit the shape; got m = {sample.m}")
    if np.unique(sample.times).size < 2:
        raise DegenerateSampleError(
            "All failure times are equal: the profile log-likelihood of alpha is unbounded and has no finite maximizer"
        )


def _starting_value(sample: CompetingRisksSample, opts: FitOptions) -> float:
    if opts.alpha0 is not None:
        return opts.alpha0
    from censorfit.core.bayes import prestimate_alpha  # bayes imports this module

    alpha0 = prestimate_alpha(sample)
    return alpha0 if np.isfinite(alpha0) and alpha0 > 0 else 1.0


def _bounded_search(sample: CompetingRisksSample, opts: FitOptions) -> Tuple[float, int, bool]:
    """Bounded golden-section/parabolic search of p1 over log(alpha) in the bracket."""
    lo, hi = (math.log(b) for b in opts.bracket)
    result = optimize.minimize_scalar(
        lambda u: -profile_p1(math.exp(u), sample),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": opts.fallback_tol, "maxiter": 10 * opts.max_iter},
    )
    return float(math.exp(result.x)), int(result.nfev), bool(result.success)


def _iterate(sample: CompetingRisksSample, alpha0: float, opts: FitOptions, trace: List[float]) -> Tuple[float, int, bool]:
    """Fixed-point (alpha <- h(alpha)) or Newton-Raphson iteration on p1'."""
    alpha = alpha0
    trace.append(alpha)
    for k in range(1, opts.max_iter + 1):
        try:
            if opts.method == "newton":
                d1, d2 = profile_p1_derivatives(alpha, sample)
                new_alpha = alpha - d1 / d2
            else:
                new_alpha = fixed_point_map_h(alpha, sample)
        except FixedPointDomainError as e:
            logger.debug(f"Iteration left the basin at step {k}: {e}")
            return alpha, k, False
        if not (np.isfinite(new_alpha) and new_alpha > 0):
            logger.debug(f"Iteration produced invalid alpha {new_alpha} at step {k}")
            return alpha, k, False
        trace.append(new_alpha)
        if abs(new_alpha - alpha) < opts.eps:
            return new_alpha, k, True
        alpha = new_alpha
    return alpha, opts.max_iter, False


def _polish(sample: CompetingRisksSample, alpha: float) -> float:
    """One Newton step on p1', kept only if it does not lower p1."""
    d1, d2 = profile_p1_derivatives(alpha, sample)
    if not (np.isfinite(d1) and np.isfinite(d2)) or d2 >= 0:
        return alpha
    candidate = alpha - d1 / d2
    if candidate > 0 and profile_p1(candidate, sample) >= profile_p1(alpha, sample):
        return candidate
    return alpha


def maximize_profile(sample: CompetingRisksSample, opts: FitOptions | None = None) -> Tuple[float, int, bool, List[float], str]:
    """
    Maximizes p1 over alpha.

    Returns:
        (alpha_hat, iterations, converged, trace, method_used)

    Raises:
        DegenerateSampleError: m < 2 or all times equal.
        ConvergenceError: the bounded fallback also failed.
    """
    opts = opts or FitOptions.from_defaults()
    check_fittable(sample)
    trace: List[float] = []

    if opts.method != "bounded":
        alpha0 = _starting_value(sample, opts)
        alpha, iterations, converged = _iterate(sample, alpha0, opts, trace)
        if converged:
            return _polish(sample, alpha), iterations, True, trace, opts.method
        logger.warning(
            f"{opts.method} iteration did not converge from alpha0={alpha0:.4g} after {iterations} steps; "
            "falling back to bounded search"
        )
    else:
        iterations = 0

    alpha, evaluations, success = _bounded_search(sample, opts)
    trace.append(alpha)
    lo, hi = opts.bracket
    if not success or not np.isfinite(alpha) or not (lo < alpha < hi):
        raise ConvergenceError(
            f"Profile maximization failed (bounded search ended at alpha={alpha:.6g})", trace
        )
    return _polish(sample, alpha), iterations + evaluations, True, trace, "bounded"


def fit_restricted(sample: CompetingRisksSample, opts: FitOptions | None = None) -> FitResult:
    """MLE of (alpha, lambda1, beta) under lambda2 = beta * lambda1, 0 < beta <= 1."""
    alpha, iterations, converged, trace, method = maximize_profile(sample, opts)
    m, m1, m2 = sample.m, sample.m1, sample.m2
    beta = m2 / m1 if m1 > m2 else 1.0
    g = math.exp(log_power_sum(sample, alpha))
    lambda1 = m / ((1.0 + beta) * g)
    params = RestrictedParams(alpha, lambda1, beta)
    result = FitResult(
        model="restricted",
        params=params,
        max_loglik=loglik_restricted(params, sample),
        iterations=iterations,
        converged=converged,
        method=method,
        boundary=m2 == 0,
        solver_trace=trace,
    )
    logger.debug(f"Restricted fit: {params.as_dict()} loglik={result.max_loglik:.6f}")
    return result


def fit_unrestricted(sample: CompetingRisksSample, opts: FitOptions | None = None) -> FitResult:
    """MLE of (alpha, lambda1, lambda2); lambda_k = m_k / g(alpha_hat)."""
    alpha, iterations, converged, trace, method = maximize_profile(sample, opts)
    g = math.exp(log_power_sum(sample, alpha))
    params = UnrestrictedParams(alpha, sample.m1 / g, sample.m2 / g)
    boundary = sample.m1 == 0 or sample.m2 == 0
    if boundary:
        logger.warning(f"Boundary fit: m1={sample.m1}, m2={sample.m2}; a scale estimate is zero")
    result = FitResult(
        model="unrestricted",
        params=params,
        max_loglik=loglik_unrestricted(params, sample),
        iterations=iterations,
        converged=converged,
        method=method,
        boundary=boundary,
        solver_trace=trace,
    )
    logger.debug(f"Unrestricted fit: {params.as_dict()} loglik={result.max_loglik:.6f}")
    return result


def fit_null_equal_scales(sample: CompetingRisksSample, opts: FitOptions | None = None) -> FitResult:
    """MLE under H0: lambda1 = lambda2 = lam, with lam = m / (2 g(alpha_hat))."""
    alpha, iterations, converged, trace, method = maximize_profile(sample, opts)
    g = math.exp(log_power_sum(sample, alpha))
    params = NullParams(alpha, sample.m / (2.0 * g))
    return FitResult(
        model="null",
        params=params,
        max_loglik=loglik_null(params, sample),
        iterations=iterations,
        converged=converged,
        method=method,
        solver_trace=trace,
    )


# --- Likelihood-ratio test ---
@dataclass(frozen=True)
class LrtResult:
    statistic: float
    df: int
    critical: float
    p_value: float
    reject: bool
    level: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_stat": self.statistic,
            "df": self.df,
            "critical": self.critical,
            "p_value": self.p_value,
            "reject": self.reject,
            "level": self.level,
        }


def lrt_decision(statistic: float, level: float = 0.05) -> LrtResult:
    """Chi-square(1) decision for a stored likelihood-ratio statistic."""
    if not 0 < level < 1:
        raise UsageError(f"Significance level must lie in (0, 1), got {level}")
    if not statistic >= -1e-8:
        raise UsageError(f"Likelihood-ratio statistic must be non-negative, got {statistic}")
    statistic = max(float(statistic), 0.0)
    critical = float(stats.chi2.ppf(1.0 - level, df=1))
    # chi2(1) survival function: P(Z^2 > s) = erfc(sqrt(s / 2))
    p_value = float(special.erfc(math.sqrt(statistic / 2.0)))
    return LrtResult(statistic, 1, critical, p_value, statistic > critical, level)


def lrt_equal_scales(sample: CompetingRisksSample, level: float = 0.05, opts: FitOptions | None = None) -> LrtResult:
    """Tests H0: lambda1 = lambda2 against H1: lambda1 != lambda2."""
    full = fit_unrestricted(sample, opts)
    null = fit_null_equal_scales(sample, opts)
    statistic = -2.0 * (null.max_loglik - full.max_loglik)
    if statistic < -1e-8:
        raise SolverInconsistencyError(
            f"Likelihood-ratio statistic is negative ({statistic:.3g}): null fit exceeds the full model"
        )
    result = lrt_decision(statistic, level)
    logger.info(
        f"LRT equal scales: Lambda={result.statistic:.4f}, critical={result.critical:.4f}, "
        f"p={result.p_value:.4g}, reject={result.reject}"
    )
    return result
