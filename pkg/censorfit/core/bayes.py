"""
Importance-sampling posterior for the order-restricted and unrestricted
models: regression prestimate of the shape, proposal draws, log-domain weights,
Bayes estimates under squared error loss, and symmetric / HPD credible
intervals from the weighted draws.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Sequence

import numpy as np
from scipy import special, stats

from censorfit.config import load_defaults
from censorfit.core.censoring import CompetingRisksSample
from censorfit.core.intervals import IntervalEstimate
from censorfit.core.likelihood import log_power_sum
from censorfit.core.sampling import RngStream, sample_gamma, sample_uniform
from censorfit.errors import (
    DegenerateSampleError,
    ParameterDomainError,
    PropagationError,
    ResolutionError,
    SampleValidationError,
    UsageError,
    WeightDegeneracyError,
)

logger = logging.getLogger(__name__)

PROPOSALS = ("regression", "posterior-gamma")
CUMULATIVE_TOL = 1e-10

Functional = str | np.ndarray | Callable[["ImportanceDraws"], np.ndarray]


@dataclass(frozen=True)
class Priors:
    """Gamma(a, rate b) priors on rates and shape; Beta(a3, b3) on the scale ratio."""
    a1: float = 0.1
    b1: float = 0.1
    a2: float = 0.1
    b2: float = 0.1
    a3: float = 1.0
    b3: float = 1.0
    a4: float = 0.1
    b4: float = 0.1
    a5: float = 0.1
    b5: float = 0.1
    a6: float = 0.1
    b6: float = 0.1

    def __post_init__(self):
        bad = {k: v for k, v in asdict(self).items() if not (math.isfinite(v) and v > 0)}
        if bad:
            raise ParameterDomainError(f"Prior hyperparameters must be positive: {bad}")

    @classmethod
    def from_defaults(cls, **overrides) -> "Priors":
        values = {k: float(v) for k, v in load_defaults()["priors"].items()}
        values.update({k: float(v) for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


class DerivedStats:
    """The data summaries A1..A5 entering the conditional posteriors, kept in log form where positive."""

    def __init__(self, sample: CompetingRisksSample, priors: Priors):
        self.sample = sample
        self.priors = priors
        self.m, self.m1, self.m2 = sample.m, sample.m1, sample.m2
        self.sum_log_x = float(np.sum(np.log(sample.times)))
        self.A2 = priors.b2 - self.sum_log_x
        self.A5 = priors.b6 - self.sum_log_x

    def log_g(self, alpha) -> np.ndarray:
        return np.asarray(log_power_sum(self.sample, alpha), dtype=float)

    def log_A1(self, alpha, beta) -> np.ndarray:
        return np.logaddexp(math.log(self.priors.b1), np.log1p(beta) + self.log_g(alpha))

    def log_A3(self, alpha) -> np.ndarray:
        return np.logaddexp(math.log(self.priors.b4), self.log_g(alpha))

    def log_A4(self, alpha) -> np.ndarray:
        return np.logaddexp(math.log(self.priors.b5), self.log_g(alpha))


@dataclass
class ImportanceDraws:
    model: str
    alpha: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    beta: np.ndarray | None
    log_weights: np.ndarray
    weights: np.ndarray
    alpha_tilde: float
    proposal_rate: float
    proposal: str = "regression"
    ess: float = field(init=False, default=0.0)
    flagged: bool = False

    def __post_init__(self):
        self.ess = float(1.0 / np.sum(self.weights**2))

    @property
    def M(self) -> int:
        return len(self.weights)

    def values(self, name: str) -> np.ndarray:
        if name == "beta":
            return self.beta if self.beta is not None else self.lambda2 / self.lambda1
        if name in ("alpha", "lambda1", "lambda2"):
            return getattr(self, name)
        raise UsageError(f"Unknown posterior quantity '{name}'. Supported: ['alpha', 'lambda1', 'lambda2', 'beta']")


# --- Prestimate ---
def regression_shape_estimate(times) -> float:
    """
    Probability-plot estimate of a Weibull shape.

    Regresses y_i = ln(-ln(1 - (i - 0.5)/l)) on ln t_(i) over the ascending
    order statistics and returns the least squares slope.

    Raises:
        SampleValidationError: fewer than two or non-positive times.
        DegenerateSampleError: all times equal.
    """
    t = np.sort(np.asarray(times, dtype=float))
    l = t.size
    if l < 2:
        raise SampleValidationError([f"regression needs at least 2 times, got {l}"])
    if not np.all(t > 0):
        raise SampleValidationError(["regression needs positive times"])
    if t[0] == t[-1]:
        raise DegenerateSampleError("All times are equal: the regression slope is undefined")
    positions = (np.arange(1, l + 1) - 0.5) / l
    y = np.log(-np.log1p(-positions))
    return float(stats.linregress(np.log(t), y).slope)


def prestimate_alpha(sample: CompetingRisksSample) -> float:
    """Average of the per-cause regression estimates; a cause with fewer than 2 failures is skipped."""
    estimates: List[float] = []
    for cause in (1, 2):
        times = sample.cause_times(cause)
        if times.size < 2:
            continue
        slope = regression_shape_estimate(times)
        if math.isfinite(slope) and slope > 0:
            estimates.append(slope)
        else:
            logger.debug(f"Discarding non-positive regression slope {slope:.4g} for cause {cause}")
    if not estimates:
        logger.debug("No usable cause subsample for the prestimate; using alpha_tilde = 1")
        return 1.0
    return float(np.mean(estimates))


# --- Conditional gamma draws ---
def _gamma_over_log_rate(rng: RngStream, shape: float, log_rate: np.ndarray) -> np.ndarray:
    """Gamma(shape, rate) draws with the rate given on the log scale."""
    standard = sample_gamma(rng, shape, 1.0, size=np.shape(log_rate))
    return np.asarray(standard) * np.exp(-np.asarray(log_rate))


def draw_lambda1_restricted(rng: RngStream, derived: DerivedStats, alpha, beta) -> np.ndarray:
    """lambda1 | alpha, beta, data ~ gamma(m + a1, rate A1(alpha, beta))."""
    return _gamma_over_log_rate(rng, derived.m + derived.priors.a1, derived.log_A1(alpha, beta))


def draw_lambdas_unrestricted(rng: RngStream, derived: DerivedStats, alpha) -> tuple[np.ndarray, np.ndarray]:
    """lambda1 | alpha ~ gamma(m1 + a4, A3(alpha)); lambda2 | alpha ~ gamma(m2 + a5, A4(alpha))."""
    lambda1 = _gamma_over_log_rate(rng, derived.m1 + derived.priors.a4, derived.log_A3(alpha))
    lambda2 = _gamma_over_log_rate(rng, derived.m2 + derived.priors.a5, derived.log_A4(alpha))
    return lambda1, lambda2


# --- Weights ---
def _normalize(log_weights: np.ndarray) -> np.ndarray:
    finite = np.isfinite(log_weights)
    if np.any(np.isnan(log_weights)) or np.any(log_weights == np.inf):
        raise WeightDegeneracyError("Importance log-weights contain NaN or +inf")
    if not finite.any():
        raise WeightDegeneracyError("Every importance log-weight is -inf")
    weights = np.exp(log_weights - special.logsumexp(log_weights))
    return weights / weights.sum()


def _flag_ess(weights: np.ndarray, model: str) -> bool:
    ess = 1.0 / float(np.sum(weights**2))
    min_ess = float(load_defaults()["bayes"]["min_ess"])
    if ess < min_ess:
        logger.warning(f"Effective sample size {ess:.1f} is below {min_ess:g} ({model} model); posterior is flagged")
        return True
    return False


def _check_draw_count(M: int):
    if M < 2:
        raise UsageError(f"Importance sampling needs M >= 2, got {M}")


def draw_importance_restricted(
    sample: CompetingRisksSample,
    priors: Priors,
    M: int,
    rng: RngStream,
    proposal: str = "regression",
) -> ImportanceDraws:
    """
    Importance sample from the order-restricted posterior.

    The default proposal draws alpha ~ gamma(2, rate 2/alpha_tilde) around the
    regression prestimate and beta ~ Uniform(0, 1). "posterior-gamma" draws
    alpha ~ gamma(m + a2 - 1, rate A2) instead and is only defined when A2 > 0.
    lambda1 always comes from its exact conditional.
    """
    _check_draw_count(M)
    if proposal not in PROPOSALS:
        raise UsageError(f"Unknown proposal '{proposal}'. Supported: {list(PROPOSALS)}")
    derived = DerivedStats(sample, priors)
    m, m2 = derived.m, derived.m2
    alpha_tilde = prestimate_alpha(sample)

    if proposal == "regression":
        rate = 2.0 / alpha_tilde
        alpha = np.asarray(sample_gamma(rng, 2.0, rate, size=M))
    else:
        shape = m + priors.a2 - 1.0
        if not (derived.A2 > 0 and shape > 0):
            raise UsageError(
                f"posterior-gamma proposal needs A2 > 0 and m + a2 > 1; got A2={derived.A2:.4g}, shape={shape:.4g}"
            )
        rate = derived.A2
        alpha = np.asarray(sample_gamma(rng, shape, rate, size=M))
    beta = np.asarray(sample_uniform(rng, M))
    lambda1 = draw_lambda1_restricted(rng, derived, alpha, beta)

    log_A1 = derived.log_A1(alpha, beta)
    log_beta_terms = special.xlogy(m2 + priors.a3 - 1.0, beta) + special.xlog1py(priors.b3 - 1.0, -beta)
    if proposal == "regression":
        log_weights = (
            special.xlogy(m + priors.a2 - 2.0, alpha)
            + log_beta_terms
            - alpha * (derived.A2 - rate)
            - (m + priors.a1) * log_A1
        )
    else:
        log_weights = np.log(alpha) + log_beta_terms - (m + priors.a1) * log_A1

    weights = _normalize(log_weights)
    draws = ImportanceDraws(
        model="restricted",
        alpha=alpha,
        lambda1=lambda1,
        lambda2=beta * lambda1,
        beta=beta,
        log_weights=log_weights,
        weights=weights,
        alpha_tilde=alpha_tilde,
        proposal_rate=rate,
        proposal=proposal,
        flagged=_flag_ess(weights, "restricted"),
    )
    logger.debug(f"Restricted importance sample: M={M}, alpha_tilde={alpha_tilde:.4f}, ESS={draws.ess:.1f}")
    return draws


def draw_importance_unrestricted(
    sample: CompetingRisksSample,
    priors: Priors,
    M: int,
    rng: RngStream,
) -> ImportanceDraws:
    """Importance sample from the unrestricted posterior; alpha ~ gamma(2, rate 2/alpha_tilde)."""
    _check_draw_count(M)
    derived = DerivedStats(sample, priors)
    m, m1, m2 = derived.m, derived.m1, derived.m2
    alpha_tilde = prestimate_alpha(sample)
    rate = 2.0 / alpha_tilde

    alpha = np.asarray(sample_gamma(rng, 2.0, rate, size=M))
    lambda1, lambda2 = draw_lambdas_unrestricted(rng, derived, alpha)

    log_weights = (
        special.xlogy(m + priors.a6 - 2.0, alpha)
        - alpha * (derived.A5 - rate)
        - (m1 + priors.a4) * derived.log_A3(alpha)
        - (m2 + priors.a5) * derived.log_A4(alpha)
    )
    weights = _normalize(log_weights)
    draws = ImportanceDraws(
        model="unrestricted",
        alpha=alpha,
        lambda1=lambda1,
        lambda2=lambda2,
        beta=None,
        log_weights=log_weights,
        weights=weights,
        alpha_tilde=alpha_tilde,
        proposal_rate=rate,
        flagged=_flag_ess(weights, "unrestricted"),
    )
    logger.debug(f"Unrestricted importance sample: M={M}, alpha_tilde={alpha_tilde:.4f}, ESS={draws.ess:.1f}")
    return draws


# --- Posterior functionals ---
def _evaluate(draws: ImportanceDraws, h: Functional) -> np.ndarray:
    if isinstance(h, str):
        values = draws.values(h)
    elif callable(h):
        values = h(draws)
    else:
        values = h
    values = np.broadcast_to(np.asarray(values, dtype=float), (draws.M,))
    bad = np.flatnonzero(~np.isfinite(values) & (draws.weights > 0))
    if bad.size:
        raise PropagationError(f"Functional is not finite at draw index {int(bad[0])} (value {values[bad[0]]})")
    return np.where(draws.weights > 0, values, 0.0)


def bayes_estimate(draws: ImportanceDraws, h: Functional) -> float:
    """Posterior mean of h under squared error loss: sum_i w*_i h_i."""
    return float(draws.weights @ _evaluate(draws, h))


def monte_carlo_se(draws: ImportanceDraws, h: Functional) -> float:
    """Standard error of the self-normalized estimate: sqrt(sum_i w*_i^2 (h_i - BE)^2)."""
    values = _evaluate(draws, h)
    estimate = float(draws.weights @ values)
    return float(math.sqrt(np.sum(draws.weights**2 * (values - estimate) ** 2)))


def _sorted_cumulative(draws: ImportanceDraws, h: Functional, gamma: float):
    if not 0 < gamma < 1:
        raise UsageError(f"gamma must lie in (0, 1), got {gamma}")
    # zero-weight draws carry no posterior mass and never bound an interval
    keep = draws.weights > 0
    values = _evaluate(draws, h)[keep]
    weights = draws.weights[keep]
    order = np.argsort(values, kind="stable")
    h_sorted = values[order]
    w_sorted = weights[order]
    cumulative = np.cumsum(w_sorted)
    prefix = np.concatenate(([0.0], cumulative[:-1]))
    return h_sorted, w_sorted, cumulative, prefix


def _name(h: Functional) -> str:
    return h if isinstance(h, str) else getattr(h, "__name__", "")


def symmetric_cri(draws: ImportanceDraws, h: Functional, gamma: float) -> IntervalEstimate:
    """
    Equal-tail credible interval [h_(j1), h_(j2)].

    j1 is the largest index whose preceding weight is at most gamma/2; j2 is
    the largest index with sum_{j1..j2} w <= 1 - gamma, which must leave at
    least one draw above it so that adding w_(j2+1) exceeds 1 - gamma.

    Raises:
        ResolutionError: no admissible j2 exists for this gamma and M.
    """
    h_sorted, w_sorted, cumulative, prefix = _sorted_cumulative(draws, h, gamma)
    M = len(h_sorted)
    j1 = int(np.searchsorted(prefix, gamma / 2.0 + CUMULATIVE_TOL, side="right")) - 1
    if w_sorted[j1] > 1.0 - gamma + CUMULATIVE_TOL:
        lower = upper = float(h_sorted[j1])
    else:
        j2 = int(np.searchsorted(cumulative, prefix[j1] + 1.0 - gamma + CUMULATIVE_TOL, side="right")) - 1
        if j2 >= M - 1:
            raise ResolutionError(
                f"No admissible symmetric credible interval at gamma={gamma} with M={M}; increase M"
            )
        lower, upper = float(h_sorted[j1]), float(h_sorted[j2])
    return IntervalEstimate(lower, upper, 1.0 - gamma, "symmetric", _name(h))


def hpd_cri(draws: ImportanceDraws, h: Functional, gamma: float) -> IntervalEstimate:
    """
    Minimal-width credible interval among all admissible (j1, j2) pairs.

    For every j1 the admissible j2 is the largest index with
    sum_{j1..j2} w <= 1 - gamma and j2 < M; the narrowest such pair wins, ties
    going to the smaller j1. A single draw carrying more than 1 - gamma gives
    the zero-width interval at that draw.

    The admissible j2 is non-decreasing in j1, so the usual two-pointer scan
    over the sorted draws finds the same pairs; here all j2 come from one
    vectorised searchsorted on the cumulative weights instead.
    """
    h_sorted, w_sorted, cumulative, prefix = _sorted_cumulative(draws, h, gamma)
    M = len(h_sorted)
    j2 = np.searchsorted(cumulative, prefix + 1.0 - gamma + CUMULATIVE_TOL, side="right") - 1
    j1 = np.arange(M)
    point_mass = w_sorted > 1.0 - gamma + CUMULATIVE_TOL
    j2 = np.where(point_mass, j1, j2)
    admissible = point_mass | ((j2 >= j1) & (j2 < M - 1))
    if not admissible.any():
        raise ResolutionError(f"No admissible HPD credible interval at gamma={gamma} with M={M}; increase M")
    widths = np.where(admissible, h_sorted[np.clip(j2, 0, M - 1)] - h_sorted, np.inf)
    best = int(np.argmin(widths))
    return IntervalEstimate(
        float(h_sorted[best]), float(h_sorted[j2[best]]), 1.0 - gamma, "hpd", _name(h)
    )


def posterior_summary(
    draws: ImportanceDraws,
    gamma: float = 0.05,
    parameters: Sequence[str] | None = None,
) -> Dict[str, Any]:
    """Bayes estimates, Monte Carlo errors and both credible intervals for each parameter."""
    if parameters is None:
        parameters = ("alpha", "lambda1", "lambda2", "beta") if draws.model == "restricted" else (
            "alpha", "lambda1", "lambda2"
        )
    summary: Dict[str, Any] = {
        "model": draws.model,
        "M": draws.M,
        "proposal": draws.proposal,
        "alpha_tilde": draws.alpha_tilde,
        "ess": draws.ess,
        "flagged": draws.flagged,
        "estimates": {},
        "mc_se": {},
        "cri": {},
    }
    for name in parameters:
        summary["estimates"][name] = bayes_estimate(draws, name)
        summary["mc_se"][name] = monte_carlo_se(draws, name)
        summary["cri"][name] = {
            "symmetric": symmetric_cri(draws, name, gamma).to_dict(),
            "hpd": hpd_cri(draws, name, gamma).to_dict(),
        }
    return summary
