from typing import Dict

from censorfit.core.bayes import ImportanceDraws, Priors, draw_importance_restricted
from censorfit.core.censoring import CompetingRisksSample
from censorfit.core.likelihood import FitOptions, FitResult, fit_restricted
from censorfit.core.sampling import RngStream
from censorfit.errors import ParameterDomainError

from .base import CompetingRisksModel


class RestrictedModel(CompetingRisksModel):
    """lambda1 >= lambda2 encoded as lambda2 = beta * lambda1 with 0 < beta <= 1."""

    name = "restricted"
    parameter_names = ("alpha", "lambda1", "lambda2", "beta")

    def fit(self, sample: CompetingRisksSample, opts: FitOptions | None = None) -> FitResult:
        return fit_restricted(sample, opts)

    def draw_posterior(
        self,
        sample: CompetingRisksSample,
        priors: Priors,
        M: int,
        rng: RngStream,
        proposal: str = "regression",
    ) -> ImportanceDraws:
        return draw_importance_restricted(sample, priors, M, rng, proposal=proposal)

    def true_values(self, alpha: float, lambda1: float, lambda2: float) -> Dict[str, float]:
        if not 0 < lambda2 <= lambda1:
            raise ParameterDomainError(
                f"The restricted model needs 0 < lambda2 <= lambda1; got lambda1={lambda1}, lambda2={lambda2}"
            )
        return {"alpha": alpha, "lambda1": lambda1, "lambda2": lambda2, "beta": lambda2 / lambda1}
