from typing import Dict

from censorfit.core.bayes import ImportanceDraws, Priors, draw_importance_unrestricted
from censorfit.core.censoring import CompetingRisksSample
from censorfit.core.likelihood import FitOptions, FitResult, fit_unrestricted
from censorfit.core.sampling import RngStream
from censorfit.errors import UsageError

from .base import CompetingRisksModel


class UnrestrictedModel(CompetingRisksModel):
    """Independent scales lambda1, lambda2 > 0 with a common shape."""

    name = "unrestricted"
    parameter_names = ("alpha", "lambda1", "lambda2")

    def fit(self, sample: CompetingRisksSample, opts: FitOptions | None = None) -> FitResult:
        return fit_unrestricted(sample, opts)

    def draw_posterior(
        self,
        sample: CompetingRisksSample,
        priors: Priors,
        M: int,
        rng: RngStream,
        proposal: str = "regression",
    ) -> ImportanceDraws:
        if proposal != "regression":
            raise UsageError(f"The unrestricted model only supports the regression proposal, got '{proposal}'")
        return draw_importance_unrestricted(sample, priors, M, rng)

    def true_values(self, alpha: float, lambda1: float, lambda2: float) -> Dict[str, float]:
        return {"alpha": alpha, "lambda1": lambda1, "lambda2": lambda2}
