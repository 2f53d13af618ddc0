from abc import ABC, abstractmethod
from typing import Callable, Dict, Tuple

from censorfit.core.bayes import ImportanceDraws, Priors
from censorfit.core.censoring import CompetingRisksSample
from censorfit.core.likelihood import FitOptions, FitResult
from censorfit.core.sampling import RngStream


class CompetingRisksModel(ABC):
    """Abstract base class for a Weibull competing-risks model family with a common shape."""

    name: str = ""
    parameter_names: Tuple[str, ...] = ()

    @abstractmethod
    def fit(self, sample: CompetingRisksSample, opts: FitOptions | None = None) -> FitResult:
        """
        Maximum likelihood fit of the family.

        Args:
            sample: The observed censored competing-risks sample.
            opts: Solver options; defaults.yaml values when None.

        Returns:
            The FitResult with parameters, maximized log-likelihood and diagnostics.

        Raises:
            DegenerateSampleError: The profile likelihood has no finite maximizer.
            ConvergenceError: Both the iteration and its fallback failed.
        """
        raise NotImplementedError

    @abstractmethod
    def draw_posterior(
        self,
        sample: CompetingRisksSample,
        priors: Priors,
        M: int,
        rng: RngStream,
        proposal: str = "regression",
    ) -> ImportanceDraws:
        """Importance sample of size M from the family's posterior."""
        raise NotImplementedError

    @abstractmethod
    def true_values(self, alpha: float, lambda1: float, lambda2: float) -> Dict[str, float]:
        """Monitored parameters expressed from generating values (alpha, lambda1, lambda2)."""
        raise NotImplementedError

    def functionals(self) -> Dict[str, Callable[[FitResult], float]]:
        """Name -> map from a fit to that parameter, one entry per monitored parameter."""
        return {name: (lambda fit, name=name: float(getattr(fit.params, name))) for name in self.parameter_names}

    def estimates(self, fit: FitResult) -> Dict[str, float]:
        return {name: fn(fit) for name, fn in self.functionals().items()}

    def __str__(self) -> str:
        return f"CompetingRisksModel ({self.__class__.__name__}, parameters: {', '.join(self.parameter_names)})"
