import logging
from typing import Dict, List, Type

from censorfit.errors import UsageError

from .base import CompetingRisksModel
from .restricted import RestrictedModel
from .unrestricted import UnrestrictedModel

logger = logging.getLogger(__name__)

# Map model family names (CLI flags, study configs) to their classes
MODEL_MAP: Dict[str, Type[CompetingRisksModel]] = {
    "restricted": RestrictedModel,
    "unrestricted": UnrestrictedModel,
}


def get_model(name: str) -> CompetingRisksModel:
    """
    Factory function returning an instance of a model family by name.

    Raises:
        UsageError: The name is not registered in MODEL_MAP.
    """
    model_class = MODEL_MAP.get(name)
    if model_class is None:
        logger.error(f"Model family '{name}' not found.")
        raise UsageError(f"Unknown model family '{name}'. Supported models: {list_available_models()}")
    logger.debug(f"Resolved model family '{name}' to {model_class.__name__}")
    return model_class()


def list_available_models() -> List[str]:
    """Returns the registered model family names."""
    return list(MODEL_MAP.keys())


__all__ = ["CompetingRisksModel", "RestrictedModel", "UnrestrictedModel", "MODEL_MAP", "get_model", "list_available_models"]
