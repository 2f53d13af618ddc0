import copy
import logging
import os
from typing import Any, Dict

import yaml
from dotenv import load_dotenv

# Load environment variables from a .env file if it exists
load_dotenv()

logger = logging.getLogger(__name__)


def _env_int(name: str) -> int | None:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer value for {name}: {raw!r}")
        return None


class Settings:
    """Loads settings from environment variables."""
    SEED: int = _env_int("CENSORFIT_SEED") or 20240607
    WORKERS: int | None = _env_int("CENSORFIT_WORKERS")
    LOG_LEVEL: str = os.getenv("CENSORFIT_LOG_LEVEL", "INFO").upper()
    DEFAULTS_PATH: str | None = os.getenv("CENSORFIT_DEFAULTS")


# Create a single instance for easy access
settings = Settings()

_DEFAULTS_FILE = os.path.join(os.path.dirname(__file__), "defaults.yaml")

# Used when the YAML file is missing or malformed.
BUILTIN_DEFAULTS: Dict[str, Any] = {
    "solver": {
        "eps": 1e-8,
        "max_iter": 500,
        "method": "fixed-point",
        "bracket": [1e-4, 1e4],
        "fallback_tol": 1e-10,
    },
    "priors": {
        "a1": 0.1, "b1": 0.1, "a2": 0.1, "b2": 0.1, "a3": 1.0, "b3": 1.0,
        "a4": 0.1, "b4": 0.1, "a5": 0.1, "b5": 0.1, "a6": 0.1, "b6": 0.1,
    },
    "bootstrap": {"B": 1000, "warn_failure_fraction": 0.10, "max_failure_fraction": 0.50},
    "bayes": {"M": 2000, "min_ess": 10, "proposal": "regression"},
    "study": {"replications": 500, "B": 500, "M": 2000, "level": 0.95, "failure_flag_fraction": 0.05},
    "table": {"precision": {"bias": 2, "mse": 3, "cp": 3, "al": 2}},
}

_cached_defaults: Dict[str, Any] | None = None


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_defaults(path: str | None = None, reload: bool = False) -> Dict[str, Any]:
    """
    Loads numeric defaults from the YAML defaults file.

    The file named by CENSORFIT_DEFAULTS wins over the packaged defaults.yaml.
    Sections missing from the file keep their built-in values.

    Args:
        path: Explicit YAML path; bypasses the cache when given.
        reload: Re-read the file even if a cached copy exists.

    Returns:
        A nested dictionary with the sections solver, priors, bootstrap,
        bayes, study and table.
    """
    global _cached_defaults
    if path is None and _cached_defaults is not None and not reload:
        return _cached_defaults

    config_path = path or settings.DEFAULTS_PATH or _DEFAULTS_FILE
    loaded: Dict[str, Any] = {}
    try:
        logger.debug(f"Loading defaults from: {config_path}")
        if not os.path.exists(config_path):
            logger.error(f"Defaults file not found: {config_path}. Using built-in values.")
        else:
            with open(config_path, "r", encoding="utf-8") as f:
                loaded = yaml.safe_load(f) or {}
            if not isinstance(loaded, dict):
                logger.error(f"Invalid format in {config_path}. Expected a mapping of sections.")
                loaded = {}
    except yaml.YAMLError as e:
        logger.error(f"Error parsing YAML file {config_path}: {e}", exc_info=True)
        loaded = {}

    defaults = _merge(BUILTIN_DEFAULTS, loaded)
    if path is None:
        _cached_defaults = defaults
    return defaults
