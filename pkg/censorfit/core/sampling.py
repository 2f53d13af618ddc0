"""
Seedable, splittable random-number streams and the elementary samplers.

Every stream is a PCG64 generator seeded from SeedSequence([master_seed, stream_id]),
so a (master_seed, stream_id) pair always reproduces the same draws and distinct
stream ids give independent streams.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

from censorfit.errors import ParameterDomainError

logger = logging.getLogger(__name__)

_UINT64_MAX = 2**64 - 1

# Stream id layout: replication * 2**20 + slot
SLOTS_PER_REPLICATION = 2**20
DATA_SLOT = 0
POSTERIOR_SLOT = 1
BOOTSTRAP_OFFSET = 2


@dataclass
class RngStream:
    """A single-owner random stream. Not safe to share between workers."""
    master_seed: int
    stream_id: int
    generator: Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name, value in (("master_seed", self.master_seed), ("stream_id", self.stream_id)):
            if not 0 <= int(value) <= _UINT64_MAX:
                raise ParameterDomainError(f"{name} must be an unsigned 64-bit integer, got {value}")
        self.master_seed = int(self.master_seed)
        self.stream_id = int(self.stream_id)
        self.generator = Generator(PCG64(SeedSequence([self.master_seed, self.stream_id])))


def seed_stream(master_seed: int, stream_id: int) -> RngStream:
    """Creates the deterministic stream for (master_seed, stream_id)."""
    return RngStream(master_seed, stream_id)


def stream_id(replication: int, slot: int = DATA_SLOT) -> int:
    """Stream id for a slot of a Monte Carlo replication."""
    if replication < 0 or not 0 <= slot < SLOTS_PER_REPLICATION:
        raise ParameterDomainError(f"Invalid stream coordinates: replication={replication}, slot={slot}")
    return replication * SLOTS_PER_REPLICATION + slot


def sample_uniform(rng: RngStream, size: int | None = None) -> float | np.ndarray:
    """
    Uniform draws on the open interval (0, 1).

    Generator.random() returns values in [0, 1); exact zeros are redrawn so
    that -log(u) is always finite.
    """
    if size is None:
        u = rng.generator.random()
        while u <= 0.0:
            u = rng.generator.random()
        return float(u)

    u = rng.generator.random(size)
    bad = u <= 0.0
    while bad.any():
        u[bad] = rng.generator.random(int(bad.sum()))
        bad = u <= 0.0
    return u


def _check_positive(**params):
    for name, value in params.items():
        arr = np.asarray(value, dtype=float)
        if arr.size == 0 or not np.all(np.isfinite(arr)) or not np.all(arr > 0):
            raise ParameterDomainError(f"{name} must be positive and finite, got {value}")


def weibull_from_uniform(u, alpha: float, lam: float):
    """Inverse CDF of We(alpha, lam): x = (-ln u / lam)^(1/alpha)."""
    _check_positive(alpha=alpha, lam=lam)
    return (-np.log(u) / lam) ** (1.0 / alpha)


def sample_weibull(rng: RngStream, alpha: float, lam: float, size: int | None = None):
    """Draws from We(alpha, lam) with CDF 1 - exp(-lam * x**alpha)."""
    _check_positive(alpha=alpha, lam=lam)
    x = weibull_from_uniform(sample_uniform(rng, size), alpha, lam)
    return float(x) if size is None else x


def sample_gamma(rng: RngStream, shape, rate, size: int | None = None):
    """
    Gamma draws with density proportional to x^(shape-1) exp(-rate x).

    `rate` may be an array (one rate per draw); numpy's Marsaglia-Tsang
    generator does the work.
    """
    _check_positive(shape=shape, rate=rate)
    scale = 1.0 / np.asarray(rate, dtype=float)
    draws = rng.generator.gamma(shape, scale, size=size)
    if size is None and np.ndim(draws) == 0:
        return float(draws)
    return draws


def sample_subset(rng: RngStream, population: np.ndarray, k: int) -> np.ndarray:
    """k elements of `population` chosen uniformly without replacement."""
    if k < 0 or k > len(population):
        raise ParameterDomainError(f"Cannot draw {k} items from a population of {len(population)}")
    if k == 0:
        return np.empty(0, dtype=np.asarray(population).dtype)
    return rng.generator.choice(population, size=k, replace=False)
