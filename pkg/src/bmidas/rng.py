"""Seeded random streams and the scalar samplers used by the Gibbs kernels.

All draws come from a :class:`numpy.random.Generator` (PCG64).  NumPy's gamma
sampler is Marsaglia-Tsang (with the ``U**(1/a)`` boost below shape 1) and its
``wald`` sampler is the Michael-Schucany-Haas transform, so the wrappers here
only add parameter checks and the parameterizations used by the model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngHandle:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed: int | RngHandle | np.random.Generator | None = None,
             stream_id: int = 0) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, RngHandle):
        return seed.generator()
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
    return RngHandle(int(seed), stream_id).generator()


def _positive(**kw):
    for name, v in kw.items():
        v = np.asarray(v)
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError(f"{name} must be positive and finite, got {v}")


def sample_gamma(shape, rate, rng: np.random.Generator, size=None):
    """Gamma draw with density proportional to x**(shape-1) exp(-rate x)."""
    _positive(shape=shape, rate=rate)
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def sample_inv_gamma(shape, rate, rng: np.random.Generator, size=None):
    """Inverse-gamma draw; mean rate/(shape-1) when shape > 1."""
    return 1.0 / sample_gamma(shape, rate, rng, size=size)


def sample_inv_gaussian(mean, shape, rng: np.random.Generator, size=None):
    """Inverse-Gaussian draw with E = mean and Var = mean**3 / shape."""
    _positive(mean=mean, shape=shape)
    return rng.wald(mean, shape, size=size)


def sample_beta(a, b, rng: np.random.Generator, size=None):
    _positive(a=a, b=b)
    return rng.beta(a, b, size=size)


def sample_mvn(mean, factor, rng: np.random.Generator, size=None):
    """mean + factor @ z with z standard normal; covariance is factor @ factor.T."""
    mean = np.asarray(mean, dtype=float)
    factor = np.asarray(factor, dtype=float)
    if not np.all(np.isfinite(factor)):
        raise ValueError("covariance factor has non-finite entries")
    if size is None:
        return mean + factor @ rng.standard_normal(mean.shape[0])
    z = rng.standard_normal((size, mean.shape[0]))
    return mean + z @ factor.T


def inv_gaussian_pdf(x, mean, shape):
    x = np.asarray(x, dtype=float)
    return np.sqrt(shape / (2 * np.pi * x**3)) * np.exp(-shape * (x - mean) ** 2 / (2 * mean**2 * x))
