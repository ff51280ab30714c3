"""Multinomial bootstrap weights and bootstrap-size selection rules."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, InvalidSize, NegativeDiscriminant
from .numerics import RngStream

__all__ = [
    "BootstrapWeights",
    "SizeSelectionInputs",
    "FiniteSampleSize",
    "resample",
    "unit_weights",
    "asymptotic_optimal_size",
    "finite_sample_optimal_size",
    "finite_sample_size_details",
]


@dataclass(frozen=True)
class BootstrapWeights:
    """Multiplicities ``K_1..K_n`` of a bootstrap replicate of size ``total``."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size == 0:
            raise InvalidSize("counts must be a nonempty 1-d vector")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise InvalidSize("counts must be nonnegative integers")
        counts = counts.astype(np.int64)
        if int(counts.sum()) != int(self.total) or self.total < 1:
            raise InvalidSize(f"counts sum to {int(counts.sum())}, expected total {self.total}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "total", int(self.total))

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    def as_float(self) -> np.ndarray:
        return self.counts.astype(float)

    def materialize(self) -> np.ndarray:
        """Row indices of the equivalent resampled dataset."""
        return np.repeat(np.arange(self.n), self.counts)


def unit_weights(n: int) -> BootstrapWeights:
    if n < 1:
        raise InvalidSize("n must be at least 1")
    return BootstrapWeights(np.ones(n, dtype=np.int64), n)


def resample(n: int, M: int, rng: RngStream | np.random.Generator) -> BootstrapWeights:
    """Draw ``(K_1..K_n) ~ Multinomial(M, 1/n)``."""
    if n < 1 or M < 1:
        raise InvalidSize(f"need n >= 1 and M >= 1, got n={n}, M={M}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    counts = gen.multinomial(int(M), np.full(int(n), 1.0 / n))
    return BootstrapWeights(counts, int(M))


@dataclass(frozen=True)
class SizeSelectionInputs:
    """Scalar-functional variances feeding the size rules.

    Attributes:
        v_n: plain VB posterior variance of the functional.
        v_n_star: bagged VB variance computed with ``M = n``.
        v0: prior variance of the functional (finite-sample rule only).
        n: original sample size.
    """

    v_n: float
    v_n_star: float
    n: int
    v0: float = math.inf

    def __post_init__(self):
        if not (self.v_n > 0 and self.v_n_star > 0 and self.v0 > 0):
            raise DegenerateVariance("variances must be strictly positive")
        if self.n < 1:
            raise InvalidSize("n must be at least 1")


def _round_size(x: float) -> int:
    return max(1, int(math.floor(x + 0.5)))


def asymptotic_optimal_size(inputs: SizeSelectionInputs) -> int:
    """``M* = v* / (v* - v) * n``, rounded and floored at 1."""
    gap = inputs.v_n_star - inputs.v_n
    if not gap > 0:
        raise DegenerateVariance(
            f"bagged variance {inputs.v_n_star!r} does not exceed VB variance {inputs.v_n!r}"
        )
    return _round_size(inputs.v_n_star / gap * inputs.n)


@dataclass(frozen=True)
class FiniteSampleSize:
    size: int
    raw: float
    sigma_sq: float
    s_sq: float
    discriminant: float


def finite_sample_size_details(inputs: SizeSelectionInputs) -> FiniteSampleSize:
    """Finite-sample optimal bootstrap size together with its intermediate quantities."""
    v, vs, v0, n = inputs.v_n, inputs.v_n_star, inputs.v0, inputs.n
    if not vs - v > 0:
        raise DegenerateVariance(f"bagged variance {vs!r} does not exceed VB variance {v!r}")
    if not v0 - v > 0:
        raise DegenerateVariance(f"prior variance {v0!r} does not exceed VB variance {v!r}")
    if math.isinf(v0):
        # limit v0 -> inf of both intermediates
        sigma_sq = n * v
        s_sq = (vs - v) * n
        lead = n / 2 + n * sigma_sq / (2 * s_sq)
        disc = lead * lead
        raw = 2 * lead
    else:
        sigma_sq = n * v0 * v / (v0 - v)
        s_sq = v0**2 / (v0 - v) ** 2 * (vs - v) * n
        lead = n / 2 + n * sigma_sq / (2 * s_sq)
        disc = lead * lead - n * sigma_sq / v0
        if disc < 0:
            raise NegativeDiscriminant(
                f"negative discriminant {disc!r}; fall back to the asymptotic size",
                inputs=inputs,
            )
        raw = lead - sigma_sq / v0 + math.sqrt(disc)
    return FiniteSampleSize(_round_size(raw), raw, sigma_sq, s_sq, disc)


def finite_sample_optimal_size(inputs: SizeSelectionInputs) -> int:
    return finite_sample_size_details(inputs).size
