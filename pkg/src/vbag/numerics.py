"""Seeded RNG streams, dense linear algebra and special functions.

Everything here is pure: given the same inputs (including the same
:class:`RngStream`) every function returns bit-identical output, no matter
how many threads or processes are running other work.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, NotPositiveDefinite

__all__ = [
    "RngStream",
    "as_sym_matrix",
    "cholesky",
    "sample_mvn",
    "chi2_cdf",
    "chi2_quantile",
    "digamma",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream.

    A stream is identified by ``(seed, stream_id)`` plus the ids of its
    ancestors, so replicate ``b`` of a bag always draws from
    ``parent.child(b)`` regardless of scheduling. Streams are built on
    numpy's ``SeedSequence`` spawn keys, which keeps distinct ids
    statistically independent.
    """

    seed: int
    stream_id: int = 0
    parent: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.parent):
            if not (0 <= int(v) <= _MASK64):
                raise DomainError(f"stream identifiers must be unsigned 64-bit, got {v}")

    @property
    def key(self) -> tuple[int, ...]:
        return (*self.parent, self.stream_id)

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, int(stream_id), self.key)


def as_sym_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate a square, symmetric (1e-12 relative) matrix and return it as float array."""
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be square, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise DomainError(f"{name} is not symmetric")
    return a


def cholesky(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises :class:`NotPositiveDefinite` when a pivot falls at or below
    ``dim * eps * max(diag(m))``.
    """
    a = as_sym_matrix(m)
    d = a.shape[0]
    if d == 0:
        return np.zeros((0, 0))
    tol = d * np.finfo(float).eps * max(np.max(np.diag(a)), 0.0)
    L = np.zeros_like(a)
    for j in range(d):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > tol:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at index {j} is not above tolerance {tol:.3e}")
        L[j, j] = math.sqrt(pivot)
        if j + 1 < d:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def sample_mvn(mean, cov, k: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Draw ``k`` rows from ``N(mean, cov)`` via the Cholesky factor of ``cov``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    L = cholesky(cov)
    if L.shape[0] != mean.shape[0]:
        raise DomainError("mean and cov dimensions differ")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    z = gen.standard_normal((int(k), mean.shape[0]))
    return mean + z @ L.T


def chi2_cdf(x, dof):
    x = np.asarray(x, dtype=float)
    return special.gammainc(0.5 * dof, 0.5 * np.maximum(x, 0.0))


def chi2_quantile(prob: float, dof: int) -> float:
    """Inverse chi-square CDF by safeguarded Newton iteration on the incomplete gamma."""
    if not (0.0 < prob < 1.0):
        raise DomainError(f"prob must lie in (0, 1), got {prob}")
    if dof < 1 or int(dof) != dof:
        raise DomainError(f"dof must be a positive integer, got {dof}")
    k = 0.5 * dof
    lo, hi = 0.0, max(1.0, float(dof))
    while chi2_cdf(hi, dof) < prob:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * (lo + hi)
    for _ in range(200):
        f = float(chi2_cdf(x, dof)) - prob
        if f > 0:
            hi = x
        else:
            lo = x
        # log-density keeps the Newton step finite for tiny x
        logpdf = (k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k) if x > 0 else -math.inf
        step = f / math.exp(logpdf) if logpdf > -700 else math.inf
        nxt = x - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-15 * max(1.0, x):
            x = nxt
            break
        x = nxt
    return float(x)


# Bernoulli-number coefficients B_2k / (2k) for the asymptotic digamma series.
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x):
    """Digamma function for positive arguments (scalar or array).

    Uses the recurrence ``psi(x) = psi(x + 1) - 1/x`` to shift arguments
    above 10, then the asymptotic Bernoulli series.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("digamma is only defined here for x > 0")
    y = arr.copy()
    acc = np.zeros_like(y)
    small = y < 10.0
    while np.any(small):
        acc = acc - np.where(small, 1.0 / y, 0.0)
        y = np.where(small, y + 1.0, y)
        small = y < 10.0
    inv2 = 1.0 / (y * y)
    poly = np.zeros_like(y)
    for c in reversed(_DIGAMMA_SERIES):
        poly = poly * inv2 + c
    out = acc + np.log(y) - 0.5 / y - poly * inv2
    return float(out) if np.ndim(x) == 0 else out
