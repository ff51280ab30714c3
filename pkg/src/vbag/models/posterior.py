"""Containers shared by all mean-field fitters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, DomainError, EmptyData
from ..numerics import RngStream, sample_mvn

__all__ = [
    "ObservationSet",
    "FitConfig",
    "GaussianBlock",
    "BernoulliBlock",
    "InvGammaBlock",
    "DirichletBlock",
    "MeanFieldPosterior",
]


@dataclass(frozen=True)
class ObservationSet:
    """``n`` i.i.d. rows of ``d`` columns, optionally with a regression response."""

    X: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DimensionMismatch(f"X must be 1-d or 2-d, got {X.ndim}-d")
        if X.shape[0] == 0:
            raise EmptyData("observation set has no rows")
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.asarray(self.y, dtype=float).ravel()
            if y.shape[0] != X.shape[0]:
                raise DimensionMismatch("response length differs from number of rows")
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "ObservationSet":
        idx = np.asarray(idx, dtype=np.int64)
        return ObservationSet(self.X[idx], None if self.y is None else self.y[idx])


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 500
    elbo_tol: float = 1e-6
    variance_floor: float = 1e-8
    rng: RngStream = field(default_factory=lambda: RngStream(0))

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if not self.elbo_tol > 0:
            raise DomainError("elbo_tol must be > 0")
        if not self.variance_floor > 0:
            raise DomainError("variance_floor must be > 0")


@dataclass(frozen=True)
class GaussianBlock:
    """Gaussian factor over a vector of coordinates.

    ``cov`` is either a vector of variances (mean-field coordinates) or a
    full matrix (a single multivariate factor, as for regression
    coefficients). When ``scale`` names an inverse-gamma block of the same
    length the factor is conditional: ``theta_j | s_j ~ N(mean_j, s_j * cov_j)``.
    """

    label: str
    mean: np.ndarray
    cov: np.ndarray
    scale: str | None = None

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = cov[None]
        if cov.ndim == 1 and cov.shape != mean.shape:
            raise DimensionMismatch(f"block {self.label}: variance length differs from mean")
        if cov.ndim == 2 and cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(f"block {self.label}: covariance shape differs from mean")
        if cov.ndim == 2 and self.scale is not None:
            raise DomainError("scaled blocks must carry diagonal variances")
        var = cov if cov.ndim == 1 else np.diag(cov)
        if np.any(~(var > 0)):
            raise DomainError(f"block {self.label}: variances must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def full(self) -> bool:
        return self.cov.ndim == 2


@dataclass(frozen=True)
class BernoulliBlock:
    label: str
    prob: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.prob, dtype=float))
        if np.any((p < 0) | (p > 1)):
            raise DomainError(f"block {self.label}: probabilities outside [0, 1]")
        object.__setattr__(self, "prob", p)


@dataclass(frozen=True)
class InvGammaBlock:
    label: str
    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.shape, dtype=float))
        b = np.atleast_1d(np.asarray(self.rate, dtype=float))
        if a.shape != b.shape:
            raise DimensionMismatch(f"block {self.label}: shape/rate lengths differ")
        if np.any(~(a > 0)) or np.any(~(b > 0)):
            raise DomainError(f"block {self.label}: shapes and rates must be > 0")
        object.__setattr__(self, "shape", a)
        object.__setattr__(self, "rate", b)

    def mean(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.shape > 1, self.rate / np.maximum(self.shape - 1, 1e-300), np.inf)


@dataclass(frozen=True)
class DirichletBlock:
    label: str
    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if np.any(~(a > 0)):
            raise DomainError(f"block {self.label}: concentrations must be > 0")
        object.__setattr__(self, "alpha", a)


@dataclass(frozen=True)
class MeanFieldPosterior:
    """Product of independent factors plus the CAVI trace that produced them."""

    gaussian_blocks: tuple[GaussianBlock, ...] = ()
    bernoulli_blocks: tuple[BernoulliBlock, ...] = ()
    invgamma_blocks: tuple[InvGammaBlock, ...] = ()
    dirichlet_blocks: tuple[DirichletBlock, ...] = ()
    elbo_trace: tuple[float, ...] = ()
    converged: bool = False
    iterations: int = 0

    def __post_init__(self):
        for name in ("gaussian_blocks", "bernoulli_blocks", "invgamma_blocks", "dirichlet_blocks"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "elbo_trace", tuple(float(v) for v in self.elbo_trace))
        labels = [b.label for b in self.invgamma_blocks]
        for g in self.gaussian_blocks:
            if g.scale is not None:
                if g.scale not in labels:
                    raise DomainError(f"block {g.label} is scaled by unknown block {g.scale}")
                if self.invgamma(g.scale).shape.size != g.dim:
                    raise DimensionMismatch(f"block {g.label} and its scale block differ in length")

    def _find(self, blocks, label):
        for b in blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def gaussian(self, label: str) -> GaussianBlock:
        return self._find(self.gaussian_blocks, label)

    def bernoulli(self, label: str) -> BernoulliBlock:
        return self._find(self.bernoulli_blocks, label)

    def invgamma(self, label: str) -> InvGammaBlock:
        return self._find(self.invgamma_blocks, label)

    def dirichlet(self, label: str) -> DirichletBlock:
        return self._find(self.dirichlet_blocks, label)

    def structure(self, labels=None) -> tuple:
        """Signature used to check that bagged components line up."""
        gs = self.select(labels)
        return tuple((g.label, g.dim) for g in gs)

    def select(self, labels=None) -> tuple[GaussianBlock, ...]:
        if labels is None:
            return self.gaussian_blocks
        return tuple(self.gaussian(lab) for lab in labels)

    def moments(self, labels=None) -> tuple[np.ndarray, np.ndarray]:
        """Exact mean and covariance of the concatenated Gaussian blocks.

        Scaled blocks use ``E[s] = rate / (shape - 1)``; the conditional
        mean does not depend on the scale, so blocks stay uncorrelated.
        """
        gs = self.select(labels)
        mean = np.concatenate([g.mean for g in gs]) if gs else np.zeros(0)
        cov = np.zeros((mean.size, mean.size))
        i = 0
        for g in gs:
            j = i + g.dim
            if g.full:
                cov[i:j, i:j] = g.cov
            else:
                var = g.cov
                if g.scale is not None:
                    var = var * self.invgamma(g.scale).mean()
                cov[i:j, i:j] = np.diag(var)
            i = j
        return mean, cov

    def sample(self, k: int, gen: np.random.Generator, labels=None) -> np.ndarray:
        """Draw ``k`` vectors of the concatenated Gaussian blocks."""
        gs = self.select(labels)
        cols = []
        scales = {}
        for g in gs:
            if g.scale is not None and g.scale not in scales:
                ig = self.invgamma(g.scale)
                scales[g.scale] = ig.rate / gen.gamma(ig.shape, size=(k, ig.shape.size))
        for g in gs:
            if g.full:
                cols.append(sample_mvn(g.mean, g.cov, k, gen))
            else:
                var = g.cov if g.scale is None else g.cov * scales[g.scale]
                cols.append(g.mean + np.sqrt(var) * gen.standard_normal((k, g.dim)))
        if not cols:
            return np.zeros((k, 0))
        return np.concatenate(cols, axis=1)
