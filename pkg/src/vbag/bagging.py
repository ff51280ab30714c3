"""Bagged variational posteriors and the inference built on them.

A bag is the uniform mixture of ``B`` mean-field fits, each on a
multinomial bootstrap replicate of size ``M``. This module fits bags,
computes their exact mixture moments, applies the diagonal covariance
correction, estimates sandwich covariances and runs credible-set
coverage studies.
"""
from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import stats

from .bootstrap import BootstrapWeights, resample
from .errors import (
    AllReplicatesFailed,
    ClippingWarning,
    DimensionMismatch,
    DomainError,
    InvalidSize,
    NotPositiveDefinite,
    SingularHessian,
    StructureMismatch,
)
from .models.gaussian import GaussianMeanPrior, exact_gaussian_mean_posterior, fit_gaussian_mean_mfvb
from .models.posterior import FitConfig, MeanFieldPosterior, ObservationSet
from .numerics import RngStream, as_sym_matrix, chi2_quantile, cholesky, sample_mvn
from .parallel import pmap

__all__ = [
    "BaggedPosterior",
    "CovarianceReport",
    "CredibleEllipsoid",
    "SandwichInputs",
    "CoverageResult",
    "GaussianCoverageScenario",
    "bag",
    "bagged_moments",
    "correct_covariance",
    "recombine_offdiagonal",
    "covariance_report",
    "sandwich_covariance",
    "credible_ellipsoid",
    "coverage_experiment",
    "sample_bagged",
]

FitFn = Callable[[ObservationSet, BootstrapWeights], MeanFieldPosterior]


@dataclass(frozen=True)
class BaggedPosterior:
    components: tuple[MeanFieldPosterior, ...]
    bootstrap_size: int
    base_n: int
    replicate_seeds: tuple[int, ...]
    discarded: int = 0
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "replicate_seeds", tuple(int(s) for s in self.replicate_seeds))
        if not self.components:
            raise AllReplicatesFailed("a bagged posterior needs at least one component")
        if self.bootstrap_size < 1 or self.base_n < 1:
            raise InvalidSize("bootstrap size and base n must be >= 1")
        first = self.components[0].structure(self.labels)
        for comp in self.components[1:]:
            if comp.structure(self.labels) != first:
                raise StructureMismatch("bagged components have different block structure")

    @property
    def B(self) -> int:
        return len(self.components)

    @property
    def c_ratio(self) -> float:
        return self.bootstrap_size / self.base_n


def _fit_replicate(b: int, fit: FitFn, data: ObservationSet, M: int, rng: RngStream):
    stream = rng.child(b)
    weights = resample(data.n, M, stream)
    return fit(data, weights)


def bag(
    fit: FitFn,
    data: ObservationSet,
    B: int,
    M: int,
    rng: RngStream,
    workers: int = 1,
    weights: Sequence[BootstrapWeights] | None = None,
    labels: Sequence[str] | None = None,
) -> BaggedPosterior:
    """Fit ``B`` bootstrap replicates and collect them into a bag.

    Replicate ``b`` draws its weights from ``rng.child(b)``, so the result is
    independent of ``workers``. Fits that report ``converged=False`` are
    dropped and counted in ``discarded``. Passing ``weights`` bypasses the
    resampling (one fit per given weight vector).
    """
    if B < 1 or M < 1:
        raise InvalidSize(f"need B >= 1 and M >= 1, got B={B}, M={M}")
    if weights is not None:
        weights = list(weights)
        fits = pmap(functools.partial(fit, data), weights, workers)
        seeds = list(range(len(weights)))
        M = int(weights[0].total)
    else:
        seeds = list(range(B))
        job = functools.partial(_fit_replicate, fit=fit, data=data, M=M, rng=rng)
        fits = pmap(job, seeds, workers)
    kept = [(s, f) for s, f in zip(seeds, fits) if f.converged]
    if not kept:
        raise AllReplicatesFailed(f"all {len(fits)} replicate fits failed to converge")
    return BaggedPosterior(
        components=tuple(f for _, f in kept),
        bootstrap_size=int(M),
        base_n=data.n,
        replicate_seeds=tuple(s for s, _ in kept),
        discarded=len(fits) - len(kept),
        labels=None if labels is None else tuple(labels),
    )


def bagged_moments(bp: BaggedPosterior, labels: Sequence[str] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean and covariance of the uniform mixture (law of total variance)."""
    labels = bp.labels if labels is None else tuple(labels)
    first = bp.components[0].structure(labels)
    means, covs = [], []
    for comp in bp.components:
        if comp.structure(labels) != first:
            raise StructureMismatch("bagged components have different block structure")
        m, c = comp.moments(labels)
        means.append(m)
        covs.append(c)
    means = np.asarray(means)
    mean = means.mean(axis=0)
    centered = means - mean
    cov = np.mean(covs, axis=0) + centered.T @ centered / len(means)
    return mean, 0.5 * (cov + cov.T)


def correct_covariance(raw, mode: str = "well-specified") -> np.ndarray:
    """Halve the diagonal (``well-specified``) or keep only the off-diagonal part."""
    raw = as_sym_matrix(raw, "raw covariance")
    out = raw.copy()
    idx = np.diag_indices_from(out)
    if mode == "well-specified":
        out[idx] = raw[idx] * 0.5
    elif mode == "off-diagonal-only":
        out[idx] = 0.0
    else:
        raise DomainError(f"unknown correction mode {mode!r}")
    return out


def recombine_offdiagonal(offdiag, marginal_var, clip: float = 1e-10) -> tuple[np.ndarray, bool]:
    """Merge an off-diagonal pattern with separately chosen marginal variances.

    The merged matrix is projected onto the PD cone by clipping eigenvalues
    at ``clip``; the flag reports whether clipping was needed.
    """
    out = correct_covariance(offdiag, "off-diagonal-only")
    var = np.asarray(marginal_var, dtype=float)
    if var.shape != (out.shape[0],):
        raise DimensionMismatch("marginal variances do not match the covariance dimension")
    out[np.diag_indices_from(out)] = var
    evals, evecs = np.linalg.eigh(out)
    if np.min(evals) >= clip:
        return out, False
    warnings.warn("recombined covariance was not PD; eigenvalues clipped", ClippingWarning)
    fixed = (evecs * np.maximum(evals, clip)) @ evecs.T
    return 0.5 * (fixed + fixed.T), True


@dataclass(frozen=True)
class SandwichInputs:
    score_rows: np.ndarray
    hessian_mean: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.score_rows, dtype=float))
        if s.shape[0] == 1 and np.ndim(self.score_rows) == 1:
            s = s.T
        h = as_sym_matrix(self.hessian_mean, "hessian_mean")
        if s.shape[1] != h.shape[0]:
            raise DimensionMismatch("score dimension differs from hessian dimension")
        object.__setattr__(self, "score_rows", s)
        object.__setattr__(self, "hessian_mean", h)


def sandwich_covariance(si: SandwichInputs) -> np.ndarray:
    """``V^-1 D V^-1`` with ``D`` the mean outer product of the score rows."""
    V = si.hessian_mean
    s = si.score_rows
    D = s.T @ s / s.shape[0]
    try:
        if np.linalg.cond(V) > 1.0 / np.finfo(float).eps:
            raise np.linalg.LinAlgError
        Vinv_D = np.linalg.solve(V, D)
        out = np.linalg.solve(V, Vinv_D.T).T
    except np.linalg.LinAlgError:
        raise SingularHessian("hessian estimate is singular") from None
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class CovarianceReport:
    bagged_mean: np.ndarray
    bagged_cov: np.ndarray
    corrected_cov: np.ndarray
    sandwich_cov: np.ndarray | None = None
    exact_reference: np.ndarray | None = None


def covariance_report(bp: BaggedPosterior, sandwich=None, exact=None, labels=None) -> CovarianceReport:
    mean, cov = bagged_moments(bp, labels)
    return CovarianceReport(mean, cov, correct_covariance(cov), sandwich, exact)


@dataclass(frozen=True)
class CredibleEllipsoid:
    """``{theta : n (theta - center)' shape^-1 (theta - center) <= radius_sq}``."""

    center: np.ndarray
    shape: np.ndarray
    radius_sq: float
    level: float
    n: int = 1
    _chol: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        shape = as_sym_matrix(self.shape, "ellipsoid shape")
        if shape.shape[0] != center.size:
            raise DimensionMismatch("ellipsoid center and shape differ in dimension")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "_chol", cholesky(shape))

    def distance_sq(self, theta) -> np.ndarray:
        t = np.atleast_2d(np.asarray(theta, dtype=float)) - self.center
        z = np.linalg.solve(self._chol, t.T)
        return self.n * np.sum(z * z, axis=0)

    def contains(self, theta):
        inside = self.distance_sq(theta) <= self.radius_sq
        return bool(inside[0]) if np.ndim(theta) == 1 else inside


def credible_ellipsoid(center, sigma, level: float, n: int = 1) -> CredibleEllipsoid:
    """Ellipsoid with the limiting chi-square radius for ``level``.

    ``sigma`` is on the root-n scale, so a posterior covariance ``C`` enters
    as ``sigma = n * C``.
    """
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    return CredibleEllipsoid(center, sigma, chi2_quantile(level, center.size), level, int(n))


def sample_bagged(bp: BaggedPosterior, k: int, rng: RngStream | np.random.Generator, labels=None) -> np.ndarray:
    """Draw from the uniform mixture: pick a component, then sample its blocks."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    labels = bp.labels if labels is None else tuple(labels)
    dim = sum(d for _, d in bp.components[0].structure(labels))
    out = np.empty((int(k), dim))
    if k == 0:
        return out
    picks = gen.integers(bp.B, size=int(k))
    for b in range(bp.B):
        rows = np.flatnonzero(picks == b)
        if rows.size:
            out[rows] = bp.components[b].sample(rows.size, gen, labels)
    return out


class CoverageScenario(Protocol):
    theta0: np.ndarray

    def ellipsoid(self, rng: RngStream, level: float) -> CredibleEllipsoid: ...


@dataclass(frozen=True)
class CoverageResult:
    hits: int
    reps: int
    failed: int
    level: float
    ci: tuple[float, float]

    @property
    def coverage(self) -> float:
        return self.hits / self.reps if self.reps else float("nan")

    @property
    def se(self) -> float:
        p = self.coverage
        return float(np.sqrt(p * (1 - p) / self.reps)) if self.reps else float("nan")


def _coverage_rep(r: int, scenario: CoverageScenario, level: float, rng: RngStream):
    try:
        ell = scenario.ellipsoid(rng.child(r), level)
    except AllReplicatesFailed:
        return None
    return bool(ell.contains(np.asarray(scenario.theta0, dtype=float)))


def coverage_experiment(
    scenario: CoverageScenario, reps: int, level: float, rng: RngStream, workers: int = 1
) -> CoverageResult:
    """Fraction of replications whose ellipsoid holds the true parameter, with an exact binomial CI."""
    if reps < 1:
        raise InvalidSize("reps must be >= 1")
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    job = functools.partial(_coverage_rep, scenario=scenario, level=level, rng=rng)
    outcomes = pmap(job, range(reps), workers)
    done = [o for o in outcomes if o is not None]
    hits = int(sum(done))
    if done:
        ci = stats.binomtest(hits, len(done)).proportion_ci(0.95, method="exact")
        ci = (float(ci.low), float(ci.high))
    else:
        ci = (float("nan"), float("nan"))
    return CoverageResult(hits, len(done), reps - len(done), level, ci)


@dataclass(frozen=True)
class GaussianCoverageScenario:
    """Well-specified multivariate Gaussian with known covariance.

    Each replication draws ``n`` rows from ``N(theta0, cov)``, bags the
    mean-field fit with ``B`` replicates of size ``M`` (default ``n``) and
    centers the ellipsoid at the exact posterior mean. ``shape`` selects the
    bagged covariance as is (``"bagged"``) or after halving its diagonal
    (``"corrected"``).
    """

    theta0: np.ndarray
    cov: np.ndarray
    n: int
    B: int
    M: int | None = None
    prior_precision: float = 1e-6
    shape: str = "bagged"
    cfg: FitConfig = field(default_factory=FitConfig)

    def prior(self) -> GaussianMeanPrior:
        lam = np.linalg.inv(np.asarray(self.cov, dtype=float))
        lam = 0.5 * (lam + lam.T)
        return GaussianMeanPrior.vague(lam, self.prior_precision)

    def ellipsoid(self, rng: RngStream, level: float) -> CredibleEllipsoid:
        theta0 = np.asarray(self.theta0, dtype=float)
        data = ObservationSet(sample_mvn(theta0, self.cov, self.n, rng.child(0)))
        prior = self.prior()
        fit = functools.partial(fit_gaussian_mean_mfvb, prior=prior, cfg=self.cfg)
        bp = bag(fit, data, self.B, self.M or self.n, rng.child(1))
        _, cov = bagged_moments(bp)
        if self.shape == "corrected":
            cov = correct_covariance(cov)
        elif self.shape != "bagged":
            raise DomainError(f"unknown ellipsoid shape {self.shape!r}")
        center, _ = exact_gaussian_mean_posterior(data, prior)
        try:
            return credible_ellipsoid(center, self.n * cov, level, self.n)
        except NotPositiveDefinite:
            raise AllReplicatesFailed("bagged covariance is not PD") from None
