"""Mean of a multivariate Gaussian with known precision.

Coordinate-wise CAVI for the weighted model
``prod_i N(x_i | mu, Lambda^-1)^{K_i}`` with independent Gaussian priors on
each coordinate of ``mu``; the exact conjugate posterior serves as oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..bootstrap import BootstrapWeights, unit_weights
from ..errors import DimensionMismatch, DomainError, NotPositiveDefinite
from ..numerics import as_sym_matrix, cholesky
from .posterior import FitConfig, GaussianBlock, MeanFieldPosterior, ObservationSet

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianMeanPrior:
    prior_mean: np.ndarray
    prior_precision_diag: np.ndarray
    likelihood_precision: np.ndarray

    def __post_init__(self):
        m0 = np.atleast_1d(np.asarray(self.prior_mean, dtype=float))
        p0 = np.atleast_1d(np.asarray(self.prior_precision_diag, dtype=float))
        lam = as_sym_matrix(self.likelihood_precision, "likelihood_precision")
        if not (m0.shape == p0.shape and lam.shape == (m0.size, m0.size)):
            raise DimensionMismatch("prior mean, prior precision and likelihood precision disagree in dimension")
        if np.any(~(p0 > 0)):
            raise DomainError("prior precision entries must be > 0")
        try:
            cholesky(lam)
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(f"likelihood_precision: {exc}") from None
        object.__setattr__(self, "prior_mean", m0)
        object.__setattr__(self, "prior_precision_diag", p0)
        object.__setattr__(self, "likelihood_precision", lam)

    @property
    def dim(self) -> int:
        return self.prior_mean.size

    @classmethod
    def vague(cls, likelihood_precision, precision: float = 1e-8) -> "GaussianMeanPrior":
        lam = np.atleast_2d(np.asarray(likelihood_precision, dtype=float))
        d = lam.shape[0]
        return cls(np.zeros(d), np.full(d, precision), lam)


def _check(data: ObservationSet, weights: BootstrapWeights, prior: GaussianMeanPrior):
    if data.d != prior.dim:
        raise DimensionMismatch(f"data has {data.d} columns, prior has dimension {prior.dim}")
    if weights.n != data.n:
        raise DimensionMismatch(f"{weights.n} weights for {data.n} observations")


def _elbo(m, v, M, S, Q, lam, logdet_lam, p0, m0):
    d = m.size
    quad = Q - 2.0 * m @ lam @ S + M * (m @ lam @ m) + M * np.sum(np.diag(lam) * v)
    loglik = 0.5 * M * (logdet_lam - d * LOG_2PI) - 0.5 * quad
    logprior = 0.5 * np.sum(np.log(p0) - LOG_2PI - p0 * ((m - m0) ** 2 + v))
    entropy = 0.5 * np.sum(np.log(2.0 * math.pi * math.e * v))
    return float(loglik + logprior + entropy)


def fit_gaussian_mean_mfvb(
    data: ObservationSet,
    weights: BootstrapWeights | None,
    prior: GaussianMeanPrior,
    cfg: FitConfig = FitConfig(),
    mean_tol: float = 1e-12,
) -> MeanFieldPosterior:
    """CAVI for ``q(mu) = prod_j N(m_j, v_j)``.

    Each sweep updates the coordinates in order; the loop stops when the
    largest change of a coordinate mean is below ``mean_tol``.
    """
    if weights is None:
        weights = unit_weights(data.n)
    _check(data, weights, prior)
    w = weights.as_float()
    X = data.X
    lam = prior.likelihood_precision
    p0, m0 = prior.prior_precision_diag, prior.prior_mean
    M = float(weights.total)
    S = w @ X
    Q = float(np.einsum("i,ij,jk,ik->", w, X, lam, X))
    logdet_lam = 2.0 * float(np.sum(np.log(np.diag(cholesky(lam)))))

    prec = M * np.diag(lam) + p0
    v = 1.0 / prec
    b = lam @ S + p0 * m0
    m = m0.copy()
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        delta = 0.0
        for j in range(m.size):
            cross = M * (lam[j] @ m - lam[j, j] * m[j])
            new = (b[j] - cross) / prec[j]
            delta = max(delta, abs(new - m[j]))
            m[j] = new
        trace.append(_elbo(m, v, M, S, Q, lam, logdet_lam, p0, m0))
        if delta < mean_tol * max(1.0, float(np.max(np.abs(m)))):
            converged = True
            break
    return MeanFieldPosterior(
        gaussian_blocks=(GaussianBlock("mu", m, v),),
        elbo_trace=trace,
        converged=converged,
        iterations=it,
    )


def exact_gaussian_mean_posterior(
    data: ObservationSet, prior: GaussianMeanPrior, weights: BootstrapWeights | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Conjugate posterior ``N(mean, cov)`` of ``mu`` (unit weights by default)."""
    if weights is None:
        weights = unit_weights(data.n)
    _check(data, weights, prior)
    w = weights.as_float()
    lam = prior.likelihood_precision
    P = weights.total * lam + np.diag(prior.prior_precision_diag)
    rhs = lam @ (w @ data.X) + prior.prior_precision_diag * prior.prior_mean
    L = cholesky(P)
    Linv = np.linalg.solve(L, np.eye(P.shape[0]))
    cov = Linv.T @ Linv
    cov = 0.5 * (cov + cov.T)
    return cov @ rhs, cov
