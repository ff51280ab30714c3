"""Spike-and-slab linear regression fitted by mean-field VB.

Model::

    y | X, Gamma, beta, s ~ N(X Gamma beta, s I)
    beta ~ N(0, sigma_beta^2 I),  s ~ IG(A, B),  gamma_j ~ Bernoulli(p)

with ``q(beta) q(s) prod_j q(gamma_j)``: a full-covariance Gaussian for
``beta``, an inverse gamma for the noise variance and independent Bernoulli
inclusion indicators. The update cycle is the standard one for this model
(Gaussian block, then noise variance, then each indicator in turn). Weighted
data enter only through ``X' K X``, ``X' K y`` and ``y' K y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln, logit

from ..bootstrap import BootstrapWeights, unit_weights
from ..errors import DimensionMismatch, DomainError, NotPositiveDefinite, SingularDesign
from ..numerics import cholesky, digamma
from .posterior import BernoulliBlock, FitConfig, GaussianBlock, InvGammaBlock, MeanFieldPosterior

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SpikeSlabPrior:
    sigma_beta_sq: float = 10.0
    ig_A: float = 0.1
    ig_B: float = 0.1
    p_incl: float = 0.5

    def __post_init__(self):
        if not (self.sigma_beta_sq > 0 and self.ig_A > 0 and self.ig_B > 0):
            raise DomainError("spike-and-slab hyperparameters must be > 0")
        if not (0.0 < self.p_incl < 1.0):
            raise DomainError("p_incl must lie in (0, 1)")


def weighted_gram(X, y, weights: BootstrapWeights):
    w = weights.as_float()
    Xw = X * w[:, None]
    return Xw.T @ X, Xw.T @ y, float(w @ (y * y)), float(weights.total)


def _check_design(G: np.ndarray):
    q = G.shape[0]
    jitter = 1e-8 * float(np.trace(G)) / q
    # a pivot at or below the jitter level means rank deficiency at the data's scale
    if not jitter > 0:
        raise SingularDesign("weighted Gram matrix has zero trace")
    d = np.sqrt(np.diag(G))
    if np.any(d == 0):
        raise SingularDesign("design has an all-zero (weighted) column")
    try:
        L = cholesky(G + jitter * np.eye(q))
    except NotPositiveDefinite:
        raise SingularDesign("weighted Gram matrix is not invertible") from None
    if np.min(np.diag(L)) ** 2 <= 2.0 * jitter:
        raise SingularDesign("weighted Gram matrix is numerically rank deficient")


def _psd_inverse(P):
    L = cholesky(P)
    Linv = np.linalg.solve(L, np.eye(P.shape[0]))
    S = Linv.T @ Linv
    return 0.5 * (S + S.T), 2.0 * float(np.sum(np.log(np.diag(L))))


def _expected_rss(G, c, yy, w, mu, Sigma):
    Omega = np.outer(w, w) + np.diag(w * (1.0 - w))
    return yy - 2.0 * float(c @ (w * mu)) + float(np.sum((G * Omega) * (np.outer(mu, mu) + Sigma)))


def _elbo(G, c, yy, M, w, mu, Sigma, logdet_Sigma, A_q, s, prior: SpikeSlabPrior) -> float:
    q = mu.size
    tau = A_q / s
    e_log_var = math.log(s) - float(digamma(A_q))
    rss = _expected_rss(G, c, yy, w, mu, Sigma)
    loglik = -0.5 * M * (LOG_2PI + e_log_var) - 0.5 * tau * rss
    sb2 = prior.sigma_beta_sq
    logprior_beta = -0.5 * q * math.log(2.0 * math.pi * sb2) - 0.5 * (mu @ mu + np.trace(Sigma)) / sb2
    ent_beta = 0.5 * (q * (1.0 + LOG_2PI) + logdet_Sigma)
    A, B = prior.ig_A, prior.ig_B
    kl_var = (A_q - A) * digamma(A_q) - gammaln(A_q) + gammaln(A) + A * (math.log(s) - math.log(B)) + A_q * (B - s) / s
    with np.errstate(divide="ignore", invalid="ignore"):
        ent_g = -np.where(w > 0, w * np.log(w), 0.0) - np.where(w < 1, (1 - w) * np.log1p(-w), 0.0)
    p = prior.p_incl
    logprior_g = float(np.sum(w * math.log(p) + (1 - w) * math.log1p(-p)))
    return float(loglik + logprior_beta + ent_beta - kl_var + logprior_g + np.sum(ent_g))


def fit_spike_slab_vb(
    X,
    y,
    weights: BootstrapWeights | None,
    prior: SpikeSlabPrior,
    cfg: FitConfig = FitConfig(),
    force_include: bool = False,
) -> MeanFieldPosterior:
    """Mean-field VB for spike-and-slab regression on weighted data.

    With ``force_include`` every indicator is pinned at 1, which reduces the
    Gaussian block to ridge regression with penalty ``E[1/s]^-1 / sigma_beta^2``.

    Returns a posterior with Gaussian block ``beta`` (full covariance),
    Bernoulli block ``gamma`` and inverse-gamma block ``sigma2``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch("X must be n x q and y length n")
    if weights is None:
        weights = unit_weights(X.shape[0])
    if weights.n != X.shape[0]:
        raise DimensionMismatch(f"{weights.n} weights for {X.shape[0]} observations")
    G, c, yy, M = weighted_gram(X, y, weights)
    _check_design(G)
    q = G.shape[0]
    sb_prec = 1.0 / prior.sigma_beta_sq
    A_q = prior.ig_A + 0.5 * M
    lp = logit(prior.p_incl)

    # start from all indicators on and the noise level of the ridge fit
    w = np.ones(q)
    beta_r = np.linalg.solve(G + sb_prec * np.eye(q), c)
    rss0 = max(yy - 2.0 * c @ beta_r + beta_r @ G @ beta_r, 1e-12 * yy + 1e-300)
    tau = A_q / (prior.ig_B + 0.5 * rss0)

    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        Omega = np.outer(w, w) + np.diag(w * (1.0 - w))
        Sigma, neg_logdet = _psd_inverse(tau * G * Omega + sb_prec * np.eye(q))
        mu = tau * Sigma @ (w * c)
        s = prior.ig_B + 0.5 * max(_expected_rss(G, c, yy, w, mu, Sigma), 0.0)
        s = max(s, cfg.variance_floor)
        tau = A_q / s
        if not force_include:
            for j in range(q):
                cross = G[j] * w * (mu * mu[j] + Sigma[:, j])
                cross_sum = float(cross.sum() - cross[j])
                eta = lp - 0.5 * tau * (mu[j] ** 2 + Sigma[j, j]) * G[j, j] + tau * (c[j] * mu[j] - cross_sum)
                w[j] = expit(eta)
        trace.append(_elbo(G, c, yy, M, w, mu, Sigma, -neg_logdet, A_q, s, prior))
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < cfg.elbo_tol:
            converged = True
            break

    return MeanFieldPosterior(
        gaussian_blocks=(GaussianBlock("beta", mu, Sigma),),
        bernoulli_blocks=(BernoulliBlock("gamma", w.copy()),),
        invgamma_blocks=(InvGammaBlock("sigma2", A_q, s),),
        elbo_trace=trace,
        converged=converged,
        iterations=it,
    )


def coefficient_estimate(post: MeanFieldPosterior) -> np.ndarray:
    """Point estimate ``E[gamma_j beta_j] = w_j mu_j`` of the regression coefficients."""
    return post.bernoulli("gamma").prob * post.gaussian("beta").mean
