"""Univariate Gaussian mixture with conjugate priors, fitted by CAVI.

Model::

    pi ~ Dirichlet(alpha)
    sigma_k^2 ~ IG(a, b),  mu_k | sigma_k^2 ~ N(0, nu0 * sigma_k^2)
    z_i ~ Cat(pi),  x_i | z_i = k ~ N(mu_k, sigma_k^2)

Variational family ``q(pi) prod_k q(mu_k, sigma_k^2) prod_i q(z_i)`` with a
Dirichlet, Normal-Inverse-Gamma and categorical factor respectively.
Observation ``i`` enters every sufficient statistic with multiplicity
``K_i``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from ..bootstrap import BootstrapWeights, unit_weights
from ..errors import DegenerateDataWarning, DimensionMismatch, DomainError
from ..numerics import digamma
from .posterior import (
    DirichletBlock,
    FitConfig,
    GaussianBlock,
    InvGammaBlock,
    MeanFieldPosterior,
    ObservationSet,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GmmPrior:
    K: int
    dirichlet_alpha: np.ndarray
    nu0: float = 10.0
    ig_a: float = 1.0
    ig_b: float = 1.0

    def __post_init__(self):
        if self.K < 1:
            raise DomainError("K must be >= 1")
        alpha = np.broadcast_to(np.asarray(self.dirichlet_alpha, dtype=float), (self.K,)).copy()
        if np.any(~(alpha > 0)) or not (self.nu0 > 0 and self.ig_a > 0 and self.ig_b > 0):
            raise DomainError("GMM hyperparameters must be strictly positive")
        object.__setattr__(self, "dirichlet_alpha", alpha)

    @classmethod
    def default(cls, K: int) -> "GmmPrior":
        return cls(K, np.ones(K))


@dataclass
class _State:
    alpha: np.ndarray
    m: np.ndarray
    lam: np.ndarray
    a: np.ndarray
    b: np.ndarray


def initial_responsibilities(x: np.ndarray, w: np.ndarray, K: int) -> np.ndarray:
    """Hard assignment by weighted quantile block of the sorted data.

    Equal values share a block, and a value's block is fixed by the
    midpoint of its cumulative weight, so a weighted sample and the
    materialized resample get identical starting points.
    """
    vals, inv = np.unique(x, return_inverse=True)
    wsum = np.bincount(inv, weights=w, minlength=vals.size)
    total = wsum.sum()
    mid = np.cumsum(wsum) - 0.5 * wsum
    block = np.minimum((K * mid / total).astype(int), K - 1)
    r = np.zeros((x.size, K))
    r[np.arange(x.size), block[inv]] = 1.0
    return r


def _global_update(x, w, r, prior: GmmPrior, floor: float) -> _State:
    wr = w[:, None] * r
    N = wr.sum(axis=0)
    S1 = wr.T @ x
    S2 = wr.T @ (x * x)
    lam = 1.0 / prior.nu0 + N
    m = S1 / lam
    a = prior.ig_a + 0.5 * N
    b = prior.ig_b + 0.5 * np.maximum(S2 - S1 * S1 / lam, 0.0)
    b = np.maximum(b, floor)
    return _State(prior.dirichlet_alpha + N, m, lam, a, b)


def _expectations(st: _State):
    e_log_pi = digamma(st.alpha) - digamma(st.alpha.sum())
    e_prec = st.a / st.b
    e_log_var = np.log(st.b) - digamma(st.a)
    return e_log_pi, e_prec, e_log_var


def _expected_loglik(x, st: _State, e_prec, e_log_var):
    # E_q[log N(x_i | mu_k, sigma_k^2)], shape (n, K)
    diff2 = (x[:, None] - st.m[None, :]) ** 2
    return -0.5 * (LOG_2PI + e_log_var[None, :] + e_prec[None, :] * diff2 + 1.0 / st.lam[None, :])


def _local_update(x, st: _State) -> np.ndarray:
    e_log_pi, e_prec, e_log_var = _expectations(st)
    logr = e_log_pi[None, :] + _expected_loglik(x, st, e_prec, e_log_var)
    return np.exp(logr - logsumexp(logr, axis=1, keepdims=True))


def _log_dirichlet_norm(alpha):
    return gammaln(alpha.sum()) - gammaln(alpha).sum()


def _elbo(x, w, r, st: _State, prior: GmmPrior) -> float:
    e_log_pi, e_prec, e_log_var = _expectations(st)
    ll = _expected_loglik(x, st, e_prec, e_log_var)
    wr = w[:, None] * r
    term_x = float(np.sum(wr * ll))
    term_z = float(wr.sum(axis=0) @ e_log_pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        rlogr = np.where(r > 0, r * np.log(r), 0.0)
    ent_z = -float(np.sum(w[:, None] * rlogr))
    kl_pi = (
        _log_dirichlet_norm(st.alpha)
        - _log_dirichlet_norm(prior.dirichlet_alpha)
        + float((st.alpha - prior.dirichlet_alpha) @ e_log_pi)
    )
    # KL(IG(a, b) || IG(a0, b0)) + E_sigma[KL(N(m, s/lam) || N(0, nu0 s))]
    a0, b0 = prior.ig_a, prior.ig_b
    kl_var = (
        (st.a - a0) * digamma(st.a)
        - gammaln(st.a)
        + gammaln(a0)
        + a0 * (np.log(st.b) - math.log(b0))
        + st.a * (b0 - st.b) / st.b
    )
    lnu = st.lam * prior.nu0
    kl_mu = 0.5 * (1.0 / lnu + st.m**2 * e_prec / prior.nu0 - 1.0 + np.log(lnu))
    return term_x + term_z + ent_z - kl_pi - float(np.sum(kl_var + kl_mu))


def fit_gmm_cavi(
    data: ObservationSet,
    weights: BootstrapWeights | None,
    prior: GmmPrior,
    cfg: FitConfig = FitConfig(),
) -> MeanFieldPosterior:
    """CAVI for the weighted univariate Gaussian mixture.

    Components are sorted by the posterior mean of ``mu_k`` on exit so
    bagged replicates can be aligned. The returned posterior carries a
    Gaussian block ``mu`` (conditional variances ``1/lam_k``, scaled by the
    ``sigma2`` inverse-gamma block), the ``sigma2`` block and a Dirichlet
    block ``pi``.
    """
    if data.d != 1:
        raise DimensionMismatch(f"univariate data required, got {data.d} columns")
    if weights is None:
        weights = unit_weights(data.n)
    if weights.n != data.n:
        raise DimensionMismatch(f"{weights.n} weights for {data.n} observations")
    x = data.X[:, 0]
    w = weights.as_float()
    K = prior.K
    if K > 1 and np.ptp(x[w > 0]) == 0:
        warnings.warn("all weighted observations identical; variance floor engaged", DegenerateDataWarning)

    r = initial_responsibilities(x, w, K)
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        st = _global_update(x, w, r, prior, cfg.variance_floor)
        r = _local_update(x, st)
        trace.append(_elbo(x, w, r, st, prior))
        if K == 1 or (len(trace) > 1 and abs(trace[-1] - trace[-2]) < cfg.elbo_tol):
            converged = True
            break
    # refresh globals so they are optimal for the final responsibilities
    st = _global_update(x, w, r, prior, cfg.variance_floor)
    final = _elbo(x, w, r, st, prior)
    if final >= trace[-1]:
        trace.append(final)

    order = np.argsort(st.m, kind="stable")
    return MeanFieldPosterior(
        gaussian_blocks=(GaussianBlock("mu", st.m[order], 1.0 / st.lam[order], scale="sigma2"),),
        invgamma_blocks=(InvGammaBlock("sigma2", st.a[order], st.b[order]),),
        dirichlet_blocks=(DirichletBlock("pi", st.alpha[order]),),
        elbo_trace=trace,
        converged=converged,
        iterations=it,
    )


def exact_nig_posterior(data: ObservationSet, prior: GmmPrior, weights: BootstrapWeights | None = None):
    """Conjugate Normal-Inverse-Gamma posterior for a single component.

    Returns ``(m, lam, a, b)`` with ``mu | s ~ N(m, s / lam)`` and ``s ~ IG(a, b)``.
    """
    x = data.X[:, 0]
    w = np.ones_like(x) if weights is None else weights.as_float()
    N = w.sum()
    xbar = (w @ x) / N
    ss = w @ (x - xbar) ** 2
    k0 = 1.0 / prior.nu0
    lam = k0 + N
    m = N * xbar / lam
    a = prior.ig_a + 0.5 * N
    b = prior.ig_b + 0.5 * (ss + k0 * N * xbar**2 / lam)
    return m, lam, a, b
