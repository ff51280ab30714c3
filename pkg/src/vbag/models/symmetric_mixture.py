"""Symmetric two-component mixture ``0.5 N(theta, 1) + 0.5 N(-theta, 1)``.

Latent labels get point-mass variational factors (hard clustering), so the
variational log-likelihood of one observation is the best complete-data
log-likelihood over its two labels. ``sign(0)`` is taken as ``+1``.
"""
from __future__ import annotations

import math

import numpy as np

from ..bootstrap import BootstrapWeights, unit_weights
from ..errors import DimensionMismatch, DomainError
from .posterior import FitConfig, GaussianBlock, MeanFieldPosterior, ObservationSet

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def sign(x):
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def symmetric_mixture_vll(x, theta):
    """``-(x - sign(x) theta)^2 / 2 - log(2 pi) / 2``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise DomainError("theta must be nonnegative")
    out = -0.5 * (np.asarray(x, dtype=float) - sign(x) * theta) ** 2 - HALF_LOG_2PI
    return float(out) if out.ndim == 0 else out


def complete_data_loglik(x, z, theta):
    """``log N(x | (2z - 1) theta, 1)`` for a label ``z`` in {0, 1}."""
    return -0.5 * (x - (2 * z - 1) * theta) ** 2 - HALF_LOG_2PI


def _data_and_weights(data, weights):
    if not isinstance(data, ObservationSet):
        data = ObservationSet(np.asarray(data, dtype=float))
    if data.d != 1:
        raise DimensionMismatch(f"univariate data required, got {data.d} columns")
    if weights is None:
        weights = unit_weights(data.n)
    if weights.n != data.n:
        raise DimensionMismatch(f"{weights.n} weights for {data.n} observations")
    return data.X[:, 0], weights


def symmetric_mixture_mvle(data, weights: BootstrapWeights | None = None) -> float:
    """Maximizer of the weighted variational log-likelihood: the weighted mean of ``|x_i|``."""
    x, weights = _data_and_weights(data, weights)
    return float(weights.as_float() @ np.abs(x) / weights.total)


def symmetric_mixture_asymptotic_var(data, theta0: float, c: float) -> float:
    """Limiting variance ``(1/c) (1 + mean((x - sign(x) theta0)^2))`` of the bagged posterior."""
    if theta0 < 0:
        raise DomainError("theta0 must be nonnegative")
    if not c > 0:
        raise DomainError("c must be > 0")
    x, _ = _data_and_weights(data, None)
    return float((1.0 + np.mean((x - sign(x) * theta0) ** 2)) / c)


def fit_symmetric_mixture_vb(
    data: ObservationSet,
    weights: BootstrapWeights | None,
    prior_precision: float = 1e-6,
    cfg: FitConfig = FitConfig(),
) -> MeanFieldPosterior:
    """CAVI with ``q(theta) = N(m, v)`` and point-mass label factors.

    The prior on ``theta`` is ``N(0, 1/prior_precision)``. The label step
    puts ``z_i`` on the side closest to ``sign(x_i) m``; the ``theta`` step
    is the conjugate Gaussian update given those labels.
    """
    x, weights = _data_and_weights(data, weights)
    if not prior_precision > 0:
        raise DomainError("prior_precision must be > 0")
    w = weights.as_float()
    M = float(weights.total)
    v = 1.0 / (M + prior_precision)
    # start from labels z_i = 1 for every point
    s = np.ones_like(x)
    trace = []
    converged = False
    it = 0
    m = 0.0
    for it in range(1, cfg.max_iters + 1):
        m = float(v * (w @ (s * x)))
        s_new = np.where(x * m >= 0, 1.0, -1.0)
        # E_q[log p(x, z | theta)] + E_q[log p(theta)] + H(q(theta)), label entropy is zero
        fit = -0.5 * (w @ ((x - s_new * m) ** 2) + M * v) - M * HALF_LOG_2PI
        prior = 0.5 * math.log(prior_precision) - HALF_LOG_2PI - 0.5 * prior_precision * (m * m + v)
        ent = 0.5 * math.log(2.0 * math.pi * math.e * v)
        trace.append(float(fit + prior + ent))
        changed = np.any(s_new != s)
        s = s_new
        if not changed and it > 1:
            converged = True
            break
    return MeanFieldPosterior(
        gaussian_blocks=(GaussianBlock("theta", [abs(m)], [v]),),
        elbo_trace=trace,
        converged=converged,
        iterations=it,
    )
