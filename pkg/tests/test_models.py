import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vbag.bootstrap import BootstrapWeights, resample
from vbag.errors import DegenerateDataWarning, DimensionMismatch, EmptyData, SingularDesign
from vbag.models import (
    FitConfig,
    GaussianMeanPrior,
    GmmPrior,
    ObservationSet,
    SpikeSlabPrior,
    complete_data_loglik,
    exact_gaussian_mean_posterior,
    exact_nig_posterior,
    fit_gaussian_mean_mfvb,
    fit_gmm_cavi,
    fit_spike_slab_vb,
    fit_symmetric_mixture_vb,
    symmetric_mixture_mvle,
    symmetric_mixture_vll,
)
from vbag.numerics import RngStream

TIGHT = FitConfig(max_iters=2000, elbo_tol=1e-10)


def assert_monotone(trace, slack=1e-8):
    diffs = np.diff(trace)
    assert np.all(diffs >= -slack * np.maximum(1.0, np.abs(trace[1:]))), diffs.min()


class TestObservationSet:
    def test_promotes_vector(self):
        assert ObservationSet(np.arange(3.0)).X.shape == (3, 1)

    def test_empty(self):
        with pytest.raises(EmptyData):
            ObservationSet(np.zeros((0, 2)))

    def test_response_length(self):
        with pytest.raises(DimensionMismatch):
            ObservationSet(np.zeros((3, 2)), np.zeros(2))


class TestGaussianMean:
    @pytest.fixture
    def correlated(self):
        gen = RngStream(11).generator()
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        X = gen.multivariate_normal([1.0, -1.0], cov, size=300)
        return ObservationSet(X), GaussianMeanPrior.vague(np.linalg.inv(cov), 1e-6)

    def test_mean_matches_exact(self, correlated):
        data, prior = correlated
        post = fit_gaussian_mean_mfvb(data, None, prior)
        mean, cov = exact_gaussian_mean_posterior(data, prior)
        g = post.gaussian("mu")
        assert post.converged
        assert np.allclose(g.mean, mean, atol=1e-10)
        # mean-field variances are the reciprocal precision diagonal
        P = np.linalg.inv(cov)
        assert np.allclose(g.cov, 1.0 / np.diag(P), rtol=1e-12)
        assert np.all(g.cov < np.diag(cov))

    def test_independent_coordinates_exact(self):
        gen = RngStream(3).generator()
        X = gen.normal(size=(50, 3)) * [1.0, 2.0, 0.5]
        lam = np.diag(1.0 / np.array([1.0, 4.0, 0.25]))
        prior = GaussianMeanPrior(np.array([0.5, 0.0, -1.0]), np.array([1.0, 2.0, 0.1]), lam)
        data = ObservationSet(X)
        g = fit_gaussian_mean_mfvb(data, None, prior).gaussian("mu")
        mean, cov = exact_gaussian_mean_posterior(data, prior)
        assert np.allclose(g.mean, mean, atol=1e-12)
        assert np.allclose(g.cov, np.diag(cov), rtol=1e-12)

    def test_elbo_monotone(self, correlated):
        data, prior = correlated
        trace = fit_gaussian_mean_mfvb(data, None, prior).elbo_trace
        assert len(trace) > 2
        assert_monotone(trace)

    def test_weights_equal_materialized(self, correlated):
        data, prior = correlated
        w = resample(data.n, 450, RngStream(4))
        a = fit_gaussian_mean_mfvb(data, w, prior).gaussian("mu")
        b = fit_gaussian_mean_mfvb(data.take(w.materialize()), None, prior).gaussian("mu")
        assert np.allclose(a.mean, b.mean, atol=1e-8)
        assert np.allclose(a.cov, b.cov, rtol=1e-12)

    def test_dimension_mismatch(self, correlated):
        data, _ = correlated
        with pytest.raises(DimensionMismatch):
            fit_gaussian_mean_mfvb(data, None, GaussianMeanPrior.vague(np.eye(3)))


class TestGmm:
    def test_single_component_matches_nig(self):
        gen = RngStream(5).generator()
        data = ObservationSet(gen.normal(2.0, 1.5, size=200))
        prior = GmmPrior.default(1)
        post = fit_gmm_cavi(data, None, prior)
        m, lam, a, b = exact_nig_posterior(data, prior)
        g, ig = post.gaussian("mu"), post.invgamma("sigma2")
        assert post.converged
        assert g.mean[0] == pytest.approx(m, rel=1e-12)
        assert g.cov[0] == pytest.approx(1.0 / lam, rel=1e-12)
        assert ig.shape[0] == pytest.approx(a, rel=1e-12)
        assert ig.rate[0] == pytest.approx(b, rel=1e-12)

    def test_separated_clusters(self):
        gen = RngStream(6).generator()
        x = np.concatenate([gen.normal(-5, 1, 300), gen.normal(5, 1, 300)])
        post = fit_gmm_cavi(ObservationSet(x), None, GmmPrior.default(2), TIGHT)
        mu = post.gaussian("mu").mean
        assert mu[0] < mu[1]
        assert np.allclose(mu, [-5, 5], atol=0.2)
        assert np.allclose(post.invgamma("sigma2").mean(), 1.0, atol=0.2)
        alpha = post.dirichlet("pi").alpha
        assert np.allclose(alpha / alpha.sum(), 0.5, atol=0.02)

    def test_elbo_monotone(self):
        gen = RngStream(7).generator()
        x = np.concatenate([gen.normal(-1, 1, 150), gen.standard_t(3, 150) + 2])
        post = fit_gmm_cavi(ObservationSet(x), None, GmmPrior.default(3), TIGHT)
        assert_monotone(post.elbo_trace)

    def test_weights_equal_materialized(self):
        gen = RngStream(8).generator()
        x = np.concatenate([gen.normal(-3, 1, 100), gen.normal(3, 1, 100)])
        data = ObservationSet(x)
        w = resample(data.n, 200, RngStream(9))
        prior = GmmPrior.default(2)
        a = fit_gmm_cavi(data, w, prior, TIGHT)
        b = fit_gmm_cavi(data.take(w.materialize()), None, prior, TIGHT)
        assert np.allclose(a.gaussian("mu").mean, b.gaussian("mu").mean, atol=1e-8)
        assert np.allclose(a.invgamma("sigma2").rate, b.invgamma("sigma2").rate, rtol=1e-8)

    def test_constant_data_warns(self):
        with pytest.warns(DegenerateDataWarning):
            post = fit_gmm_cavi(ObservationSet(np.full(20, 3.0)), None, GmmPrior.default(2))
        assert np.all(np.isfinite(post.gaussian("mu").mean))

    def test_moments_use_scale(self):
        gen = RngStream(10).generator()
        post = fit_gmm_cavi(ObservationSet(gen.normal(size=100)), None, GmmPrior.default(1))
        _, cov = post.moments(["mu"])
        ig = post.invgamma("sigma2")
        assert cov[0, 0] == pytest.approx(post.gaussian("mu").cov[0] * ig.rate[0] / (ig.shape[0] - 1))


def regression(n, beta, seed, noise=1.0):
    gen = RngStream(seed).generator()
    X = gen.standard_normal((n, len(beta)))
    y = X @ np.asarray(beta) + noise * gen.standard_normal(n)
    return X, y


class TestSpikeSlab:
    def test_forced_inclusion_is_ridge(self):
        X, y = regression(200, [1.0, -2.0, 0.5], 12)
        prior = SpikeSlabPrior()
        post = fit_spike_slab_vb(X, y, None, prior, TIGHT, force_include=True)
        ig = post.invgamma("sigma2")
        tau = ig.shape / ig.rate
        ridge = np.linalg.solve(X.T @ X + np.eye(3) / (tau * prior.sigma_beta_sq), X.T @ y)
        assert np.allclose(post.gaussian("beta").mean, ridge, atol=1e-10)
        assert np.all(post.bernoulli("gamma").prob == 1.0)

    def test_large_slab_is_least_squares(self):
        X, y = regression(400, [1.0, -2.0, 0.5], 13)
        post = fit_spike_slab_vb(X, y, None, SpikeSlabPrior(sigma_beta_sq=1e12), TIGHT, force_include=True)
        ols = np.linalg.lstsq(X, y, rcond=None)[0]
        assert np.allclose(post.gaussian("beta").mean, ols, atol=1e-8)

    def test_weighted_least_squares(self):
        X, y = regression(100, [2.0, 0.0], 14)
        w = resample(100, 100, RngStream(15))
        post = fit_spike_slab_vb(X, y, w, SpikeSlabPrior(sigma_beta_sq=1e12), TIGHT, force_include=True)
        W = w.as_float()
        wls = np.linalg.solve(X.T @ (W[:, None] * X), X.T @ (W * y))
        assert np.allclose(post.gaussian("beta").mean, wls, atol=1e-8)

    def test_selects_signal(self):
        X, y = regression(500, [3.0, 0.0, -2.0, 0.0, 0.0], 16)
        post = fit_spike_slab_vb(X, y, None, SpikeSlabPrior(p_incl=0.1), TIGHT)
        prob = post.bernoulli("gamma").prob
        assert prob[0] > 0.99 and prob[2] > 0.99
        assert np.all(prob[[1, 3, 4]] < 0.5)
        assert post.converged

    def test_even_odds_ranks_by_t_statistic(self):
        # the mean-field indicator update has no Occam term, so with even prior
        # odds a null coefficient's inclusion tracks its t statistic
        X, y = regression(500, [3.0, 0.0, -2.0, 0.0, 0.0], 16)
        prob = fit_spike_slab_vb(X, y, None, SpikeSlabPrior(), TIGHT).bernoulli("gamma").prob
        ols = np.linalg.lstsq(X, y, rcond=None)[0]
        resid = y - X @ ols
        t = ols / np.sqrt(np.diag(np.linalg.inv(X.T @ X)) * (resid @ resid) / (500 - 5))
        nulls = [1, 3, 4]
        assert np.array_equal(np.argsort(prob[nulls]), np.argsort(np.abs(t[nulls])))

    def test_elbo_monotone(self):
        X, y = regression(150, [1.0, 0.0, 0.3, 0.0], 17, noise=2.0)
        assert_monotone(fit_spike_slab_vb(X, y, None, SpikeSlabPrior(), TIGHT).elbo_trace, slack=1e-7)

    def test_weights_equal_materialized(self):
        X, y = regression(120, [1.0, 0.0, -0.5], 18)
        w = resample(120, 120, RngStream(19))
        idx = w.materialize()
        a = fit_spike_slab_vb(X, y, w, SpikeSlabPrior(), TIGHT)
        b = fit_spike_slab_vb(X[idx], y[idx], None, SpikeSlabPrior(), TIGHT)
        assert np.allclose(a.gaussian("beta").mean, b.gaussian("beta").mean, atol=1e-8)
        assert np.allclose(a.bernoulli("gamma").prob, b.bernoulli("gamma").prob, atol=1e-8)

    def test_duplicate_column_singular(self):
        X, y = regression(50, [1.0, 1.0], 20)
        X[:, 1] = X[:, 0]
        with pytest.raises(SingularDesign):
            fit_spike_slab_vb(X, y, None, SpikeSlabPrior())

    def test_zero_column_singular(self):
        X, y = regression(50, [1.0, 1.0], 21)
        X[:, 1] = 0.0
        with pytest.raises(SingularDesign):
            fit_spike_slab_vb(X, y, None, SpikeSlabPrior())


class TestSymmetricMixture:
    def test_vll_is_best_label(self):
        gen = RngStream(22).generator()
        x = gen.normal(scale=3, size=200)
        for theta in [0.0, 0.7, 2.5]:
            brute = np.maximum(complete_data_loglik(x, 0, theta), complete_data_loglik(x, 1, theta))
            assert np.allclose(symmetric_mixture_vll(x, theta), brute, atol=1e-14)

    def test_vll_curvature(self):
        h = 1e-4
        for x, theta in [(1.3, 0.8), (-2.0, 1.1), (0.4, 3.0)]:
            f = lambda t: symmetric_mixture_vll(x, t)
            d2 = (f(theta + h) - 2 * f(theta) + f(theta - h)) / h**2
            assert d2 == pytest.approx(-1.0, abs=1e-5)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_mvle_is_grid_maximizer(self, seed):
        gen = np.random.default_rng(seed)
        x = gen.normal(1.0, 1.0, size=30) * gen.choice([-1, 1], size=30)
        mvle = symmetric_mixture_mvle(x)
        grid = np.linspace(0, 4, 4001)
        obj = np.array([np.sum(symmetric_mixture_vll(x, t)) for t in grid])
        assert abs(grid[obj.argmax()] - mvle) <= 1e-3
        assert np.sum(symmetric_mixture_vll(x, mvle)) >= obj.max() - 1e-9

    def test_weighted_mvle(self):
        x = np.array([-1.0, 2.0, 3.0])
        w = BootstrapWeights(np.array([2, 0, 1]), 3)
        assert symmetric_mixture_mvle(x, w) == pytest.approx(5.0 / 3.0)

    def test_fit_centres_on_mvle(self):
        gen = RngStream(23).generator()
        x = gen.normal(2.0, 1.0, 400) * gen.choice([-1, 1], 400)
        post = fit_symmetric_mixture_vb(ObservationSet(x), None, prior_precision=1e-9)
        g = post.gaussian("theta")
        assert post.converged
        assert g.mean[0] == pytest.approx(symmetric_mixture_mvle(x), rel=1e-6)
        assert g.cov[0] == pytest.approx(1.0 / 400, rel=1e-6)
        assert_monotone(post.elbo_trace)
