import functools
import warnings

import numpy as np
import pytest
from scipy import stats

from vbag.bagging import (
    BaggedPosterior,
    GaussianCoverageScenario,
    SandwichInputs,
    bag,
    bagged_moments,
    correct_covariance,
    coverage_experiment,
    covariance_report,
    credible_ellipsoid,
    recombine_offdiagonal,
    sample_bagged,
    sandwich_covariance,
)
from vbag.bootstrap import resample
from vbag.errors import (
    AllReplicatesFailed,
    ClippingWarning,
    DomainError,
    SingularHessian,
    StructureMismatch,
)
from vbag.models import (
    FitConfig,
    GaussianBlock,
    GaussianMeanPrior,
    MeanFieldPosterior,
    ObservationSet,
    fit_gaussian_mean_mfvb,
)
from vbag.numerics import RngStream, chi2_quantile


def point(mean, var):
    return MeanFieldPosterior(gaussian_blocks=(GaussianBlock("mu", mean, var),), converged=True)


def gaussian_bag(seed=0, n=100, B=10, workers=1):
    gen = RngStream(seed).generator()
    cov = np.array([[1.0, 0.5], [0.5, 1.0]])
    data = ObservationSet(gen.multivariate_normal([0, 0], cov, n))
    prior = GaussianMeanPrior.vague(np.linalg.inv(cov), 1e-6)
    fit = functools.partial(fit_gaussian_mean_mfvb, prior=prior)
    return bag(fit, data, B, n, RngStream(seed, 1), workers=workers)


class TestMoments:
    def test_single_component(self):
        bp = BaggedPosterior((point([1.0, 2.0], [0.5, 0.25]),), 10, 10, (0,))
        mean, cov = bagged_moments(bp)
        assert np.allclose(mean, [1.0, 2.0])
        assert np.allclose(cov, np.diag([0.5, 0.25]))

    def test_two_point_masses(self):
        bp = BaggedPosterior((point([-1.0], [1e-300]), point([1.0], [1e-300])), 10, 10, (0, 1))
        mean, cov = bagged_moments(bp)
        assert mean[0] == 0.0 and cov[0, 0] == pytest.approx(1.0)

    def test_total_variance(self):
        comps = (point([0.0, 1.0], [1.0, 2.0]), point([2.0, 3.0], [3.0, 4.0]))
        _, cov = bagged_moments(BaggedPosterior(comps, 5, 5, (0, 1)))
        assert np.allclose(cov, [[2.0 + 1.0, 1.0], [1.0, 3.0 + 1.0]])

    def test_structure_mismatch(self):
        with pytest.raises(StructureMismatch):
            BaggedPosterior((point([0.0], [1.0]), point([0.0, 1.0], [1.0, 1.0])), 5, 5, (0, 1))

    def test_monte_carlo(self):
        bp = gaussian_bag(3)
        mean, cov = bagged_moments(bp)
        draws = sample_bagged(bp, 200_000, RngStream(4))
        se = np.sqrt(np.diag(cov) / draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se)
        assert np.allclose(np.cov(draws.T), cov, rtol=0.03)


class TestCorrection:
    def test_halving(self):
        out = correct_covariance([[2.0, 0.3], [0.3, 4.0]])
        assert np.array_equal(out, [[1.0, 0.3], [0.3, 2.0]])

    def test_offdiagonal_only(self):
        out = correct_covariance([[2.0, 0.3], [0.3, 4.0]], "off-diagonal-only")
        assert np.array_equal(out, [[0.0, 0.3], [0.3, 0.0]])

    def test_unknown_mode(self):
        with pytest.raises(DomainError):
            correct_covariance(np.eye(2), "other")

    def test_recombine_no_clip(self):
        out, clipped = recombine_offdiagonal([[9.0, 0.2], [0.2, 9.0]], [1.0, 1.0])
        assert not clipped
        assert np.array_equal(out, [[1.0, 0.2], [0.2, 1.0]])

    def test_recombine_clips(self):
        with pytest.warns(ClippingWarning):
            out, clipped = recombine_offdiagonal([[0.0, 2.0], [2.0, 0.0]], [1.0, 1.0])
        assert clipped
        assert np.min(np.linalg.eigvalsh(out)) >= 1e-10 * (1 - 1e-6)

    def test_report(self):
        bp = gaussian_bag(5)
        rep = covariance_report(bp)
        assert np.allclose(np.diag(rep.corrected_cov), 0.5 * np.diag(rep.bagged_cov))


class TestSandwich:
    def test_well_specified_gaussian(self):
        # unit-variance Gaussian location: score x - mu, hessian 1, so the sandwich is the sample variance
        x = RngStream(6).generator().normal(size=1000)
        out = sandwich_covariance(SandwichInputs((x - x.mean())[:, None], np.eye(1)))
        assert out[0, 0] == pytest.approx(np.var(x), rel=1e-12)

    def test_matrix_form(self):
        gen = RngStream(7).generator()
        s = gen.normal(size=(50, 2))
        V = np.array([[2.0, 0.5], [0.5, 1.0]])
        Vi = np.linalg.inv(V)
        want = Vi @ (s.T @ s / 50) @ Vi
        assert np.allclose(sandwich_covariance(SandwichInputs(s, V)), want, rtol=1e-12)

    def test_singular(self):
        with pytest.raises(SingularHessian):
            sandwich_covariance(SandwichInputs(np.ones((3, 2)), np.ones((2, 2))))


class TestEllipsoid:
    def test_radius_is_chi2(self):
        ell = credible_ellipsoid([0.0, 0.0], np.eye(2), 0.95)
        assert ell.radius_sq == pytest.approx(chi2_quantile(0.95, 2))
        assert ell.contains([0.0, 0.0])
        assert not ell.contains([3.0, 0.0])

    def test_root_n_scale(self):
        ell = credible_ellipsoid([0.0], [[1.0]], 0.95, n=100)
        assert ell.contains([0.19]) and not ell.contains([0.2])

    def test_gaussian_mass(self):
        gen = RngStream(8).generator()
        cov = np.array([[2.0, 0.7], [0.7, 1.0]])
        ell = credible_ellipsoid([1.0, -1.0], cov, 0.9)
        draws = gen.multivariate_normal([1.0, -1.0], cov, 100_000)
        assert ell.contains(draws).mean() == pytest.approx(0.9, abs=0.005)

    def test_bad_level(self):
        with pytest.raises(DomainError):
            credible_ellipsoid([0.0], [[1.0]], 1.0)


class TestBag:
    def test_workers_do_not_change_result(self):
        a = gaussian_bag(9, workers=1)
        b = gaussian_bag(9, workers=4)
        for ca, cb in zip(a.components, b.components):
            assert np.array_equal(ca.gaussian("mu").mean, cb.gaussian("mu").mean)

    def test_replicate_uses_child_stream(self):
        bp = gaussian_bag(10, B=3)
        gen = RngStream(10).generator()
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        data = ObservationSet(gen.multivariate_normal([0, 0], cov, 100))
        w = resample(100, 100, RngStream(10, 1).child(2))
        prior = GaussianMeanPrior.vague(np.linalg.inv(cov), 1e-6)
        direct = fit_gaussian_mean_mfvb(data, w, prior)
        assert np.array_equal(direct.gaussian("mu").mean, bp.components[2].gaussian("mu").mean)

    def test_drops_nonconverged(self):
        data = ObservationSet(np.arange(10.0))

        def flaky(data, weights):
            return MeanFieldPosterior(
                gaussian_blocks=(GaussianBlock("mu", [0.0], [1.0]),),
                converged=bool(weights.counts[0] % 2 == 0),
            )

        bp = bag(flaky, data, 20, 10, RngStream(0))
        assert bp.discarded + bp.B == 20 and bp.discarded > 0

    def test_all_failed(self):
        def never(data, weights):
            return MeanFieldPosterior(gaussian_blocks=(GaussianBlock("mu", [0.0], [1.0]),), converged=False)

        with pytest.raises(AllReplicatesFailed):
            bag(never, ObservationSet(np.arange(5.0)), 4, 5, RngStream(0))

    def test_c_ratio(self):
        bp = BaggedPosterior((point([0.0], [1.0]),), 150, 100, (0,))
        assert bp.c_ratio == 1.5


class TestCoverage:
    def test_small_experiment(self):
        sc = GaussianCoverageScenario(np.zeros(2), np.array([[1.0, 0.5], [0.5, 1.0]]), n=100, B=10)
        res = coverage_experiment(sc, 40, 0.95, RngStream(11))
        assert res.reps == 40 and res.failed == 0
        assert res.ci[0] <= res.coverage <= res.ci[1]
        ci = stats.binomtest(res.hits, 40).proportion_ci(method="exact")
        assert res.ci == pytest.approx((ci.low, ci.high))
        assert res.coverage >= 0.8

    def test_parallel_identical(self):
        sc = GaussianCoverageScenario(np.zeros(2), np.eye(2), n=50, B=5)
        a = coverage_experiment(sc, 12, 0.9, RngStream(12), workers=1)
        b = coverage_experiment(sc, 12, 0.9, RngStream(12), workers=3)
        assert a == b
