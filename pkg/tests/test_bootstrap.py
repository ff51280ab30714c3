from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vbag.bootstrap import (
    BootstrapWeights,
    SizeSelectionInputs,
    asymptotic_optimal_size,
    finite_sample_optimal_size,
    finite_sample_size_details,
    resample,
)
from vbag.errors import DegenerateVariance, InvalidSize, NegativeDiscriminant
from vbag.numerics import RngStream


def test_single_atom_takes_all_mass():
    w = resample(1, 5, RngStream(0))
    assert w.counts.tolist() == [5]


def test_total_mass_conserved():
    w = resample(3, 3, RngStream(1))
    assert w.counts.sum() == 3 and w.total == 3


def test_mean_count_per_index():
    gen = RngStream(2).generator()
    counts = np.array([resample(100, 100, gen).counts for _ in range(10_000)])
    assert np.max(np.abs(counts.mean(axis=0) - 1.0)) < 0.05


@pytest.mark.parametrize("n,M", [(0, 5), (5, 0)])
def test_invalid_size(n, M):
    with pytest.raises(InvalidSize):
        resample(n, M, RngStream(0))


def test_frozen_stream_deterministic():
    a = resample(50, 70, RngStream(9, 4))
    b = resample(50, 70, RngStream(9, 4))
    assert np.array_equal(a.counts, b.counts)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 200), st.integers(1, 500), st.integers(0, 2**32))
def test_counts_sum_exactly(n, M, seed):
    w = resample(n, M, RngStream(seed))
    assert int(w.counts.sum()) == M
    assert w.counts.dtype.kind == "i"


def test_weights_reject_bad_totals():
    with pytest.raises(InvalidSize):
        BootstrapWeights(np.array([1, 2]), 4)
    with pytest.raises(InvalidSize):
        BootstrapWeights(np.array([-1, 2]), 1)


def test_materialize():
    w = BootstrapWeights(np.array([0, 2, 1]), 3)
    assert w.materialize().tolist() == [1, 1, 2]


class TestAsymptoticSize:
    def test_substitution(self):
        assert asymptotic_optimal_size(SizeSelectionInputs(1.0, 2.0, 100)) == 200
        assert asymptotic_optimal_size(SizeSelectionInputs(1.0, 3.0, 100)) == 150

    def test_degenerate(self):
        with pytest.raises(DegenerateVariance):
            asymptotic_optimal_size(SizeSelectionInputs(1.0, 1.0, 100))
        with pytest.raises(DegenerateVariance):
            asymptotic_optimal_size(SizeSelectionInputs(2.0, 1.0, 100))

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(1e-6, 1e3),
        st.floats(1.01, 50.0),
        st.integers(1, 10_000),
        st.sampled_from([1e-3, 0.5, 2.0, 1e4]),
    )
    def test_scale_invariant(self, v, ratio, n, lam):
        base = asymptotic_optimal_size(SizeSelectionInputs(v, v * ratio, n))
        scaled = asymptotic_optimal_size(SizeSelectionInputs(lam * v, lam * v * ratio, n))
        assert abs(base - scaled) <= 1  # only rounding of an exact tie can differ

    def test_floored_at_one(self):
        assert asymptotic_optimal_size(SizeSelectionInputs(1e-9, 1e3, 1)) == 1


def hand_fs_opt(v0, v, vs, n):
    """Independent exact-arithmetic evaluation of the displayed finite-sample formula."""
    v0, v, vs, n = (Fraction(x) for x in (v0, v, vs, n))
    sigma_sq = n * v0 * v / (v0 - v)
    s_sq = v0**2 / (v0 - v) ** 2 * (vs - v) * n
    lead = n / 2 + n * sigma_sq / (2 * s_sq)
    disc = lead**2 - n * sigma_sq / v0
    return float(lead - sigma_sq / v0) + math.sqrt(float(disc)), float(sigma_sq), float(s_sq)


class TestFiniteSampleSize:
    def test_hand_chain(self):
        det = finite_sample_size_details(SizeSelectionInputs(1.0, 2.0, 100, 10.0))
        assert det.sigma_sq == pytest.approx(100 * 10 * 1 / 9, rel=1e-14)
        assert det.s_sq == pytest.approx(100 * (100 / 81) * 1, rel=1e-14)
        raw, _, _ = hand_fs_opt(10, 1, 2, 100)
        assert det.raw == pytest.approx(raw, rel=1e-12)
        # 95 - 100/9 + sqrt(95^2 - 10000/9)
        assert det.raw == pytest.approx(172.848930, abs=1e-5)
        assert det.size == 173

    def test_large_prior_variance_limit(self):
        for v, vs, n in [(1.0, 2.0, 100), (0.3, 0.5, 250), (2.0, 9.0, 40)]:
            asym = asymptotic_optimal_size(SizeSelectionInputs(v, vs, n))
            fs = finite_sample_optimal_size(SizeSelectionInputs(v, vs, n, 1e8 * v))
            assert abs(fs - asym) <= 0.01 * asym

    def test_infinite_prior_variance_equals_asymptotic(self):
        assert finite_sample_optimal_size(SizeSelectionInputs(1.0, 3.0, 100)) == 150

    def test_degenerate(self):
        with pytest.raises(DegenerateVariance):
            finite_sample_optimal_size(SizeSelectionInputs(1.0, 2.0, 100, 1.0))
        with pytest.raises(DegenerateVariance):
            finite_sample_optimal_size(SizeSelectionInputs(1.0, 1.0, 100, 10.0))

    def test_negative_discriminant(self):
        # a prior variance barely above the VB variance drives the bracket negative
        inputs = SizeSelectionInputs(1.0, 1.0 + 1e-3, 10, 1.0 + 1e-3)
        with pytest.raises(NegativeDiscriminant) as err:
            finite_sample_optimal_size(inputs)
        assert err.value.inputs == inputs
