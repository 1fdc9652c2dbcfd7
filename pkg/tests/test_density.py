"""Density accumulation and the acceptance-probability chain."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evdown import (DensityMap, OccupancyMap, PriorMap, SensorGeometry,
                    SigmoidParams, accumulate_density, gaussian_prior,
                    minmax_normalize, poisson_occupancy, score_map, sigmoid)

from conftest import chain_oracle, make_stream

GEO4 = SensorGeometry(4, 4)


def occupancy_of(counts, geometry=None):
    counts = np.asarray(counts, dtype=np.float64)
    if geometry is None:
        geometry = SensorGeometry(counts.shape[1], counts.shape[0])
    return poisson_occupancy(DensityMap(geometry, counts))


class TestAccumulateDensity:
    def test_counts_per_pixel(self):
        """Three events at pixel (1, 2) put a count of 3 at row 2, col 1."""
        s = make_stream(GEO4, [(1, 1, 2, 1), (2, 1, 2, 0), (3, 1, 2, 1),
                               (4, 3, 0, 1)])
        d = accumulate_density(s)
        assert d.counts[2, 1] == 3.0
        assert d.counts[0, 3] == 1.0
        assert d.counts.sum() == 4.0

    def test_counts_all_events_not_just_accepted(self):
        s = make_stream(GEO4, [(i, 0, 0, 1) for i in range(7)])
        assert accumulate_density(s).counts[0, 0] == 7.0

    def test_empty_stream_all_zero(self):
        d = accumulate_density(make_stream(GEO4, []))
        assert d.counts.shape == (4, 4)
        assert not d.counts.any()

    def test_out_of_bounds_rejected(self):
        # constructor does not bound-check against geometry; accumulation does
        from evdown import EventStream
        s = EventStream(GEO4, [1], [4], [0], [1])
        with pytest.raises(ValueError, match="outside"):
            accumulate_density(s)


class TestPoissonOccupancy:
    def test_formula_matches_oracle(self):
        counts = np.array([[0.0, 1.0, 2.0], [5.0, 0.5, 10.0]])
        occ = occupancy_of(counts)
        expected = [[1.0 - math.exp(-c) for c in row] for row in counts]
        np.testing.assert_allclose(occ.values, expected, rtol=0, atol=1e-12)

    def test_zero_count_is_exactly_zero(self):
        occ = occupancy_of(np.zeros((3, 3)))
        assert (occ.values == 0.0).all()

    def test_strictly_below_one(self):
        occ = occupancy_of(np.full((2, 2), 800.0))
        assert (occ.values < 1.0).all()

    def test_monotone_in_counts(self):
        occ = occupancy_of(np.arange(16.0).reshape(4, 4))
        flat = occ.values.ravel()
        assert (np.diff(flat) > 0).all()

    def test_rejects_negative_or_nonfinite(self):
        with pytest.raises(ValueError):
            poisson_occupancy(DensityMap(GEO4, np.full((4, 4), -1.0)))
        with pytest.raises(ValueError):
            poisson_occupancy(DensityMap(GEO4, np.full((4, 4), np.nan)))


class TestMinmaxNormalize:
    def test_known_values(self):
        """{0, 2, 8} -> {0, 0.25, 1}."""
        out = minmax_normalize(np.array([0.0, 2.0, 8.0]))
        np.testing.assert_array_equal(out, [0.0, 0.25, 1.0])

    def test_constant_maps_to_zeros(self):
        out = minmax_normalize(np.full((3, 3), 7.5))
        assert (out == 0.0).all()

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            minmax_normalize(np.array([0.0, np.inf]))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(min_value=-1e12, max_value=1e12,
                              allow_nan=False), min_size=2, max_size=40))
    def test_range_and_extremes(self, values):
        out = minmax_normalize(np.array(values))
        assert (out >= 0.0).all() and (out <= 1.0).all()
        if max(values) > min(values):
            assert out.min() == 0.0
            assert out.max() == 1.0


class TestSigmoidParams:
    def test_defaults(self):
        params = SigmoidParams()
        assert params.slope == 5.0
        assert params.midpoint == 0.5

    @pytest.mark.parametrize("slope", [0.0, -1.0, np.inf, np.nan])
    def test_rejects_bad_slope(self, slope):
        with pytest.raises(ValueError):
            SigmoidParams(slope=slope)


class TestSigmoid:
    def test_midpoint_is_half(self):
        assert float(sigmoid(0.5)) == 0.5
        assert float(sigmoid(0.3, SigmoidParams(9.0, 0.3))) == 0.5

    def test_saturation_stays_open(self):
        hi = float(sigmoid(1e6, SigmoidParams(slope=800.0)))
        lo = float(sigmoid(-1e6, SigmoidParams(slope=800.0)))
        assert 0.0 < lo < hi < 1.0

    def test_matches_oracle(self):
        rng = np.random.default_rng(3)
        v = rng.uniform(-3, 3, size=50)
        p = sigmoid(v, SigmoidParams(2.5, 0.1))
        from conftest import oracle_sigmoid
        expected = [oracle_sigmoid(x, 2.5, 0.1) for x in v]
        np.testing.assert_allclose(p, expected, rtol=0, atol=1e-12)


class TestScoreMap:
    def test_chain_matches_oracle_4x4(self):
        counts = [[0, 1, 2, 0], [3, 0, 0, 1], [0, 8, 0, 0], [1, 1, 4, 0]]
        sm = score_map(occupancy_of(counts), alpha=0.2)
        expected = chain_oracle(counts, 0.2)
        np.testing.assert_allclose(sm.probabilities, expected,
                                   rtol=0, atol=1e-12)

    def test_degenerate_constant_collapses_to_sigmoid_alpha(self):
        sm = score_map(occupancy_of(np.zeros((5, 5))), alpha=0.1)
        # all-equal occupancy normalizes to zeros, so every pixel scores
        # sigmoid(alpha); for the default params that is expit(-2)
        assert (sm.probabilities == sm.probabilities[0, 0]).all()
        np.testing.assert_allclose(sm.probabilities[0, 0],
                                   0.11920292202211755, rtol=0, atol=1e-12)

    def test_mean_shift_centers_on_alpha(self):
        rng = np.random.default_rng(11)
        counts = rng.integers(0, 20, size=(6, 9)).astype(float)
        occ = occupancy_of(counts)
        for alpha in (0.05, 0.3, 0.9):
            base = minmax_normalize(occ.values)
            shifted = base + (alpha - base.mean())
            np.testing.assert_allclose(shifted.mean(), alpha,
                                       rtol=0, atol=1e-12)

    def test_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(7)
        counts = rng.integers(0, 50, size=(8, 8)).astype(float)
        sm = score_map(occupancy_of(counts), alpha=0.01,
                       params=SigmoidParams(slope=900.0))
        assert (sm.probabilities > 0.0).all()
        assert (sm.probabilities < 1.0).all()

    def test_monotone_in_counts(self):
        counts = np.array([[0.0, 1.0], [5.0, 50.0]])
        sm = score_map(occupancy_of(counts), alpha=0.1)
        flat = sm.probabilities.ravel()
        assert (np.diff(flat) > 0).all()

    def test_alpha_domain(self):
        occ = occupancy_of(np.zeros((2, 2)))
        for alpha in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                score_map(occ, alpha)

    def test_window_id_defaults_to_occupancy(self):
        occ = OccupancyMap(GEO4, np.zeros((4, 4)), window_id=9)
        assert score_map(occ, 0.5).window_id == 9
        assert score_map(occ, 0.5, window_id=3).window_id == 3


class TestPriorMap:
    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            PriorMap(GEO4, np.full((4, 4), -0.1))
        with pytest.raises(ValueError):
            PriorMap(GEO4, np.zeros((4, 4)))
        bad = np.ones((4, 4))
        bad[1, 1] = np.nan
        with pytest.raises(ValueError):
            PriorMap(GEO4, bad)
        with pytest.raises(ValueError):
            PriorMap(GEO4, np.ones((3, 4)))

    def test_constant_prior_equals_no_prior_bitwise(self):
        rng = np.random.default_rng(5)
        counts = rng.integers(0, 30, size=(6, 6)).astype(float)
        occ = occupancy_of(counts)
        flat_prior = PriorMap(occ.geometry, np.full((6, 6), 3.7))
        plain = score_map(occ, 0.2)
        with_prior = score_map(occ, 0.2, prior=flat_prior)
        np.testing.assert_array_equal(plain.probabilities,
                                      with_prior.probabilities)

    def test_prior_chain_matches_oracle(self):
        rng = np.random.default_rng(13)
        counts = rng.integers(0, 25, size=(5, 7)).astype(float)
        weights = rng.uniform(0.1, 4.0, size=(5, 7))
        occ = occupancy_of(counts)
        sm = score_map(occ, 0.15, prior=PriorMap(occ.geometry, weights))
        expected = chain_oracle(counts.tolist(), 0.15,
                                prior=weights.tolist())
        np.testing.assert_allclose(sm.probabilities, expected,
                                   rtol=0, atol=1e-12)

    def test_prior_steers_scores(self):
        # equal occupancy everywhere: only the prior differentiates pixels
        counts = np.full((4, 4), 5.0)
        occ = occupancy_of(counts)
        weights = np.ones((4, 4))
        weights[0, 0] = 10.0
        sm = score_map(occ, 0.2, prior=PriorMap(occ.geometry, weights))
        assert sm.probabilities[0, 0] > sm.probabilities[3, 3]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=-8, max_value=8), st.integers(0, 2**32))
    def test_power_of_two_scaling_is_bitwise_invariant(self, exponent, seed):
        rng = np.random.default_rng(seed)
        counts = rng.integers(0, 40, size=(4, 5)).astype(float)
        weights = rng.uniform(0.25, 8.0, size=(4, 5))
        occ = occupancy_of(counts)
        a = score_map(occ, 0.3, prior=PriorMap(occ.geometry, weights))
        scaled = weights * 2.0 ** exponent
        b = score_map(occ, 0.3, prior=PriorMap(occ.geometry, scaled))
        np.testing.assert_array_equal(a.probabilities, b.probabilities)

    def test_geometry_mismatch_rejected(self):
        occ = occupancy_of(np.zeros((4, 4)))
        prior = gaussian_prior(SensorGeometry(5, 5))
        with pytest.raises(ValueError):
            score_map(occ, 0.5, prior=prior)


class TestGaussianPrior:
    def test_peak_one_at_center_odd_dims(self):
        prior = gaussian_prior(SensorGeometry(9, 7))
        assert prior.weights[3, 4] == 1.0
        assert prior.weights.max() == 1.0

    def test_symmetry(self):
        w = gaussian_prior(SensorGeometry(8, 6)).weights
        np.testing.assert_array_equal(w, w[::-1, :])
        np.testing.assert_array_equal(w, w[:, ::-1])

    def test_default_sigma_quarter_dimension(self):
        geo = SensorGeometry(16, 8)
        default = gaussian_prior(geo).weights
        explicit = gaussian_prior(geo, sigma_x=4.0, sigma_y=2.0).weights
        np.testing.assert_array_equal(default, explicit)

    def test_one_sigma_value(self):
        # odd dims put the center on a pixel; one sigma out is exp(-0.5)
        prior = gaussian_prior(SensorGeometry(17, 9), sigma_x=4.0, sigma_y=2.0)
        np.testing.assert_allclose(prior.weights[4, 12], math.exp(-0.5),
                                   rtol=1e-15)

    def test_monotone_decay_from_center(self):
        w = gaussian_prior(SensorGeometry(11, 11)).weights
        row = w[5, :]
        assert (np.diff(row[:6]) > 0).all()
        assert (np.diff(row[5:]) < 0).all()

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            gaussian_prior(GEO4, sigma_x=0.0)
