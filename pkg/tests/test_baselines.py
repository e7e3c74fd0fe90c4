"""Tests for the univariate reference gap fillers."""

import numpy as np
import pytest

from gapfill.baselines import (
    SeasonalProfile,
    fit_seasonal_profile,
    interpolate_linear,
    interpolate_spline,
    locf,
    seasonal_interpolate,
)
from gapfill.errors import DataError

NAN = np.nan


class TestLocf:
    def test_definition(self):
        np.testing.assert_array_equal(
            locf(np.array([1.0, NAN, NAN, 4.0])), [1.0, 1.0, 1.0, 4.0]
        )

    def test_no_gap_identity(self):
        col = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(locf(col), col)

    def test_gap_at_start_rejected(self):
        with pytest.raises(DataError, match="before the gap"):
            locf(np.array([NAN, 2.0]))

    def test_multiple_runs(self):
        filled = locf(np.array([5.0, NAN, 7.0, NAN, NAN, 2.0]))
        np.testing.assert_array_equal(filled, [5.0, 5.0, 7.0, 7.0, 7.0, 2.0])


class TestLinear:
    def test_midpoint(self):
        np.testing.assert_allclose(
            interpolate_linear(np.array([1.0, NAN, 3.0])), [1.0, 2.0, 3.0]
        )

    def test_equal_spacing(self):
        np.testing.assert_allclose(
            interpolate_linear(np.array([0.0, NAN, NAN, NAN, 4.0])),
            [0.0, 1.0, 2.0, 3.0, 4.0],
        )

    def test_matches_closed_form_line_over_long_gap(self):
        rng = np.random.default_rng(17)
        a, b = rng.normal(size=2)
        col = np.full(120, NAN)
        col[:15] = rng.normal(size=15)
        col[105:] = rng.normal(size=15)
        col[14], col[105] = a, b
        filled = interpolate_linear(col.copy())
        gap = np.arange(15, 105)
        line = a + (b - a) * (gap - 14) / (105 - 14)
        assert np.abs(filled[gap] - line).max() < 1e-12

    def test_one_sided_gap_rejected(self):
        with pytest.raises(DataError, match="both sides"):
            interpolate_linear(np.array([1.0, 2.0, NAN]))
        with pytest.raises(DataError, match="both sides"):
            interpolate_linear(np.array([NAN, 2.0, 3.0]))


class TestSpline:
    def test_straight_line_data_equals_linear_fill(self):
        col = np.arange(20, dtype=float) * 0.5 + 1.0
        col[7:12] = NAN
        spline = interpolate_spline(col.copy())
        linear = interpolate_linear(col.copy())
        assert np.abs(spline - linear).max() < 1e-10

    def test_cubic_data_reproduced_in_the_interior(self):
        # natural end conditions decay geometrically, so a gap deep inside
        # a long record sees the true cubic
        idx = np.arange(200, dtype=float)
        x = idx / 100.0
        cubic = 0.3 * x**3 - 0.5 * x**2 + 0.2 * x + 1.0
        col = cubic.copy()
        col[90:110] = NAN
        filled = interpolate_spline(col)
        assert np.abs(filled[90:110] - cubic[90:110]).max() < 1e-8

    def test_three_observed_points_fall_back_to_linear(self):
        col = np.array([1.0, NAN, 2.0, NAN, 10.0])
        with pytest.warns(UserWarning, match="linear"):
            filled = interpolate_spline(col.copy())
        np.testing.assert_allclose(filled, interpolate_linear(col.copy()))

    def test_observed_entries_unchanged(self):
        rng = np.random.default_rng(3)
        col = rng.normal(size=50)
        col[20:30] = NAN
        filled = interpolate_spline(col.copy())
        observed = ~np.isnan(col)
        np.testing.assert_array_equal(filled[observed], col[observed])
        assert not np.isnan(filled).any()


class TestSeasonalProfile:
    def test_per_phase_means(self):
        col = np.array([1.0, 10.0, 3.0, 30.0], dtype=float)
        profile = fit_seasonal_profile(col, 2)
        np.testing.assert_allclose(profile.means, [2.0, 20.0])

    def test_empty_phase_falls_back_to_global_mean(self):
        col = np.array([2.0, NAN, 4.0, NAN], dtype=float)
        profile = fit_seasonal_profile(col, 2)
        assert profile.means[0] == 3.0
        assert profile.means[1] == 3.0  # no phase-1 observations

    def test_bad_frequency_rejected(self):
        with pytest.raises(DataError, match="frequency"):
            SeasonalProfile(frequency=1, means=np.array([1.0]))


class TestSeasonalInterpolate:
    def test_exact_periodic_signal_restored(self):
        t = np.arange(365 * 6, dtype=float)
        truth = np.cos(2 * np.pi * t / 365) * 2 + 5
        col = truth.copy()
        col[1000:1090] = NAN
        filled = seasonal_interpolate(col, 365)
        assert np.abs(filled[1000:1090] - truth[1000:1090]).max() < 1e-10

    def test_constant_series(self):
        col = np.full(30, 7.5)
        col[10:15] = NAN
        filled = seasonal_interpolate(col, 5)
        np.testing.assert_allclose(filled, 7.5)

    def test_beats_plain_linear_on_sine_plus_trend(self):
        # 180-step gap across a seasonal swing: deseasonalizing first wins
        t = np.arange(365 * 6, dtype=float)
        truth = np.sin(2 * np.pi * t / 365) + 0.001 * t
        col = truth.copy()
        col[800:980] = NAN
        gap = slice(800, 980)
        seasonal_rmse = np.sqrt(
            np.mean((seasonal_interpolate(col.copy(), 365)[gap] - truth[gap]) ** 2)
        )
        linear_rmse = np.sqrt(
            np.mean((interpolate_linear(col.copy())[gap] - truth[gap]) ** 2)
        )
        assert seasonal_rmse < linear_rmse
        assert seasonal_rmse < 0.05 < linear_rmse

    def test_zero_profile_equals_linear_exactly(self):
        # alternating +-1 / +-5 per phase: observed per-phase means are
        # exactly zero, and removing idx 6..9 keeps them balanced
        col = np.tile([1.0, 5.0, -1.0, -5.0], 4)
        col[6:10] = NAN
        profile = fit_seasonal_profile(col, 2)
        np.testing.assert_array_equal(profile.means, [0.0, 0.0])
        np.testing.assert_array_equal(
            seasonal_interpolate(col.copy(), 2), interpolate_linear(col.copy())
        )

    def test_length_shorter_than_frequency_rejected(self):
        with pytest.raises(DataError, match="shorter"):
            seasonal_interpolate(np.ones(10), 365)

    def test_fills_everything_leaves_observed(self):
        rng = np.random.default_rng(4)
        col = rng.normal(size=80)
        col[30:45] = NAN
        filled = seasonal_interpolate(col.copy(), 7)
        observed = ~np.isnan(col)
        np.testing.assert_array_equal(filled[observed], col[observed])
        assert not np.isnan(filled).any()
