import numpy as np
import pytest

from wardflow.baselines import (
    N_ADMISSION_LAGS,
    LrFeatureMode,
    bayes_lr_fit,
    bayes_lr_forecast,
    bayes_lr_predictive_mean,
    build_features,
    median_forecast,
)


class TestMedianForecast:
    def test_odd_length_middle_value(self):
        assert np.array_equal(median_forecast([3, 1, 2], horizon=4), [2, 2, 2, 2])

    def test_even_length_lower_median(self):
        assert np.array_equal(median_forecast([1, 2, 3, 4], horizon=2), [2, 2])
        assert np.array_equal(median_forecast([10, 20], horizon=1), [10])

    def test_constant_series(self):
        assert np.array_equal(median_forecast([7, 7, 7], horizon=3), [7, 7, 7])

    def test_no_constant_strictly_better_in_l1(self):
        """The median minimizes sum |c - y|; brute-force over candidates."""
        rng = np.random.default_rng(0)
        for _ in range(50):
            y = rng.integers(0, 30, size=rng.integers(2, 12)).astype(float)
            med = median_forecast(y, horizon=1)[0]
            base = np.abs(med - y).sum()
            for c in np.linspace(y.min() - 1, y.max() + 1, 101):
                assert np.abs(c - y).sum() >= base - 1e-9

    def test_validation(self):
        with pytest.raises(ValueError):
            median_forecast([], horizon=3)
        with pytest.raises(ValueError):
            median_forecast([1.0], horizon=0)


class TestBuildFeatures:
    def test_day_only(self):
        f = build_features([1, 2, 3], [], LrFeatureMode.DAY_ONLY)
        assert f.shape == (3, 1)
        assert np.array_equal(f[:, 0], [1.0, 2.0, 3.0])

    def test_lag_columns_shifted_by_one_to_twenty_one(self):
        admissions = np.arange(100.0, 140.0)  # admissions[i] covers day i+1
        days = np.array([30, 31])
        f = build_features(days, admissions, LrFeatureMode.DAY_PLUS_ADMISSIONS)
        assert f.shape == (2, 1 + N_ADMISSION_LAGS)
        # lag 1 for day 30 is day-29 admissions = admissions[28]
        assert f[0, 1] == admissions[28]
        assert f[1, 1] == admissions[29]
        # lag 21 for day 30 is day-9 admissions = admissions[8]
        assert f[0, 21] == admissions[8]

    def test_days_before_record_zero_padded(self):
        admissions = np.array([5.0, 5.0, 5.0])
        f = build_features([1, 2], admissions, LrFeatureMode.DAY_PLUS_ADMISSIONS)
        # day 1 has no previous days on record: all lags zero
        assert np.all(f[0, 1:] == 0.0)
        # day 2, lag 1 -> day-1 admissions = admissions[0]
        assert f[1, 1] == 5.0
        assert np.all(f[1, 2:] == 0.0)

    def test_future_days_beyond_record_rejected(self):
        with pytest.raises(ValueError, match="does not cover"):
            build_features([10], np.ones(3), LrFeatureMode.DAY_PLUS_ADMISSIONS)

    def test_first_day_offset(self):
        admissions = np.array([7.0, 8.0, 9.0])  # covering days 5, 6, 7
        f = build_features([6], admissions, LrFeatureMode.DAY_PLUS_ADMISSIONS, first_day=5)
        assert f[0, 1] == 7.0  # lag 1 = day 5
        assert np.all(f[0, 2:] == 0.0)


class TestBayesLr:
    def test_posterior_mean_is_ridge_solution(self):
        """Independent oracle: ridge normal equations on the standardized
        design with penalty equal to the prior precision."""
        rng = np.random.default_rng(1)
        X = rng.normal(size=(12, 3)) * [1.0, 10.0, 0.2] + [0.0, 5.0, -3.0]
        y = rng.normal(size=12) * 2 + 4
        post = bayes_lr_fit(X, y, coef_precision=1e-6)

        Xs = (X - X.mean(axis=0)) / X.std(axis=0)
        D = np.column_stack([np.ones(12), Xs])
        ridge = np.linalg.solve(1e-6 * np.eye(4) + D.T @ D, D.T @ y)
        assert np.allclose(post.coef_mean, ridge, rtol=0, atol=1e-8)
        assert np.allclose(bayes_lr_predictive_mean(post, X), D @ ridge, atol=1e-8)

    def test_recovers_exact_linear_relationship(self):
        days = np.arange(1, 21, dtype=float).reshape(-1, 1)
        y = 3.0 * days[:, 0] + 10.0
        post = bayes_lr_fit(days, y)
        pred = bayes_lr_predictive_mean(post, np.array([[25.0], [30.0]]))
        assert np.allclose(pred, [85.0, 100.0], atol=1e-4)

    def test_zero_variance_columns_dropped_with_warning(self):
        X = np.column_stack([np.arange(10.0), np.zeros(10)])
        y = np.arange(10.0)
        with pytest.warns(UserWarning, match="zero-variance"):
            post = bayes_lr_fit(X, y)
        assert np.array_equal(post.kept_columns, [0])
        # design still works on raw 2-column inputs
        assert bayes_lr_predictive_mean(post, X).shape == (10,)

    def test_zero_admissions_reduces_to_day_only(self):
        """With identically zero admissions every lag column drops, so the
        posterior equals the DAY_ONLY posterior and forecasts match draw for
        draw under the same seed."""
        days = np.arange(1, 31)
        admissions = np.zeros(40)
        y = 2.0 * days + np.sin(days)
        X_full = build_features(days, admissions, LrFeatureMode.DAY_PLUS_ADMISSIONS)
        X_day = build_features(days, admissions, LrFeatureMode.DAY_ONLY)
        with pytest.warns(UserWarning):
            post_full = bayes_lr_fit(X_full, y)
        post_day = bayes_lr_fit(X_day, y)
        assert np.allclose(post_full.coef_mean, post_day.coef_mean)

        test_days = np.array([31, 32, 33])
        Xf = build_features(test_days, admissions, LrFeatureMode.DAY_PLUS_ADMISSIONS)
        Xd = build_features(test_days, admissions, LrFeatureMode.DAY_ONLY)
        a = bayes_lr_forecast(post_full, Xf, 50, np.random.default_rng(7))
        b = bayes_lr_forecast(post_day, Xd, 50, np.random.default_rng(7))
        assert np.allclose(a, b)

    def test_forecast_draws_shape_and_clipping(self):
        days = np.arange(1, 11, dtype=float).reshape(-1, 1)
        y = np.linspace(4, -4, 10)  # forces some negative predictions
        post = bayes_lr_fit(days, y)
        draws = bayes_lr_forecast(post, np.array([[12.0], [15.0]]), 400, np.random.default_rng(8))
        assert draws.shape == (400, 2)
        assert draws.min() >= 0.0
        assert (draws == 0.0).any()  # clipping engaged

    def test_predictive_mean_is_not_clipped(self):
        days = np.arange(1, 11, dtype=float).reshape(-1, 1)
        y = np.linspace(4, -4, 10)
        post = bayes_lr_fit(days, y)
        mean = bayes_lr_predictive_mean(post, np.array([[15.0]]))
        assert mean[0] < 0.0

    def test_noise_posterior_reasonable(self):
        rng = np.random.default_rng(9)
        days = np.arange(1, 201, dtype=float).reshape(-1, 1)
        y = 2.0 * days[:, 0] + rng.normal(0, 3.0, size=200)
        post = bayes_lr_fit(days, y)
        # inverse-gamma posterior mean of sigma^2 = rate / (shape - 1)
        sigma2_hat = post.noise_rate / (post.noise_shape - 1.0)
        assert 6.0 < sigma2_hat < 13.5  # true 9

    def test_validation(self):
        with pytest.raises(ValueError):
            bayes_lr_fit(np.ones((3, 2)), np.ones(4))
        with pytest.raises(ValueError):
            bayes_lr_fit(np.ones((1, 2)), np.ones(1))
        with pytest.raises(ValueError):
            bayes_lr_forecast(
                bayes_lr_fit(np.arange(4.0).reshape(-1, 1), np.arange(4.0)),
                np.array([[5.0]]), 0, np.random.default_rng(0),
            )
