"""Non-mechanistic comparison forecasters.

Two baselines: a constant forecast at the training median, and a conjugate
Bayesian linear regression over a day index (optionally plus lagged
admissions). The regression uses a zero-mean coefficient prior with
precision 1e-6 per standardized feature and a broad inverse-gamma noise
prior, so its posterior mean coincides exactly with the ridge solution at
penalty 1e-6 on the standardized design.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

N_ADMISSION_LAGS = 21


class LrFeatureMode(enum.Enum):
    DAY_ONLY = "day_only"
    DAY_PLUS_ADMISSIONS = "day_plus_admissions21"


def median_forecast(train_counts, horizon: int) -> np.ndarray:
    """Constant forecast at the training median (lower median if even length)."""
    train_counts = np.asarray(train_counts, dtype=float)
    if train_counts.size == 0:
        raise ValueError("median_forecast needs a non-empty training series")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    ordered = np.sort(train_counts)
    lower_median = ordered[(len(ordered) - 1) // 2]
    return np.full(horizon, lower_median)


def build_features(days, admissions, mode: LrFeatureMode, first_day: int = 1) -> np.ndarray:
    """Feature rows for the given day numbers.

    DAY_ONLY: just the day index. DAY_PLUS_ADMISSIONS: day index plus the
    admission count from each of the previous 21 days; days before the
    admissions record contribute zero.
    """
    days = np.asarray(days, dtype=int)
    admissions = np.asarray(admissions, dtype=float)
    columns = [days.astype(float)]
    if mode is LrFeatureMode.DAY_PLUS_ADMISSIONS:
        for lag in range(1, N_ADMISSION_LAGS + 1):
            idx = days - lag - first_day
            if np.any(idx >= len(admissions)):
                raise ValueError("admissions record does not cover the requested days")
            lagged = np.where(idx >= 0, admissions[np.clip(idx, 0, None)], 0.0)
            columns.append(lagged)
    elif mode is not LrFeatureMode.DAY_ONLY:
        raise ValueError(f"unknown feature mode {mode!r}")
    return np.column_stack(columns)


@dataclass(frozen=True)
class BayesLrPosterior:
    """Conjugate posterior over standardized-design weights and noise variance."""

    coef_mean: np.ndarray  # over [intercept, kept standardized features]
    precision: np.ndarray
    noise_shape: float
    noise_rate: float
    feature_mean: np.ndarray
    feature_sd: np.ndarray
    kept_columns: np.ndarray
    n_train: int

    def design(self, features) -> np.ndarray:
        """Standardize raw features and prepend the intercept column."""
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        kept = features[:, self.kept_columns]
        standardized = (kept - self.feature_mean) / self.feature_sd
        return np.column_stack([np.ones(len(features)), standardized])


def bayes_lr_fit(
    features,
    targets,
    coef_precision: float = 1e-6,
    noise_shape0: float = 1e-6,
    noise_rate0: float = 1e-6,
) -> BayesLrPosterior:
    """Fit the normal-inverse-gamma conjugate model.

    Zero-variance feature columns cannot be standardized; they are dropped
    with a warning (e.g. the admission lags when admissions are identically
    zero, which reduces the model to day-only).
    """
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if features.ndim != 2 or len(features) != len(targets):
        raise ValueError("features must be (n, p) with one row per target")
    n = len(targets)
    if n < 2:
        raise ValueError("need at least two training rows")

    sd = features.std(axis=0)
    kept = np.flatnonzero(sd > 0.0)
    dropped = np.flatnonzero(sd == 0.0)
    if dropped.size:
        warnings.warn(
            f"dropping {dropped.size} zero-variance feature column(s): {dropped.tolist()}",
            stacklevel=2,
        )
    if kept.size == 0:
        warnings.warn("all features are constant; fitting intercept only", stacklevel=2)
    feature_mean = features[:, kept].mean(axis=0)
    feature_sd = sd[kept]
    design = np.column_stack(
        [np.ones(n), (features[:, kept] - feature_mean) / feature_sd]
    )

    precision = coef_precision * np.eye(design.shape[1]) + design.T @ design
    coef_mean = np.linalg.solve(precision, design.T @ targets)
    noise_shape = noise_shape0 + n / 2.0
    noise_rate = noise_rate0 + 0.5 * (targets @ targets - coef_mean @ precision @ coef_mean)
    return BayesLrPosterior(
        coef_mean=coef_mean,
        precision=precision,
        noise_shape=noise_shape,
        noise_rate=max(noise_rate, noise_rate0),
        feature_mean=feature_mean,
        feature_sd=feature_sd,
        kept_columns=kept,
        n_train=n,
    )


def bayes_lr_predictive_mean(posterior: BayesLrPosterior, features) -> np.ndarray:
    """Exact posterior predictive mean (no sampling, no clipping)."""
    return posterior.design(features) @ posterior.coef_mean


def bayes_lr_forecast(posterior: BayesLrPosterior, features, n_samples: int, rng) -> np.ndarray:
    """Posterior predictive draws, shape (n_samples, n_days).

    Each draw samples the noise variance, then weights, then per-day
    observation noise; results are clipped at zero since census counts are
    non-negative.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    design = posterior.design(features)
    p = design.shape[1]
    chol = np.linalg.cholesky(posterior.precision)
    sigma2 = posterior.noise_rate / rng.gamma(posterior.noise_shape, 1.0, size=n_samples)
    draws = np.empty((n_samples, len(design)))
    for i in range(n_samples):
        z = rng.standard_normal(p)
        weights = posterior.coef_mean + np.sqrt(sigma2[i]) * np.linalg.solve(chol.T, z)
        noise = np.sqrt(sigma2[i]) * rng.standard_normal(len(design))
        draws[i] = design @ weights + noise
    return np.maximum(draws, 0.0)
