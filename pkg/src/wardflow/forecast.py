"""Posterior forecasts and evaluation metrics.

One full-horizon simulation per posterior sample turns a sample set into an
empirical forecast distribution; summaries report per-day means and
percentile bands, and metrics cover mean absolute error (with batched
uncertainty intervals) and interval coverage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import CensusSeries, ModelParams, aggregate_counts, simulate_census

DEFAULT_LEVELS = (2.5, 50.0, 97.5)


def forecast_counts(
    samples: Sequence[ModelParams],
    admissions,
    init_counts: Mapping | None = None,
    scale_r: float = 1.0,
    rng: np.random.Generator | None = None,
    stage_mapping=None,
    duration_hook=None,
    admissions_hook=None,
) -> list[CensusSeries]:
    """One census simulation per posterior sample over days 1..len(admissions).

    Each simulation uses a fresh substream of rng, so repeated samples still
    produce independent simulation noise.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    if rng is None:
        rng = np.random.default_rng()
    out = []
    for params in samples:
        series = simulate_census(
            params,
            admissions,
            init_counts=init_counts,
            scale_r=scale_r,
            rng=rng,
            duration_hook=duration_hook,
            admissions_hook=admissions_hook,
        )
        if stage_mapping is not None:
            series = aggregate_counts(series, stage_mapping)
        out.append(series)
    return out


@dataclass
class ForecastSummary:
    """Per-label, per-day mean and percentile bands."""

    start_day: int
    levels: tuple[float, ...]
    mean: dict[str, np.ndarray]
    percentiles: dict[str, np.ndarray]  # per label: (len(levels), horizon)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.mean.keys())

    @property
    def horizon(self) -> int:
        return len(next(iter(self.mean.values())))


def summarize_percentiles(forecasts: Sequence[CensusSeries], levels: Sequence[float] = DEFAULT_LEVELS) -> ForecastSummary:
    """Empirical per-day percentiles (linear interpolation) across forecasts."""
    if not forecasts:
        raise ValueError("forecasts must be non-empty")
    levels = tuple(float(l) for l in levels)
    if any(not 0.0 <= l <= 100.0 for l in levels):
        raise ValueError(f"percentile levels must lie in [0, 100], got {levels!r}")
    first = forecasts[0]
    mean: dict[str, np.ndarray] = {}
    percentiles: dict[str, np.ndarray] = {}
    for label in first.labels:
        stacked = np.stack([np.asarray(f[label], dtype=float) for f in forecasts])
        mean[label] = stacked.mean(axis=0)
        percentiles[label] = np.percentile(stacked, levels, axis=0)
    return ForecastSummary(start_day=first.start_day, levels=levels, mean=mean, percentiles=percentiles)


def mae(mean_forecast, truth) -> float:
    """Mean absolute error over days."""
    mean_forecast = np.asarray(mean_forecast, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if mean_forecast.shape != truth.shape:
        raise ValueError(f"length mismatch: {mean_forecast.shape} vs {truth.shape}")
    return float(np.abs(mean_forecast - truth).mean())


@dataclass
class MaeReport:
    """Per-label batched MAE: mean across batches with 2.5/97.5 percentiles."""

    mean: dict[str, float]
    lower: dict[str, float]
    upper: dict[str, float]
    batch_size: int
    n_batches: int

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.mean.keys())


def mae_with_batches(
    samples: Sequence[ModelParams],
    admissions,
    truth: CensusSeries,
    init_counts: Mapping | None = None,
    scale_r: float = 1.0,
    batch_size: int = 100,
    n_batches: int = 100,
    rng: np.random.Generator | None = None,
    stage_mapping=None,
    duration_hook=None,
    admissions_hook=None,
) -> MaeReport:
    """MAE of batch-mean forecasts, repeated over independent batches.

    Each batch draws batch_size posterior samples (without replacement when
    the pool allows, else with replacement), simulates one forecast per draw,
    averages them per day, and scores MAE against truth on truth's day
    window. Reported per label: mean MAE across batches and the 2.5/97.5
    percentiles.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    if rng is None:
        rng = np.random.default_rng()
    pool = list(samples)
    replace = len(pool) < batch_size
    last_day = truth.start_day + truth.horizon - 1
    per_label: dict[str, list[float]] = {label: [] for label in truth.labels}
    for _ in range(n_batches):
        chosen_idx = rng.choice(len(pool), size=batch_size, replace=replace)
        batch = [pool[i] for i in chosen_idx]
        forecasts = forecast_counts(
            batch,
            admissions,
            init_counts=init_counts,
            scale_r=scale_r,
            rng=rng,
            stage_mapping=stage_mapping,
            duration_hook=duration_hook,
            admissions_hook=admissions_hook,
        )
        window = [f.day_slice(truth.start_day, last_day) for f in forecasts]
        for label in truth.labels:
            batch_mean = np.stack([np.asarray(w[label], dtype=float) for w in window]).mean(axis=0)
            per_label[label].append(mae(batch_mean, truth[label]))
    mean = {l: float(np.mean(v)) for l, v in per_label.items()}
    lower = {l: float(np.percentile(v, 2.5)) for l, v in per_label.items()}
    upper = {l: float(np.percentile(v, 97.5)) for l, v in per_label.items()}
    return MaeReport(mean=mean, lower=lower, upper=upper, batch_size=batch_size, n_batches=n_batches)


def coverage(forecasts: Sequence[CensusSeries], truth: CensusSeries, target_pct: float) -> dict[str, float]:
    """Percent of truth days inside the centered target_pct percentile interval.

    The interval per day spans the ((100-target)/2, 100-(100-target)/2)
    empirical percentiles of the forecasts; returns per-label percentages.
    """
    if not forecasts:
        raise ValueError("forecasts must be non-empty")
    if not 0.0 < target_pct <= 100.0:
        raise ValueError(f"target_pct must lie in (0, 100], got {target_pct!r}")
    tail = (100.0 - target_pct) / 2.0
    last_day = truth.start_day + truth.horizon - 1
    window = [f.day_slice(truth.start_day, last_day) for f in forecasts]
    out: dict[str, float] = {}
    for label in truth.labels:
        stacked = np.stack([np.asarray(w[label], dtype=float) for w in window])
        lo = np.percentile(stacked, tail, axis=0)
        hi = np.percentile(stacked, 100.0 - tail, axis=0)
        t = np.asarray(truth[label], dtype=float)
        inside = (t >= lo) & (t <= hi)
        out[label] = float(100.0 * inside.mean())
    return out
