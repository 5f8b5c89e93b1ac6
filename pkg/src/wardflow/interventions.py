"""What-if transforms for admissions streams and recovery durations.

Scenario 1 ramps admissions down linearly to a final reduction level;
Scenario 2 shortens recovering-segment durations by a fixed fraction with
stochastic rounding and a one-day floor. Both preserve expectations exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Health


def stochastic_round(x, rng: np.random.Generator):
    """Round up with probability frac(x), down otherwise; E[result] = x.

    Accepts a scalar or array of non-negative values; returns int or int64
    array of the same shape.
    """
    arr = np.asarray(x, dtype=float)
    if arr.size and arr.min() < 0:
        raise ValueError("stochastic_round requires non-negative input")
    lo = np.floor(arr)
    result = (lo + (rng.random(arr.shape) < (arr - lo))).astype(np.int64)
    if np.isscalar(x) or arr.ndim == 0:
        return int(result)
    return result


@dataclass(frozen=True)
class AdmissionsSchedule:
    """Linear admissions-reduction ramp.

    Reduction is 0 before and at start_day, climbs linearly to
    final_reduction at start_day + ramp_days, and stays there; ramp_days = 0
    applies the full reduction from start_day on.
    """

    start_day: int
    ramp_days: int
    final_reduction: float

    def __post_init__(self):
        if self.ramp_days < 0:
            raise ValueError("ramp_days must be >= 0")
        if not 0.0 <= self.final_reduction <= 1.0:
            raise ValueError(f"final_reduction must lie in [0, 1], got {self.final_reduction!r}")

    def reduction_at(self, day: int) -> float:
        if self.ramp_days == 0:
            return self.final_reduction if day >= self.start_day else 0.0
        frac = min(1.0, max(0.0, (day - self.start_day) / self.ramp_days))
        return self.final_reduction * frac


def apply_admissions_schedule(admissions, schedule: AdmissionsSchedule, rng: np.random.Generator, first_day: int = 1):
    """Reduce admissions along the ramp; fractional expected counts are
    realized by stochastic rounding so integer admissions stay unbiased."""
    admissions = np.asarray(admissions, dtype=float)
    days = np.arange(first_day, first_day + len(admissions))
    reductions = np.array([schedule.reduction_at(int(d)) for d in days])
    return stochastic_round(admissions * (1.0 - reductions), rng)


def admissions_schedule_hook(schedule: AdmissionsSchedule, first_day: int = 1):
    """Adapter making a schedule usable as simulate_census's admissions_hook."""

    def hook(admissions, rng):
        return apply_admissions_schedule(admissions, schedule, rng, first_day=first_day)

    return hook


@dataclass(frozen=True)
class RecoveryDurationPolicy:
    """Cut recovering-segment durations by reduction_fraction, floored at
    min_days; declining segments are untouched."""

    reduction_fraction: float = 0.25
    min_days: int = 1

    def __post_init__(self):
        if not 0.0 <= self.reduction_fraction < 1.0:
            raise ValueError(f"reduction_fraction must lie in [0, 1), got {self.reduction_fraction!r}")
        if self.min_days < 1:
            raise ValueError("min_days must be >= 1")


class RecoveryDurationTransform:
    """Duration hook applying a RecoveryDurationPolicy.

    Exposes recovery_reduction/min_days so census simulation can run it
    inside the compiled kernel; calling it directly serves the per-patient
    Python path.
    """

    def __init__(self, policy: RecoveryDurationPolicy):
        self.policy = policy
        self.recovery_reduction = policy.reduction_fraction
        self.min_days = policy.min_days

    def __call__(self, stage, health, duration, rng) -> int:
        if Health(health) != Health.RECOVERING:
            return int(duration)
        cut = stochastic_round(duration * (1.0 - self.recovery_reduction), rng)
        return max(self.min_days, int(cut))


def recovery_duration_hook(policy: RecoveryDurationPolicy) -> RecoveryDurationTransform:
    """Duration transform for sample_trajectory / simulate_census."""
    return RecoveryDurationTransform(policy)
