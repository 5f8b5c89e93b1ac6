"""Patient-flow model: care stages, explicit-duration segments, census simulation.

Patients move through three intermediate care stages (general ward G, ICU
off-ventilator I, ICU on-ventilator V) and exit to one of two terminal
outcomes (recovered R, died T). Each stay in a stage is a *segment* with an
explicit integer duration drawn from a tempered truncated-Poisson family.
A per-segment health flag (declining / recovering) determines the direction
of movement: declining patients advance G -> I -> V -> T, recovering patients
unwind V -> I -> G -> R, and once recovering a patient never declines again.

Daily census series report point-prevalence occupancy for G, I, V and
incident counts (new events per day) for R and T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Mapping

import numpy as np
from scipy.special import gammaln, logsumexp

from . import backends

WARMUP_DAYS = 5
WARMSTART_INFLATION = 1.03  # extra G/V arrivals covering pre-window exits
MAX_SEGMENTS = 5


class Stage(IntEnum):
    """Care stages; G/I/V are intermediate, R/T terminal."""

    G = 0  # general ward
    I = 1  # ICU, not ventilated
    V = 2  # ICU, on ventilator
    R = 3  # recovered (terminal)
    T = 4  # died (terminal)


class Health(IntEnum):
    DECLINING = 0
    RECOVERING = 1


INTERMEDIATE_STAGES = (Stage.G, Stage.I, Stage.V)
TERMINAL_STAGES = (Stage.R, Stage.T)

# Flat parameter vector layout used for CSV output and the sampler.
PARAM_NAMES = (
    "recover_G",
    "recover_I",
    "recover_V",
    "death_G",
    "death_I",
    "mode_G_declining",
    "temp_G_declining",
    "mode_G_recovering",
    "temp_G_recovering",
    "mode_I_declining",
    "temp_I_declining",
    "mode_I_recovering",
    "temp_I_recovering",
    "mode_V_declining",
    "temp_V_declining",
    "mode_V_recovering",
    "temp_V_recovering",
)


@dataclass(frozen=True)
class DurationParams:
    """Parameters of one segment-duration distribution.

    mode: location of the underlying Poisson peak, in days.
    temperature: softmax temperature; 1 recovers the truncated Poisson,
    larger values flatten toward uniform, smaller values sharpen.
    """

    mode: float
    temperature: float

    def __post_init__(self):
        for name in ("mode", "temperature"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"duration {name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class TransitionParams:
    """Recovery-switch probabilities per intermediate stage and early-death
    probabilities for declining exits from G and I (a declining exit from V
    is always death)."""

    recover_G: float
    recover_I: float
    recover_V: float
    death_G: float
    death_I: float

    def __post_init__(self):
        for name in ("recover_G", "recover_I", "recover_V", "death_G", "death_I"):
            v = getattr(self, name)
            if not (np.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be a probability in [0, 1], got {v!r}")

    def recover_prob(self, stage: Stage) -> float:
        return (self.recover_G, self.recover_I, self.recover_V)[int(stage)]

    def death_prob(self, stage: Stage) -> float:
        if stage == Stage.G:
            return self.death_G
        if stage == Stage.I:
            return self.death_I
        raise ValueError(f"no early-death probability for stage {stage!r}")


@dataclass(frozen=True)
class ModelParams:
    """All 17 learnable scalars plus the duration cap."""

    transitions: TransitionParams
    durations: Mapping[tuple[Stage, Health], DurationParams]
    duration_cap: int = 22

    def __post_init__(self):
        if int(self.duration_cap) < 1 or self.duration_cap != int(self.duration_cap):
            raise ValueError(f"duration_cap must be a positive integer, got {self.duration_cap!r}")
        object.__setattr__(self, "duration_cap", int(self.duration_cap))
        expected = {(s, h) for s in INTERMEDIATE_STAGES for h in Health}
        if set(self.durations.keys()) != expected:
            raise ValueError("durations must map exactly the 6 (intermediate stage, health) pairs")
        for key, dp in self.durations.items():
            if dp.mode > self.duration_cap:
                raise ValueError(f"duration mode {dp.mode} for {key} exceeds duration_cap {self.duration_cap}")

    def to_dict(self) -> dict[str, float]:
        """Natural-valued parameters in PARAM_NAMES order."""
        tr = self.transitions
        out = {
            "recover_G": tr.recover_G,
            "recover_I": tr.recover_I,
            "recover_V": tr.recover_V,
            "death_G": tr.death_G,
            "death_I": tr.death_I,
        }
        for stage in INTERMEDIATE_STAGES:
            for health in (Health.DECLINING, Health.RECOVERING):
                dp = self.durations[(stage, health)]
                tag = f"{stage.name}_{health.name.lower()}"
                out[f"mode_{tag}"] = dp.mode
                out[f"temp_{tag}"] = dp.temperature
        return out

    @staticmethod
    def from_dict(values: Mapping[str, float], duration_cap: int = 22) -> "ModelParams":
        missing = [n for n in PARAM_NAMES if n not in values]
        if missing:
            raise ValueError(f"missing parameters: {missing}")
        tr = TransitionParams(
            recover_G=float(values["recover_G"]),
            recover_I=float(values["recover_I"]),
            recover_V=float(values["recover_V"]),
            death_G=float(values["death_G"]),
            death_I=float(values["death_I"]),
        )
        durations = {}
        for stage in INTERMEDIATE_STAGES:
            for health in (Health.DECLINING, Health.RECOVERING):
                tag = f"{stage.name}_{health.name.lower()}"
                durations[(stage, health)] = DurationParams(
                    mode=float(values[f"mode_{tag}"]),
                    temperature=float(values[f"temp_{tag}"]),
                )
        return ModelParams(transitions=tr, durations=durations, duration_cap=duration_cap)


@dataclass(frozen=True)
class PatientTrajectory:
    """Ordered (stage, health, duration) segments plus the terminal outcome."""

    admission_day: int
    segments: tuple[tuple[Stage, Health, int], ...]
    terminal: Stage

    def __post_init__(self):
        if not 1 <= len(self.segments) <= MAX_SEGMENTS:
            raise ValueError(f"trajectory must have 1..{MAX_SEGMENTS} segments")
        if self.terminal not in TERMINAL_STAGES:
            raise ValueError(f"terminal must be R or T, got {self.terminal!r}")

    @property
    def total_stay(self) -> int:
        return sum(seg[2] for seg in self.segments)

    @property
    def terminal_day(self) -> int:
        """Day the R/T incident is recorded (day after the last occupied day)."""
        return self.admission_day + self.total_stay


class CensusSeries:
    """Per-day counts keyed by label over a contiguous day range.

    Intermediate-stage labels hold occupancy; R and T hold daily incidents.
    Counts are non-negative; raw/simulated series are integer-valued while
    smoothed observations may be real-valued.
    """

    def __init__(self, start_day: int, counts: Mapping[str, np.ndarray]):
        if not counts:
            raise ValueError("CensusSeries requires at least one label")
        self.start_day = int(start_day)
        self.counts: dict[str, np.ndarray] = {}
        length = None
        for label, values in counts.items():
            arr = np.asarray(values)
            if arr.ndim != 1:
                raise ValueError(f"label {label!r}: counts must be 1-D")
            if length is None:
                length = arr.shape[0]
            elif arr.shape[0] != length:
                raise ValueError("all labels must have equal length")
            if arr.size and arr.min() < 0:
                raise ValueError(f"label {label!r}: counts must be non-negative")
            self.counts[str(label)] = arr.copy()

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.counts.keys())

    @property
    def horizon(self) -> int:
        return len(next(iter(self.counts.values())))

    def __len__(self) -> int:
        return self.horizon

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.start_day, self.start_day + self.horizon)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.counts[label]

    def day_slice(self, first_day: int, last_day: int) -> "CensusSeries":
        """Counts restricted to days first_day..last_day inclusive."""
        i0 = first_day - self.start_day
        i1 = last_day - self.start_day + 1
        if i0 < 0 or i1 > self.horizon or i0 >= i1:
            raise ValueError(
                f"day range [{first_day}, {last_day}] outside series days "
                f"[{self.start_day}, {self.start_day + self.horizon - 1}]"
            )
        return CensusSeries(first_day, {k: v[i0:i1] for k, v in self.counts.items()})

    def to_matrix(self, labels) -> np.ndarray:
        """(horizon, len(labels)) matrix in the given label order."""
        return np.column_stack([np.asarray(self.counts[label], dtype=float) for label in labels])

    def __eq__(self, other) -> bool:
        if not isinstance(other, CensusSeries):
            return NotImplemented
        return (
            self.start_day == other.start_day
            and set(self.labels) == set(other.labels)
            and all(np.array_equal(self.counts[k], other.counts[k]) for k in self.counts)
        )

    def __repr__(self) -> str:
        return f"CensusSeries(start_day={self.start_day}, horizon={self.horizon}, labels={self.labels})"


def duration_pmf(dp: DurationParams, cap: int) -> np.ndarray:
    """Tempered truncated-Poisson pmf over durations 1..cap.

    Entry d is proportional to exp(log PoissonPmf(d | mode) / temperature);
    computed in log space and normalized with logsumexp for stability.
    """
    if int(cap) < 1 or cap != int(cap):
        raise ValueError(f"duration cap must be a positive integer, got {cap!r}")
    # DurationParams has validated mode/temperature already; re-check to
    # cover callers passing plain namespaces.
    if not (np.isfinite(dp.mode) and dp.mode > 0):
        raise ValueError(f"duration mode must be positive and finite, got {dp.mode!r}")
    if not (np.isfinite(dp.temperature) and dp.temperature > 0):
        raise ValueError(f"duration temperature must be positive and finite, got {dp.temperature!r}")
    d = np.arange(1, int(cap) + 1, dtype=float)
    log_poisson = d * math.log(dp.mode) - dp.mode - gammaln(d + 1.0)
    logits = log_poisson / dp.temperature
    return np.exp(logits - logsumexp(logits))


def sample_duration(pmf: np.ndarray, rng: np.random.Generator, size: int | None = None):
    """Draw duration(s) in 1..len(pmf) with the given probabilities."""
    cdf = np.cumsum(np.asarray(pmf, dtype=float))
    if abs(cdf[-1] - 1.0) > 1e-9:
        raise ValueError(f"pmf must sum to 1, got {cdf[-1]!r}")
    u = rng.random() if size is None else rng.random(size)
    idx = np.minimum(np.searchsorted(cdf, u), len(cdf) - 1)
    if size is None:
        return int(idx) + 1
    return idx.astype(np.int64) + 1


_NEXT_STAGE = {
    (Stage.G, Health.DECLINING): Stage.I,
    (Stage.I, Health.DECLINING): Stage.V,
    (Stage.V, Health.DECLINING): Stage.T,
    (Stage.V, Health.RECOVERING): Stage.I,
    (Stage.I, Health.RECOVERING): Stage.G,
    (Stage.G, Health.RECOVERING): Stage.R,
}


def next_stage(stage: Stage, health: Health) -> Stage:
    """Deterministic successor: declining order G,I,V,T; recovering order V,I,G,R."""
    if stage in TERMINAL_STAGES:
        raise ValueError(f"terminal stage {stage!r} has no successor")
    return _NEXT_STAGE[(Stage(stage), Health(health))]


def duration_tables(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """(pmfs, cdfs) arrays of shape (3, 2, cap) indexed by [stage, health]."""
    cap = params.duration_cap
    pmfs = np.empty((3, 2, cap))
    for stage in INTERMEDIATE_STAGES:
        for health in (Health.DECLINING, Health.RECOVERING):
            pmfs[int(stage), int(health)] = duration_pmf(params.durations[(stage, health)], cap)
    return pmfs, np.cumsum(pmfs, axis=2)


DurationHook = Callable[[Stage, Health, int, np.random.Generator], int]


def sample_trajectory(
    params: ModelParams,
    admission_day: int,
    start_stage: Stage,
    rng: np.random.Generator,
    duration_hook: DurationHook | None = None,
    _pmfs: np.ndarray | None = None,
) -> PatientTrajectory:
    """Simulate one patient forward from admission to a terminal outcome.

    The patient enters start_stage with health ~ Bernoulli(recover prob of
    that stage). After a declining segment at G or I the patient dies with
    the stage's early-death probability, else advances; a declining segment
    at V always ends in death. On arrival at a new stage while declining the
    patient switches to recovering with that stage's recovery probability.
    Recovering patients unwind deterministically to R. Sampled durations are
    passed through duration_hook when given.
    """
    start_stage = Stage(start_stage)
    if start_stage in TERMINAL_STAGES:
        raise ValueError("start_stage must be intermediate (G, I or V)")
    if _pmfs is None:
        _pmfs, _ = duration_tables(params)
    tr = params.transitions
    stage = start_stage
    health = Health.RECOVERING if rng.random() < tr.recover_prob(stage) else Health.DECLINING
    segments: list[tuple[Stage, Health, int]] = []
    while True:
        dur = sample_duration(_pmfs[int(stage), int(health)], rng)
        if duration_hook is not None:
            dur = int(duration_hook(stage, health, dur, rng))
            if dur < 1:
                raise ValueError(f"duration_hook returned {dur}; durations must be >= 1")
        segments.append((stage, health, dur))
        if health == Health.RECOVERING:
            nxt = next_stage(stage, health)
            if nxt == Stage.R:
                terminal = Stage.R
                break
            stage = nxt
        else:
            if stage == Stage.V or rng.random() < tr.death_prob(stage):
                terminal = Stage.T
                break
            stage = next_stage(stage, Health.DECLINING)
            if rng.random() < tr.recover_prob(stage):
                health = Health.RECOVERING
    return PatientTrajectory(admission_day=admission_day, segments=tuple(segments), terminal=terminal)


def round_half_away(x):
    """Round half away from zero, elementwise."""
    x = np.asarray(x, dtype=float)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def warm_start_plan(init_counts: Mapping, scale_r: float = 1.0) -> np.ndarray:
    """(WARMUP_DAYS, 3) planned warm-start admissions per day -5..-1 and stage.

    The standing population at day 0 is admitted over the five preceding
    days: per stage, counts are divided by scale_r (G and V first inflated by
    3% to cover pre-window exits), rounded half away from zero, and spread
    round-robin with the remainder going to the earliest days.
    """
    plan = np.zeros((WARMUP_DAYS, 3), dtype=np.int64)
    for stage, count in _normalize_init_counts(init_counts).items():
        inflation = WARMSTART_INFLATION if stage in (Stage.G, Stage.V) else 1.0
        n = int(round_half_away(count * inflation / scale_r))
        base, rem = divmod(n, WARMUP_DAYS)
        for i in range(WARMUP_DAYS):
            plan[i, int(stage)] = base + (1 if i < rem else 0)
    return plan


def _normalize_init_counts(init_counts: Mapping | None) -> dict[Stage, int]:
    out: dict[Stage, int] = {}
    for key, value in (init_counts or {}).items():
        stage = Stage[key] if isinstance(key, str) else Stage(key)
        if stage not in INTERMEDIATE_STAGES:
            raise ValueError(f"init_counts keys must be intermediate stages, got {stage!r}")
        if value < 0:
            raise ValueError(f"init count for {stage.name} must be non-negative, got {value!r}")
        out[stage] = int(value)
    return out


def _patient_starts(admits_per_day: np.ndarray, warm_plan: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flatten warm-start plan + daily admissions into per-patient start arrays.

    Returns (start_index, start_stage) with start_index counted from day -5.
    """
    days = []
    stages = []
    for i in range(WARMUP_DAYS):
        for stage in range(3):
            n = int(warm_plan[i, stage])
            if n:
                days.append(np.full(n, i, dtype=np.int64))
                stages.append(np.full(n, stage, dtype=np.int64))
    for t, n in enumerate(admits_per_day):
        if n:
            days.append(np.full(int(n), WARMUP_DAYS + 1 + t, dtype=np.int64))
            stages.append(np.zeros(int(n), dtype=np.int64))
    if not days:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(days), np.concatenate(stages)


def simulate_census(
    params: ModelParams,
    admissions,
    init_counts: Mapping | None = None,
    scale_r: float = 1.0,
    rng: np.random.Generator | None = None,
    duration_hook: DurationHook | None = None,
    admissions_hook=None,
    include_warmup: bool = False,
) -> CensusSeries:
    """Simulate daily census counts for admissions over days 1..len(admissions).

    Day 0 standing population (init_counts) is warm-started over days -5..-1;
    daily admissions enter G. With scale_r > 1 only 1/scale_r of patients are
    simulated and output counts are multiplied back (rounded half away from
    zero). Output labels: G/I/V occupancy, R/T daily incidents, over days
    1..H (or -5..H when include_warmup is set).

    admissions_hook(admissions, rng), when given, transforms the admissions
    vector before scaling (used for what-if scenarios). duration_hook
    transforms each sampled segment duration; a hook exposing
    `recovery_reduction`/`min_days` attributes runs inside the compiled
    kernel, any other callable falls back to a per-patient Python path.
    """
    if rng is None:
        rng = np.random.default_rng()
    if scale_r < 1.0:
        raise ValueError(f"scale_r must be >= 1, got {scale_r!r}")
    admissions = np.asarray(admissions)
    if admissions.ndim != 1:
        raise ValueError("admissions must be a 1-D vector")
    if admissions.size and admissions.min() < 0:
        raise ValueError("admissions must be non-negative")
    if admissions_hook is not None:
        admissions = np.asarray(admissions_hook(admissions, rng))
        if admissions.size and admissions.min() < 0:
            raise ValueError("admissions_hook produced negative admissions")

    horizon = len(admissions)
    n_days = WARMUP_DAYS + 1 + horizon  # days -5..H inclusive
    admits_per_day = round_half_away(np.asarray(admissions, dtype=float) / scale_r)
    warm_plan = warm_start_plan(init_counts, scale_r)
    start_days, start_stages = _patient_starts(admits_per_day, warm_plan)

    pmfs, cdfs = duration_tables(params)
    tr = params.transitions
    recover = np.array([tr.recover_G, tr.recover_I, tr.recover_V])
    death = np.array([tr.death_G, tr.death_I])

    reduction = 0.0
    min_days = 1
    python_hook = None
    if duration_hook is not None:
        if hasattr(duration_hook, "recovery_reduction") and hasattr(duration_hook, "min_days"):
            reduction = float(duration_hook.recovery_reduction)
            min_days = int(duration_hook.min_days)
        else:
            python_hook = duration_hook

    if python_hook is None:
        kernel = backends.get_kernel()
        seed = int(rng.integers(0, 2**31 - 1))
        occupancy, terminal = kernel(
            start_days, start_stages, cdfs, recover, death, n_days, seed, reduction, min_days
        )
    else:
        occupancy, terminal = _simulate_python(
            params, start_days, start_stages, n_days, rng, python_hook, pmfs
        )

    if scale_r != 1.0:
        occupancy = occupancy * scale_r
        terminal = terminal * scale_r
    occupancy = round_half_away(occupancy)
    terminal = round_half_away(terminal)

    counts = {
        "G": occupancy[:, 0],
        "I": occupancy[:, 1],
        "V": occupancy[:, 2],
        "R": terminal[:, 0],
        "T": terminal[:, 1],
    }
    series = CensusSeries(start_day=-WARMUP_DAYS, counts=counts)
    if include_warmup:
        return series
    return series.day_slice(1, horizon) if horizon else series


def _simulate_python(params, start_days, start_stages, n_days, rng, duration_hook, pmfs):
    """Reference per-patient path used when an arbitrary duration hook is given."""
    occupancy = np.zeros((n_days, 3))
    terminal = np.zeros((n_days, 2))
    for start, stage_idx in zip(start_days, start_stages):
        traj = sample_trajectory(
            params, int(start), Stage(int(stage_idx)), rng, duration_hook=duration_hook, _pmfs=pmfs
        )
        day = traj.admission_day
        for stage, _health, dur in traj.segments:
            lo = max(day, 0)
            hi = min(day + dur, n_days)
            if lo < hi:
                occupancy[lo:hi, int(stage)] += 1
            day += dur
        if day < n_days:
            terminal[day, 0 if traj.terminal == Stage.R else 1] += 1
    return occupancy, terminal


def aggregate_counts(series: CensusSeries, mapping) -> CensusSeries:
    """Sum stage series under new labels, e.g. ("InICU", ("I", "V"))."""
    counts = {}
    for label, sources in mapping:
        total = None
        for src in sources:
            name = src.name if isinstance(src, Stage) else str(src)
            if name not in series.counts:
                raise ValueError(f"aggregation source {name!r} not present in series")
            total = series.counts[name].copy() if total is None else total + series.counts[name]
        if total is None:
            raise ValueError(f"aggregation target {label!r} has no sources")
        counts[str(label)] = total
    return CensusSeries(series.start_day, counts)
