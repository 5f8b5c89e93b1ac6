"""ABC-MCMC sampler: distance, tolerance schedule, per-parameter sweeps,
chains and ensembling.

Each proposal changes one coordinate, simulates a full census under the
candidate parameters and accepts in two stages: the weighted distance to the
training counts must fall within the current tolerance eps, then a
Metropolis-Hastings draw with the prior ratio and the (asymmetric) proposal
density ratio. During burn-in eps decays exponentially after every proposal,
floored at the last accepted distance and bumped upward at fixed intervals;
for the sampling phase eps is frozen at the best burn-in value plus a small
raise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import priors as priors_mod
from .model import (
    CensusSeries,
    ModelParams,
    PARAM_NAMES,
    aggregate_counts,
    simulate_census,
)
from .priors import PriorSpec, ProposalSpec, prior_param_log_density, proposal_log_density, propose, sample_prior


class ConvergenceError(RuntimeError):
    """No chain satisfied the ensemble convergence filter."""


# ---------------------------------------------------------------------------
# chain coordinates

_TEMP_INDICES = tuple(i for i, name in enumerate(PARAM_NAMES) if name.startswith("temp_"))


def params_to_chain_vector(params: ModelParams) -> np.ndarray:
    """Flat 17-vector in PARAM_NAMES order, temperatures as log10."""
    values = params.to_dict()
    vec = np.array([values[name] for name in PARAM_NAMES], dtype=float)
    for i in _TEMP_INDICES:
        vec[i] = math.log10(vec[i])
    return vec


def chain_vector_to_params(vec: np.ndarray, duration_cap: int) -> ModelParams:
    values = dict(zip(PARAM_NAMES, (float(v) for v in vec)))
    for name in PARAM_NAMES:
        if name.startswith("temp_"):
            values[name] = 10.0 ** values[name]
    return ModelParams.from_dict(values, duration_cap=duration_cap)


# ---------------------------------------------------------------------------
# distance

# Observed-label weight presets; each set averages to 1 so the distance keeps
# its [0, 1] bound. Later stages (farther from admissions) weigh more.
STAGE_WEIGHT_PRESETS: dict[frozenset, dict[str, float]] = {
    frozenset({"G", "I", "V", "T"}): {"G": 0.7, "I": 0.9, "V": 1.1, "T": 1.3},
    frozenset({"G", "I+V", "T"}): {"G": 0.8, "I+V": 1.0, "T": 1.2},
    frozenset({"G+I+V", "T"}): {"G+I+V": 0.8, "T": 1.2},
    frozenset({"R", "G+I+V", "T"}): {"R": 0.8, "G+I+V": 1.0, "T": 1.2},
    frozenset({"R", "G", "I", "V", "T"}): {"G": 0.8, "R": 0.9, "I": 1.0, "V": 1.1, "T": 1.2},
}


def default_stage_weights(labels: Sequence[str]) -> dict[str, float]:
    """Preset weights for a known label set, else uniform 1.0."""
    preset = STAGE_WEIGHT_PRESETS.get(frozenset(labels))
    if preset is not None:
        return dict(preset)
    return {label: 1.0 for label in labels}


@dataclass(frozen=True)
class DistanceWeights:
    """Per-label weights (mean 1) and linear time-weight endpoints (mean 1)."""

    stage_weights: Mapping[str, float]
    time_endpoints: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        if not self.stage_weights:
            raise ValueError("stage_weights must not be empty")
        values = np.array(list(self.stage_weights.values()), dtype=float)
        if values.min() <= 0:
            raise ValueError("stage weights must be positive")
        if abs(values.mean() - 1.0) > 1e-9:
            raise ValueError(f"stage weights must average to 1, got {values.mean()!r}")
        lo, hi = self.time_endpoints
        if abs((lo + hi) / 2.0 - 1.0) > 1e-9:
            raise ValueError(f"time-weight endpoints must average to 1, got {self.time_endpoints!r}")

    def time_weights(self, horizon: int) -> np.ndarray:
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if horizon == 1:
            return np.ones(1)
        return np.linspace(self.time_endpoints[0], self.time_endpoints[1], horizon)

    @staticmethod
    def for_labels(labels: Sequence[str]) -> "DistanceWeights":
        return DistanceWeights(stage_weights=default_stage_weights(labels))


def distance(observed: CensusSeries, simulated: CensusSeries, weights: DistanceWeights) -> float:
    """Weighted mean relative absolute error in [0, 1].

    (1/(K*T)) * sum_t sum_k v_t * u_k * |y - y_sim| / max(y, y_sim), where a
    0/0 term (both counts zero) contributes 0.
    """
    labels = tuple(weights.stage_weights.keys())
    missing = [l for l in labels if l not in observed.counts or l not in simulated.counts]
    if missing:
        raise ValueError(f"labels {missing} missing from series")
    if observed.horizon != simulated.horizon:
        raise ValueError(
            f"series lengths differ: {observed.horizon} vs {simulated.horizon}"
        )
    y = observed.to_matrix(labels)
    y_sim = simulated.to_matrix(labels)
    denom = np.maximum(y, y_sim)
    ratio = np.zeros_like(denom)
    np.divide(np.abs(y - y_sim), denom, out=ratio, where=denom > 0)
    v = weights.time_weights(observed.horizon)[:, None]
    u = np.array([weights.stage_weights[l] for l in labels])[None, :]
    return float((v * u * ratio).mean())


# ---------------------------------------------------------------------------
# tolerance schedule

SWEEP_SIZE = len(PARAM_NAMES)


@dataclass
class EpsilonSchedule:
    """Burn-in annealing and sampling-phase tolerance settings.

    gamma defaults to the decay taking eps from eps_init to ~0.05 over the
    burn-in's single-parameter proposals if no floor interferes;
    bump_interval defaults to a quarter of the burn-in's proposals (three
    mid-run bumps).
    """

    eps_init: float = 0.7
    gamma: float | None = None
    bump: float = 0.05
    bump_interval: int | None = None
    burn_in_sweeps: int = 24000
    sampling_raise: float = 0.15

    def __post_init__(self):
        if not 0.0 < self.eps_init <= 1.0:
            raise ValueError(f"eps_init must lie in (0, 1], got {self.eps_init!r}")
        if self.burn_in_sweeps < 1:
            raise ValueError("burn_in_sweeps must be >= 1")
        if self.bump < 0:
            raise ValueError("bump must be >= 0")
        if self.sampling_raise < 0:
            raise ValueError("sampling_raise must be >= 0")
        total_proposals = self.burn_in_sweeps * SWEEP_SIZE
        if self.gamma is None:
            self.gamma = (0.05 / self.eps_init) ** (1.0 / total_proposals)
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        if self.bump_interval is None:
            self.bump_interval = max(1, total_proposals // 4)
        if self.bump_interval < 1:
            raise ValueError("bump_interval must be >= 1")


BURN_IN = "burn-in"
SAMPLING = "sampling"


@dataclass
class ChainState:
    """Mutable state of one ABC-MCMC chain."""

    vector: np.ndarray
    duration_cap: int
    eps: float
    rng: np.random.Generator
    d_best: float | None = None
    phase: str = BURN_IN
    proposals_done: int = 0
    n_accepted: int = 0
    min_burnin_eps: float | None = None
    samples: list = field(default_factory=list)

    def __post_init__(self):
        if self.min_burnin_eps is None:
            self.min_burnin_eps = self.eps

    @property
    def params(self) -> ModelParams:
        return chain_vector_to_params(self.vector, self.duration_cap)


def epsilon_step(schedule: EpsilonSchedule, state: ChainState) -> float:
    """One burn-in tolerance update (call after each evaluated proposal).

    Decays eps by gamma, floors it at the last accepted distance, adds the
    bump at every bump_interval-th proposal, and clamps to the distance's
    upper bound of 1.
    """
    eps = schedule.gamma * state.eps
    if state.d_best is not None:
        eps = max(eps, state.d_best)
    if state.proposals_done % schedule.bump_interval == 0:
        eps += schedule.bump
    return min(eps, 1.0)


# ---------------------------------------------------------------------------
# simulation context

@dataclass(frozen=True)
class SimulationContext:
    """Everything needed to simulate counts comparable to the observations."""

    admissions: np.ndarray
    init_counts: Mapping | None = None
    scale_r: float = 1.0
    stage_mapping: Sequence[tuple[str, Sequence[str]]] | None = None

    def simulate(self, params: ModelParams, rng: np.random.Generator) -> CensusSeries:
        series = simulate_census(
            params,
            self.admissions,
            init_counts=self.init_counts,
            scale_r=self.scale_r,
            rng=rng,
        )
        if self.stage_mapping is not None:
            series = aggregate_counts(series, self.stage_mapping)
        return series


@dataclass
class Diagnostics:
    """Per-proposal trace (grows by one row per evaluated proposal)."""

    proposal: list = field(default_factory=list)
    sweep: list = field(default_factory=list)
    parameter: list = field(default_factory=list)
    distance: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    accepted: list = field(default_factory=list)

    def record(self, proposal, sweep, parameter, dist, eps, accepted):
        self.proposal.append(proposal)
        self.sweep.append(sweep)
        self.parameter.append(parameter)
        self.distance.append(dist)
        self.eps.append(eps)
        self.accepted.append(accepted)


def _acceptance_log_ratio(
    kind: str, current: float, candidate: float, prior_spec: PriorSpec, proposal_spec: ProposalSpec
) -> float:
    """log alpha for a single-coordinate move; the other 16 coordinates'
    prior terms cancel because they are independent and unchanged."""
    prior_cand = prior_param_log_density(kind, candidate, prior_spec)
    if prior_cand == -math.inf:
        return -math.inf
    return (
        prior_cand
        - prior_param_log_density(kind, current, prior_spec)
        + proposal_log_density(kind, candidate, current, proposal_spec)
        - proposal_log_density(kind, current, candidate, proposal_spec)
    )


def sweep_param_order(poisson_mode: bool = False) -> tuple[str, ...]:
    if poisson_mode:
        return tuple(n for n in PARAM_NAMES if not n.startswith("temp_"))
    return PARAM_NAMES


def abc_sweep(
    state: ChainState,
    y_train: CensusSeries,
    sim_ctx: SimulationContext,
    prior_spec: PriorSpec,
    proposal_spec: ProposalSpec,
    weights: DistanceWeights,
    schedule: EpsilonSchedule,
    diagnostics: Diagnostics | None = None,
    sweep_index: int = 0,
    poisson_mode: bool = False,
) -> ChainState:
    """Visit every parameter once: propose, simulate, two-stage accept."""
    names = sweep_param_order(poisson_mode)
    for kind in names:
        idx = PARAM_NAMES.index(kind)
        current = state.vector[idx]
        candidate = propose(kind, current, proposal_spec, state.rng)
        accepted = False
        dist = math.nan
        try:
            cand_vec = state.vector.copy()
            cand_vec[idx] = candidate
            cand_params = chain_vector_to_params(cand_vec, state.duration_cap)
            simulated = sim_ctx.simulate(cand_params, state.rng)
            dist = distance(y_train, simulated, weights)
        except (ValueError, FloatingPointError):
            dist = math.nan  # failed simulation: reject and keep going
        if not math.isnan(dist) and dist <= state.eps:
            log_alpha = _acceptance_log_ratio(kind, current, candidate, prior_spec, proposal_spec)
            if log_alpha >= 0.0 or state.rng.random() < math.exp(log_alpha):
                state.vector = cand_vec
                state.d_best = dist  # floor rule tracks the LAST accepted distance
                state.n_accepted += 1
                accepted = True
        state.proposals_done += 1
        if state.phase == BURN_IN:
            state.eps = epsilon_step(schedule, state)
            state.min_burnin_eps = min(state.min_burnin_eps, state.eps)
        if diagnostics is not None:
            diagnostics.record(state.proposals_done, sweep_index, kind, dist, state.eps, accepted)
    return state


@dataclass
class ChainResult:
    samples: list[ModelParams]
    final_eps: float
    min_burnin_eps: float
    d_best: float | None
    seed: int
    acceptance_rate: float
    diagnostics: Diagnostics | None = None


def run_chain(
    y_train: CensusSeries,
    sim_ctx: SimulationContext,
    prior_spec: PriorSpec,
    proposal_spec: ProposalSpec,
    weights: DistanceWeights,
    schedule: EpsilonSchedule,
    n_samples: int = 200,
    thin: int = 1,
    seed: int = 0,
    init_params: ModelParams | None = None,
    poisson_mode: bool = False,
    collect_diagnostics: bool = True,
) -> ChainResult:
    """Burn in, freeze the tolerance, then collect n_samples thinned samples."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    rng = np.random.default_rng(seed)
    if init_params is None:
        init_params = sample_prior(prior_spec, rng, poisson_mode=poisson_mode)
    state = ChainState(
        vector=params_to_chain_vector(init_params),
        duration_cap=init_params.duration_cap,
        eps=schedule.eps_init,
        rng=rng,
    )
    diagnostics = Diagnostics() if collect_diagnostics else None
    sweep = 0
    for _ in range(schedule.burn_in_sweeps):
        abc_sweep(
            state, y_train, sim_ctx, prior_spec, proposal_spec, weights, schedule,
            diagnostics=diagnostics, sweep_index=sweep, poisson_mode=poisson_mode,
        )
        sweep += 1
    state.phase = SAMPLING
    state.eps = min(1.0, state.min_burnin_eps + schedule.sampling_raise)
    sampling_sweeps = 0
    while len(state.samples) < n_samples:
        abc_sweep(
            state, y_train, sim_ctx, prior_spec, proposal_spec, weights, schedule,
            diagnostics=diagnostics, sweep_index=sweep, poisson_mode=poisson_mode,
        )
        sweep += 1
        sampling_sweeps += 1
        if sampling_sweeps % thin == 0:
            state.samples.append(state.params)
    acceptance = state.n_accepted / max(1, state.proposals_done)
    return ChainResult(
        samples=list(state.samples),
        final_eps=state.eps,
        min_burnin_eps=state.min_burnin_eps,
        d_best=state.d_best,
        seed=seed,
        acceptance_rate=acceptance,
        diagnostics=diagnostics,
    )


def _chain_worker(args):
    kwargs, seed = args
    return run_chain(seed=seed, **kwargs)


def run_chains(
    y_train: CensusSeries,
    sim_ctx: SimulationContext,
    prior_spec: PriorSpec,
    proposal_spec: ProposalSpec,
    weights: DistanceWeights,
    schedule: EpsilonSchedule,
    n_chains: int = 10,
    n_samples: int = 200,
    thin: int = 1,
    base_seed: int = 0,
    threads: int | None = None,
    poisson_mode: bool = False,
    collect_diagnostics: bool = True,
) -> list[ChainResult]:
    """Run independent chains (seed = base_seed + index), in parallel when
    threads allows; results come back in chain order regardless."""
    kwargs = dict(
        y_train=y_train,
        sim_ctx=sim_ctx,
        prior_spec=prior_spec,
        proposal_spec=proposal_spec,
        weights=weights,
        schedule=schedule,
        n_samples=n_samples,
        thin=thin,
        poisson_mode=poisson_mode,
        collect_diagnostics=collect_diagnostics,
    )
    seeds = [base_seed + i for i in range(n_chains)]
    if threads is None:
        import os

        threads = os.cpu_count() or 1
    threads = max(1, min(threads, n_chains))
    if threads == 1 or n_chains == 1:
        return [run_chain(seed=s, **kwargs) for s in seeds]
    import multiprocessing as mp

    ctx = mp.get_context("fork")
    with ctx.Pool(processes=threads) as pool:
        return pool.map(_chain_worker, [(kwargs, s) for s in seeds])


def ensemble(chain_results: Sequence[ChainResult], convergence_filter: float = 0.05) -> list[ModelParams]:
    """Pool samples from chains whose final tolerance is within
    convergence_filter of the best chain's."""
    if not chain_results:
        raise ConvergenceError("no chains to ensemble")
    best = min(r.final_eps for r in chain_results)
    if best >= 1.0:
        # eps 1 accepts every simulation, so the samples are prior-like.
        raise ConvergenceError(
            "no chain annealed below the trivial tolerance 1.0: "
            + ", ".join(f"seed {r.seed}: eps {r.final_eps:.4f}" for r in chain_results)
        )
    kept = [r for r in chain_results if r.final_eps <= best + convergence_filter]
    pooled: list[ModelParams] = []
    for r in kept:
        pooled.extend(r.samples)
    return pooled
