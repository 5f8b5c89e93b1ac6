"""Priors over all 17 parameters and random-walk proposal distributions.

Recovery/death probabilities carry Beta priors whose means come from public
severity tables (fraction reaching ICU / ventilation / death) by solving the
stage-flow equations in derive_transition_priors. Duration modes carry a
truncated-normal prior on [0, cap]; temperatures are log-normal via
log10(temperature) ~ Normal(0.5, 0.5^2). The sampler works on log10
temperature directly, so prior and proposal densities for temperature are
both evaluated on that coordinate and no Jacobian terms arise in the
acceptance ratio.

Densities and truncated-normal sampling are hand-rolled from the textbook
formulas: the sampler evaluates them hundreds of thousands of times and
scipy.stats call overhead would dominate the chain. Tests cross-check every
density against scipy at 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Health, INTERMEDIATE_STAGES, ModelParams, PARAM_NAMES, TransitionParams, DurationParams

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _norm_logpdf(x: float, mean: float, sd: float) -> float:
    z = (x - mean) / sd
    return -0.5 * z * z - math.log(sd) - _LOG_SQRT_2PI


def _norm_cdf(x: float, mean: float = 0.0, sd: float = 1.0) -> float:
    return 0.5 * (1.0 + math.erf((x - mean) / (sd * math.sqrt(2.0))))


def _beta_logpdf(x: float, a: float, b: float) -> float:
    if not 0.0 < x < 1.0:
        return -math.inf
    betaln = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - betaln


def _truncnorm_logpdf(x: float, mean: float, sd: float, lower: float, upper: float) -> float:
    if not lower <= x <= upper:
        return -math.inf
    mass = _norm_cdf(upper, mean, sd) - _norm_cdf(lower, mean, sd)
    return _norm_logpdf(x, mean, sd) - math.log(mass)


def _truncnorm_sample(mean: float, sd: float, lower: float, upper: float, rng: np.random.Generator) -> float:
    # Rejection from the untruncated normal; every use here keeps the mean
    # inside or at the boundary of [lower, upper], so acceptance is >= ~0.5.
    for _ in range(100000):
        x = rng.normal(mean, sd)
        if lower <= x <= upper:
            return x
    raise RuntimeError("truncated-normal rejection sampling failed to accept")


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"Beta shapes must be positive, got ({self.a!r}, {self.b!r})")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


@dataclass(frozen=True)
class TruncNormalPrior:
    mu: float = 8.0
    sigma: float = 3.0
    lower: float = 0.0
    upper: float = 22.0

    def __post_init__(self):
        if self.sigma <= 0 or self.upper <= self.lower:
            raise ValueError("truncated-normal prior needs sigma > 0 and upper > lower")


@dataclass(frozen=True)
class NormalPrior:
    mean: float = 0.5
    sd: float = 0.5

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("normal prior needs sd > 0")


@dataclass(frozen=True)
class PriorSpec:
    recover_G: BetaParams
    recover_I: BetaParams
    recover_V: BetaParams
    death_G: BetaParams
    death_I: BetaParams
    duration_mode: TruncNormalPrior
    log10_temperature: NormalPrior

    def beta_for(self, kind: str) -> BetaParams:
        try:
            value = getattr(self, kind)
        except AttributeError:
            raise ValueError(f"no Beta prior for parameter {kind!r}") from None
        if not isinstance(value, BetaParams):
            raise ValueError(f"no Beta prior for parameter {kind!r}")
        return value

    @property
    def duration_cap(self) -> int:
        return int(self.duration_mode.upper)


@dataclass(frozen=True)
class ProposalSpec:
    recover_concentration: float = 100.0
    death_concentration: float = 200.0
    mode_sd: float = 0.5  # variance 0.25 days^2
    mode_lower: float = 1.0
    mode_upper: float = 22.0
    log10_temp_sd: float = 0.1  # variance 0.01

    def __post_init__(self):
        for name in ("recover_concentration", "death_concentration", "mode_sd", "log10_temp_sd"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mode_upper <= self.mode_lower:
            raise ValueError("mode_upper must exceed mode_lower")


def derive_transition_priors(
    p_icu: float,
    p_vent: float,
    p_death: float,
    death_G_mean: float,
    death_I_mean: float,
    concentration_G: float = 100.0,
) -> dict[str, BetaParams]:
    """Beta priors for the five transition probabilities.

    Solves the stage-flow equations for the mean recovery probabilities given
    the fraction of admitted patients reaching ICU (p_icu), ventilation
    (p_vent) and death (p_death) under fixed early-death means:

        1 - p_icu  = rho_G + (1 - rho_G) * death_G
        p_vent     = p_icu * (1 - rho_I) * (1 - death_I)
        p_death    = p_vent * (1 - rho_V) + p_icu * (1 - rho_I) * death_I + death_G

    Beta shapes are (r*rho, r*(1-rho)) with r_G given, r_I = r_G*(1-rho_G),
    r_V = r_I*(1-rho_I) (uncertainty grows with smaller patient influx), and
    r = 200 for both death probabilities.
    """
    for name, v in (("p_icu", p_icu), ("p_vent", p_vent), ("p_death", p_death),
                    ("death_G_mean", death_G_mean), ("death_I_mean", death_I_mean)):
        if not 0.0 < v < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
    if p_vent >= p_icu:
        raise ValueError("p_vent must be smaller than p_icu")
    rho_G = (1.0 - p_icu - death_G_mean) / (1.0 - death_G_mean)
    rho_I = 1.0 - p_vent / (p_icu * (1.0 - death_I_mean))
    rho_V = 1.0 - (p_death - p_icu * (1.0 - rho_I) * death_I_mean - death_G_mean) / p_vent
    for name, rho in (("rho_G", rho_G), ("rho_I", rho_I), ("rho_V", rho_V)):
        if not 0.0 < rho < 1.0:
            raise ValueError(f"severity inputs give no valid solution: {name} = {rho!r} outside (0, 1)")
    r_G = concentration_G
    r_I = r_G * (1.0 - rho_G)
    r_V = r_I * (1.0 - rho_I)
    death_r = 200.0
    return {
        "recover_G": BetaParams(r_G * rho_G, r_G * (1.0 - rho_G)),
        "recover_I": BetaParams(r_I * rho_I, r_I * (1.0 - rho_I)),
        "recover_V": BetaParams(r_V * rho_V, r_V * (1.0 - rho_V)),
        "death_G": BetaParams(death_r * death_G_mean, death_r * (1.0 - death_G_mean)),
        "death_I": BetaParams(death_r * death_I_mean, death_r * (1.0 - death_I_mean)),
    }


def default_prior_spec(
    duration_cap: int = 22,
    p_icu: float = 0.343,
    p_vent: float = 0.204,
    p_death: float = 0.193,
    death_G_mean: float = 0.01,
    death_I_mean: float = 0.02,
    concentration_G: float = 100.0,
) -> PriorSpec:
    betas = derive_transition_priors(p_icu, p_vent, p_death, death_G_mean, death_I_mean, concentration_G)
    return PriorSpec(
        duration_mode=TruncNormalPrior(upper=float(duration_cap)),
        log10_temperature=NormalPrior(),
        **betas,
    )


def default_proposal_spec(duration_cap: int = 22) -> ProposalSpec:
    return ProposalSpec(mode_upper=float(duration_cap))


def sample_prior(spec: PriorSpec, rng: np.random.Generator, poisson_mode: bool = False) -> ModelParams:
    """Draw all 17 parameters independently from their priors.

    poisson_mode fixes every temperature at 1 (plain truncated-Poisson
    durations) instead of drawing it.
    """
    tr = TransitionParams(
        recover_G=_beta_draw(spec.recover_G, rng),
        recover_I=_beta_draw(spec.recover_I, rng),
        recover_V=_beta_draw(spec.recover_V, rng),
        death_G=_beta_draw(spec.death_G, rng),
        death_I=_beta_draw(spec.death_I, rng),
    )
    dm = spec.duration_mode
    durations = {}
    for stage in INTERMEDIATE_STAGES:
        for health in (Health.DECLINING, Health.RECOVERING):
            mode = _truncnorm_sample(dm.mu, dm.sigma, dm.lower, dm.upper, rng)
            while mode <= 0.0:  # the open lower endpoint has probability 0
                mode = _truncnorm_sample(dm.mu, dm.sigma, dm.lower, dm.upper, rng)
            temp = 1.0 if poisson_mode else 10.0 ** rng.normal(spec.log10_temperature.mean, spec.log10_temperature.sd)
            durations[(stage, health)] = DurationParams(mode=mode, temperature=temp)
    return ModelParams(transitions=tr, durations=durations, duration_cap=spec.duration_cap)


def _beta_draw(bp: BetaParams, rng: np.random.Generator) -> float:
    return float(rng.beta(bp.a, bp.b))


def prior_param_log_density(kind: str, value: float, spec: PriorSpec) -> float:
    """Log prior density of one chain coordinate.

    Temperatures are parameterized as log10(temperature); `value` must be on
    that scale for temp_* kinds.
    """
    if kind.startswith(("recover_", "death_")):
        bp = spec.beta_for(kind)
        return _beta_logpdf(value, bp.a, bp.b)
    if kind.startswith("mode_"):
        dm = spec.duration_mode
        return _truncnorm_logpdf(value, dm.mu, dm.sigma, dm.lower, dm.upper)
    if kind.startswith("temp_"):
        return _norm_logpdf(value, spec.log10_temperature.mean, spec.log10_temperature.sd)
    raise ValueError(f"unknown parameter kind {kind!r}")


def prior_log_density(params: ModelParams, spec: PriorSpec) -> float:
    """Joint log prior of a full parameter set (-inf outside support)."""
    values = params.to_dict()
    total = 0.0
    for kind in PARAM_NAMES:
        v = values[kind]
        if kind.startswith("temp_"):
            if v <= 0:
                return -math.inf
            v = math.log10(v)
        total += prior_param_log_density(kind, v, spec)
    return total


_BETA_MEAN_CLAMP = 1e-6


def _beta_proposal_shapes(kind: str, current: float, spec: ProposalSpec) -> tuple[float, float]:
    r = spec.recover_concentration if kind.startswith("recover_") else spec.death_concentration
    mean = min(max(current, _BETA_MEAN_CLAMP), 1.0 - _BETA_MEAN_CLAMP)
    return r * mean, r * (1.0 - mean)


def propose(kind: str, current: float, spec: ProposalSpec, rng: np.random.Generator) -> float:
    """Random-walk candidate for one coordinate (log10 scale for temp_*).

    Transition probabilities: Beta with mean at the current value (clamped
    away from {0,1}); duration modes: truncated normal on
    [mode_lower, mode_upper] centered at the current value; log10
    temperatures: symmetric normal step.
    """
    if kind.startswith(("recover_", "death_")):
        a, b = _beta_proposal_shapes(kind, current, spec)
        return float(rng.beta(a, b))
    if kind.startswith("mode_"):
        return _truncnorm_sample(current, spec.mode_sd, spec.mode_lower, spec.mode_upper, rng)
    if kind.startswith("temp_"):
        return float(rng.normal(current, spec.log10_temp_sd))
    raise ValueError(f"unknown parameter kind {kind!r}")


def proposal_log_density(kind: str, from_value: float, to_value: float, spec: ProposalSpec) -> float:
    """Log density of proposing `to_value` from `from_value`.

    Beta and truncated-normal proposals are asymmetric, so this appears in
    both orientations in the acceptance ratio; the log10-temperature step is
    symmetric.
    """
    if kind.startswith(("recover_", "death_")):
        a, b = _beta_proposal_shapes(kind, from_value, spec)
        return _beta_logpdf(to_value, a, b)
    if kind.startswith("mode_"):
        return _truncnorm_logpdf(to_value, from_value, spec.mode_sd, spec.mode_lower, spec.mode_upper)
    if kind.startswith("temp_"):
        return _norm_logpdf(to_value, from_value, spec.log10_temp_sd)
    raise ValueError(f"unknown parameter kind {kind!r}")
