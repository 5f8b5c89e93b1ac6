"""Command-line entry point.

Subcommands: simulate (synthetic ground-truth datasets), fit (ABC-MCMC
posterior), forecast (percentile bands), evaluate (MAE, coverage, baseline
comparison), whatif (counterfactual forecasts under configured
interventions). Exit codes: 0 success, 2 config error, 3 data error, 4
convergence failure, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import baselines, dataio, forecast, inference, interventions, priors, synthetic
from .dataio import ConfigError, DataError, RunConfig
from .inference import ConvergenceError

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4

# --fast shrinks the schedule for CI smoke runs.
FAST_BURN_IN_SWEEPS = 120
FAST_CHAINS = 2
FAST_SAMPLES = 25

COVERAGE_TARGETS = (50.0, 80.0, 95.0)


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return dataio.parse_config(args.config)
    return RunConfig()


def _shifted_admissions(dataset: dataio.Dataset, shift: int) -> dataio.Dataset:
    """Reassign reported admissions by `shift` days (positive = each value
    belongs `shift` days earlier, the usual previous-day-report fix);
    edge days repeat the nearest value."""
    a = dataset.admissions
    if shift > 0:
        moved = np.concatenate([a[shift:], np.repeat(a[-1], shift)])
    else:
        moved = np.concatenate([np.repeat(a[0], -shift), a[:shift]])
    return dataio.Dataset(
        dates=list(dataset.dates),
        admissions=moved.astype(np.int64),
        observed=dataset.observed,
        train_end_index=dataset.train_end_index,
    )


def _load_dataset(args, config: RunConfig) -> dataio.Dataset:
    dataset = dataio.load_counts_csv(
        args.dataset, column_map=config.column_map, train_days=config.train_days
    )
    if config.admissions_day_shift:
        dataset = _shifted_admissions(dataset, config.admissions_day_shift)
    return dataset


def _distance_weights(config: RunConfig, labels) -> inference.DistanceWeights:
    if config.stage_weights is None:
        return inference.DistanceWeights.for_labels(labels)
    missing = [l for l in labels if l not in config.stage_weights]
    if missing:
        raise ConfigError(f"[distance] missing weight_<label> for labels {missing}")
    raw = {l: float(config.stage_weights[l]) for l in labels}
    mean = sum(raw.values()) / len(raw)  # rescale so weights average to 1
    return inference.DistanceWeights(stage_weights={l: v / mean for l, v in raw.items()})


def _prior_spec(config: RunConfig) -> priors.PriorSpec:
    return priors.default_prior_spec(
        duration_cap=config.duration_cap,
        p_icu=config.p_icu,
        p_vent=config.p_vent,
        p_death=config.p_death,
        death_G_mean=config.death_G_mean,
        death_I_mean=config.death_I_mean,
        concentration_G=config.concentration_G,
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    config = _load_config(args)
    truth = synthetic.default_truth_params(config.duration_cap)
    dataset = synthetic.synthetic_dataset(
        truth,
        multiplier=args.multiplier,
        n_days=args.days,
        train_days=args.train_days,
        seed=args.seed,
    )
    out = _out_dir(args)
    dataio.write_dataset_csv(dataset, out / "counts.csv")
    dataio.write_samples_csv([truth], out / "truth_params.csv")
    # The CSV alone cannot carry the split; emit a config for the later stages.
    (out / "run.ini").write_text(f"[data]\ntrain_days = {dataset.train_end_index}\n")
    print(
        f"wrote {out / 'counts.csv'}: {dataset.horizon} days at admissions multiplier "
        f"{args.multiplier} ({dataset.train_end_index} train / {dataset.n_test_days} test)"
    )
    print(f"wrote {out / 'truth_params.csv'} and {out / 'run.ini'}")
    return EXIT_OK


def _write_chain_summary(results, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "final_eps", "min_burnin_eps", "best_distance", "acceptance_rate", "n_samples"])
        for r in results:
            writer.writerow(
                [r.seed, repr(r.final_eps), repr(r.min_burnin_eps),
                 "" if r.d_best is None else repr(r.d_best),
                 repr(r.acceptance_rate), len(r.samples)]
            )


def cmd_fit(args) -> int:
    config = _load_config(args)
    dataset = _load_dataset(args, config)
    if config.smoothing:
        dataset = dataio.smooth_dataset(dataset, config.smoothing_window)
    t_end = dataset.train_end_index
    sim_ctx = inference.SimulationContext(
        admissions=dataset.fit_admissions()[:t_end],
        init_counts=dataset.init_counts(),
        scale_r=config.scale_r,
        stage_mapping=dataset.stage_mapping,
    )
    schedule = inference.EpsilonSchedule(
        eps_init=config.eps_init,
        gamma=config.gamma,
        bump=config.bump,
        bump_interval=config.bump_interval,
        burn_in_sweeps=FAST_BURN_IN_SWEEPS if args.fast else config.burn_in_sweeps,
        sampling_raise=config.sampling_raise,
    )
    n_chains = FAST_CHAINS if args.fast else config.n_chains
    n_samples = FAST_SAMPLES if args.fast else config.samples_per_chain
    results = inference.run_chains(
        dataset.train_observed(),
        sim_ctx,
        _prior_spec(config),
        priors.default_proposal_spec(config.duration_cap),
        _distance_weights(config, dataset.labels),
        schedule,
        n_chains=n_chains,
        n_samples=n_samples,
        thin=config.thin,
        base_seed=args.seed,
        threads=args.threads,
        poisson_mode=config.poisson_mode,
        collect_diagnostics=False,
    )
    for r in results:
        print(
            f"chain seed {r.seed}: final eps {r.final_eps:.4f}, best distance "
            f"{float('nan') if r.d_best is None else r.d_best:.4f}, "
            f"acceptance {100 * r.acceptance_rate:.1f}%, {len(r.samples)} samples"
        )
    samples = inference.ensemble(results, config.convergence_filter)
    out = _out_dir(args)
    dataio.write_samples_csv(samples, out / "samples.csv")
    _write_chain_summary(results, out / "chains.csv")
    print(f"wrote {out / 'samples.csv'} ({len(samples)} pooled samples from {n_chains} chains)")
    return EXIT_OK


def _forecasts(args, config, dataset, rng, duration_hook=None, admissions_hook=None):
    samples = dataio.read_samples_csv(args.samples, config.duration_cap)
    runs = forecast.forecast_counts(
        samples,
        dataset.fit_admissions(),
        init_counts=dataset.init_counts(),
        scale_r=config.scale_r,
        rng=rng,
        stage_mapping=dataset.stage_mapping,
        duration_hook=duration_hook,
        admissions_hook=admissions_hook,
    )
    return samples, runs


def cmd_forecast(args) -> int:
    config = _load_config(args)
    dataset = _load_dataset(args, config)
    rng = np.random.default_rng(args.seed)
    _, runs = _forecasts(args, config, dataset, rng)
    summary = forecast.summarize_percentiles(runs)
    out = _out_dir(args)
    dataio.write_forecast_summary(summary, out / "forecast.csv", out / "forecast.json", dates=dataset.dates[1:])
    print(f"wrote {out / 'forecast.csv'} ({len(runs)} simulations, days 1..{dataset.horizon})")
    return EXIT_OK


def _baseline_mae_rows(dataset: dataio.Dataset):
    """(label, median MAE, regression MAE) on the test window."""
    t_end = dataset.train_end_index
    train_days_idx = np.arange(1, t_end + 1)
    test_days_idx = np.arange(t_end + 1, dataset.horizon + 1)
    admissions = dataset.fit_admissions()
    x_train = baselines.build_features(train_days_idx, admissions, baselines.LrFeatureMode.DAY_PLUS_ADMISSIONS)
    x_test = baselines.build_features(test_days_idx, admissions, baselines.LrFeatureMode.DAY_PLUS_ADMISSIONS)
    rows = []
    test = dataset.test_observed()
    train = dataset.train_observed()
    for label in dataset.labels:
        truth = np.asarray(test[label], dtype=float)
        med = baselines.median_forecast(train[label], dataset.n_test_days)
        posterior = baselines.bayes_lr_fit(x_train, np.asarray(train[label], dtype=float))
        lr_mean = np.maximum(baselines.bayes_lr_predictive_mean(posterior, x_test), 0.0)
        rows.append((label, forecast.mae(med, truth), forecast.mae(lr_mean, truth)))
    return rows


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    dataset = _load_dataset(args, config)
    rng = np.random.default_rng(args.seed)
    samples, runs = _forecasts(args, config, dataset, rng)
    out = _out_dir(args)
    summary = forecast.summarize_percentiles(runs)
    dataio.write_forecast_summary(summary, out / "forecast.csv", out / "forecast.json", dates=dataset.dates[1:])

    test = dataset.test_observed()
    report = forecast.mae_with_batches(
        samples,
        dataset.fit_admissions(),
        test,
        init_counts=dataset.init_counts(),
        scale_r=config.scale_r,
        rng=rng,
        stage_mapping=dataset.stage_mapping,
    )
    dataio.write_mae_report(report, out / "mae.csv", out / "mae.json")
    for label in report.labels:
        print(
            f"{label}: test MAE {report.mean[label]:.2f} "
            f"[{report.lower[label]:.2f}, {report.upper[label]:.2f}]"
        )

    cov = {target: forecast.coverage(runs, test, target) for target in COVERAGE_TARGETS}
    dataio.write_coverage_csv(cov, out / "coverage.csv")
    for target, per_label in cov.items():
        joined = ", ".join(f"{label} {value:.0f}%" for label, value in per_label.items())
        print(f"coverage at {target:.0f}%: {joined}")

    with (out / "baseline_mae.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "median_mae", "bayes_lr_mae"])
        for label, med_mae, lr_mae in _baseline_mae_rows(dataset):
            writer.writerow([label, repr(med_mae), repr(lr_mae)])
    print(f"wrote {out / 'mae.csv'}, {out / 'coverage.csv'}, {out / 'baseline_mae.csv'}")
    return EXIT_OK


def cmd_whatif(args) -> int:
    config = _load_config(args)
    if config.admissions_schedule is None and config.recovery_policy is None:
        raise ConfigError(
            "whatif needs an [admissions_schedule] or [recovery_policy] config section"
        )
    dataset = _load_dataset(args, config)
    admissions_hook = None
    if config.admissions_schedule is not None:
        admissions_hook = interventions.admissions_schedule_hook(config.admissions_schedule)
    duration_hook = None
    if config.recovery_policy is not None:
        duration_hook = interventions.recovery_duration_hook(config.recovery_policy)

    out = _out_dir(args)
    # Same seed for both arms: paired simulations sharpen the difference.
    _, base_runs = _forecasts(args, config, dataset, np.random.default_rng(args.seed))
    _, scenario_runs = _forecasts(
        args, config, dataset, np.random.default_rng(args.seed),
        duration_hook=duration_hook, admissions_hook=admissions_hook,
    )
    dates = dataset.dates[1:]
    dataio.write_forecast_summary(
        forecast.summarize_percentiles(base_runs),
        out / "forecast_baseline.csv", out / "forecast_baseline.json", dates=dates,
    )
    dataio.write_forecast_summary(
        forecast.summarize_percentiles(scenario_runs),
        out / "forecast_scenario.csv", out / "forecast_scenario.json", dates=dates,
    )
    parts = []
    if config.admissions_schedule is not None:
        s = config.admissions_schedule
        parts.append(f"admissions -{100 * s.final_reduction:.0f}% over {s.ramp_days}d from day {s.start_day}")
    if config.recovery_policy is not None:
        p = config.recovery_policy
        parts.append(f"recovering stays -{100 * p.reduction_fraction:.0f}% (floor {p.min_days}d)")
    print(f"scenario: {'; '.join(parts)}")
    print(f"wrote {out / 'forecast_baseline.csv'} and {out / 'forecast_scenario.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wardflow",
        description="Hospital-census trajectory model: simulate, fit, forecast, evaluate, what-if.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--config", help="INI run configuration")
    base.add_argument("--out", default="wardflow_out", help="output directory")
    base.add_argument("--seed", type=int, default=0, help="base random seed")

    p = sub.add_parser("simulate", parents=[base], help="generate a synthetic ground-truth dataset")
    p.add_argument("--multiplier", type=int, choices=(1, 3, 6, 9), default=1,
                   help="admissions regime intensity (9 is region-scale)")
    p.add_argument("--days", type=int, default=92, help="days after the day-0 snapshot")
    p.add_argument("--train-days", type=int, default=76, help="training days (rest is test)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[base], help="fit the posterior with ABC-MCMC chains")
    p.add_argument("--dataset", required=True, help="counts CSV")
    p.add_argument("--threads", type=int, default=None, help="parallel chains (default: all cores)")
    p.add_argument("--fast", action="store_true", help="tiny schedule for smoke tests")
    p.set_defaults(func=cmd_fit)

    for name, func, help_text in (
        ("forecast", cmd_forecast, "simulate forecasts from posterior samples"),
        ("evaluate", cmd_evaluate, "score forecasts: MAE, coverage, baselines"),
        ("whatif", cmd_whatif, "counterfactual forecasts under configured interventions"),
    ):
        p = sub.add_parser(name, parents=[base], help=help_text)
        p.add_argument("--dataset", required=True, help="counts CSV")
        p.add_argument("--samples", required=True, help="posterior samples CSV")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())
