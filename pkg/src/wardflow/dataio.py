"""CSV ingestion, smoothing, run configuration, and output serialization.

Input counts arrive as `date,admissions,<label columns...>` CSVs; labels may
be derived from raw fields with +/- expressions (e.g. hospitalized minus
ICU). The run configuration is a plain-text INI file; unknown keys are
rejected and every value is range-checked. Floats are serialized with repr
(shortest exact representation), so write -> read round-trips are
bit-identical.
"""

from __future__ import annotations

import configparser
import csv
import datetime
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .forecast import ForecastSummary, MaeReport
from .interventions import AdmissionsSchedule, RecoveryDurationPolicy
from .model import CensusSeries, ModelParams, PARAM_NAMES

STAGE_NAMES = ("G", "I", "V", "R", "T")


class ConfigError(ValueError):
    """Invalid or out-of-range run configuration."""


class DataError(ValueError):
    """Malformed input data file."""


def stage_mapping_for_labels(labels: Sequence[str]) -> list[tuple[str, tuple[str, ...]]]:
    """Aggregation spec turning raw simulated stages into observed labels.

    Labels must be single stages or +-joins of stages (e.g. "I+V",
    "G+I+V").
    """
    mapping = []
    for label in labels:
        parts = tuple(p.strip() for p in str(label).split("+"))
        bad = [p for p in parts if p not in STAGE_NAMES]
        if bad:
            raise ConfigError(
                f"label {label!r} is not composed of stages {STAGE_NAMES}; unknown parts: {bad}"
            )
        mapping.append((str(label), parts))
    return mapping


@dataclass
class Dataset:
    """Dated admissions and observed counts with a train/test split.

    Row i is day i. Day 0 (the first row) is the standing-population
    snapshot used to initialize simulations, not a fitting target; training
    covers days 1..train_end_index and testing the remaining days. Day-0
    admissions are ignored — patients admitted that day are already inside
    the day-0 census.
    """

    dates: list[datetime.date]
    admissions: np.ndarray
    observed: CensusSeries  # start_day = 0
    train_end_index: int

    def __post_init__(self):
        n = len(self.dates)
        if len(self.admissions) != n or self.observed.horizon != n:
            raise DataError("dates, admissions and observed series must share length")
        if self.observed.start_day != 0:
            raise DataError("observed series must start at day 0")
        if not 1 <= self.train_end_index <= n - 1:
            raise DataError(
                f"train_end_index {self.train_end_index} outside 1..{n - 1}"
            )

    @property
    def horizon(self) -> int:
        """Last simulable day (rows minus the day-0 snapshot)."""
        return len(self.dates) - 1

    @property
    def labels(self) -> tuple[str, ...]:
        return self.observed.labels

    @property
    def stage_mapping(self) -> list[tuple[str, tuple[str, ...]]]:
        return stage_mapping_for_labels(self.labels)

    @property
    def n_test_days(self) -> int:
        return self.horizon - self.train_end_index

    def init_counts(self) -> dict[str, int]:
        """Standing {G, I, V} population read off the day-0 row.

        Aggregate labels split their count evenly over member intermediate
        stages, remainder going to the earliest members.
        """
        out: dict[str, int] = {}
        for label, parts in self.stage_mapping:
            members = [p for p in parts if p in ("G", "I", "V")]
            if not members:
                continue
            total = int(round(float(self.observed[label][0])))
            share, extra = divmod(total, len(members))
            for j, stage in enumerate(members):
                out[stage] = out.get(stage, 0) + share + (1 if j < extra else 0)
        return {k: v for k, v in out.items() if v > 0}

    def fit_admissions(self) -> np.ndarray:
        """Admissions over days 1..horizon (the simulable window)."""
        return self.admissions[1:]

    def train_observed(self) -> CensusSeries:
        return self.observed.day_slice(1, self.train_end_index)

    def test_observed(self) -> CensusSeries:
        if self.n_test_days < 1:
            raise DataError("dataset has no test days")
        return self.observed.day_slice(self.train_end_index + 1, self.horizon)


_EXPR_TOKEN = re.compile(r"\s*([+-]?)\s*([A-Za-z_][A-Za-z0-9_]*)\s*")


def _parse_expression(expr: str) -> list[tuple[int, str]]:
    """Parse a ±-chain of field names into (sign, field) terms."""
    terms = []
    pos = 0
    expr = expr.strip()
    while pos < len(expr):
        m = _EXPR_TOKEN.match(expr, pos)
        if m is None:
            raise ConfigError(f"cannot parse column expression {expr!r} at position {pos}")
        sign = -1 if m.group(1) == "-" else 1
        if terms and m.group(1) == "":
            raise ConfigError(f"missing +/- between fields in column expression {expr!r}")
        terms.append((sign, m.group(2)))
        pos = m.end()
    if not terms:
        raise ConfigError(f"empty column expression {expr!r}")
    return terms


def _cell_to_count(raw: str, row_num: int, column: str) -> int:
    text = (raw or "").strip()
    if not text:
        raise DataError(f"row {row_num}: missing value for {column!r}")
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row_num}: non-numeric value {text!r} for {column!r}") from None
    if not value.is_integer():
        raise DataError(f"row {row_num}: non-integer count {text!r} for {column!r}")
    return int(value)


def load_counts_csv(path, column_map: Mapping[str, str] | None = None, train_days: int | None = None) -> Dataset:
    """Load a `date,admissions,<labels...>` CSV into a Dataset.

    column_map maps observed labels (and optionally "admissions") to
    ±-expressions over raw CSV fields; without it, every non-date,
    non-admissions column is taken as a label verbatim. Rows must carry
    ISO-8601 strictly increasing dates and non-negative integer counts;
    violations raise DataError with the offending 1-based data row number.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "date" not in header:
        raise DataError(f"{path}: missing 'date' column")
    col_idx = {name: i for i, name in enumerate(header)}

    if column_map is None:
        label_exprs = {h: [(1, h)] for h in header if h not in ("date", "admissions")}
        admissions_expr = [(1, "admissions")]
        if "admissions" not in col_idx:
            raise DataError(f"{path}: missing 'admissions' column")
    else:
        label_exprs = {}
        admissions_expr = None
        for label, expr in column_map.items():
            terms = _parse_expression(expr)
            if label == "admissions":
                admissions_expr = terms
            else:
                label_exprs[label] = terms
        if admissions_expr is None:
            if "admissions" not in col_idx:
                raise DataError(f"{path}: missing 'admissions' column")
            admissions_expr = [(1, "admissions")]
        if not label_exprs:
            raise DataError(f"{path}: column_map defines no observed labels")
    for terms in list(label_exprs.values()) + [admissions_expr]:
        for _sign, fieldname in terms:
            if fieldname not in col_idx:
                raise DataError(f"{path}: column {fieldname!r} not in header {header}")

    dates: list[datetime.date] = []
    admissions: list[int] = []
    counts: dict[str, list[int]] = {label: [] for label in label_exprs}
    for row_num, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DataError(f"row {row_num}: expected {len(header)} cells, got {len(row)}")
        try:
            when = datetime.date.fromisoformat(row[col_idx["date"]].strip())
        except ValueError:
            raise DataError(f"row {row_num}: bad date {row[col_idx['date']]!r}") from None
        if dates and when <= dates[-1]:
            raise DataError(f"row {row_num}: dates must be strictly increasing")
        dates.append(when)

        def evaluate(terms, column):
            total = 0
            for sign, fieldname in terms:
                total += sign * _cell_to_count(row[col_idx[fieldname]], row_num, fieldname)
            if total < 0:
                raise DataError(f"row {row_num}: negative derived count {total} for {column!r}")
            return total

        admissions.append(evaluate(admissions_expr, "admissions"))
        for label, terms in label_exprs.items():
            counts[label].append(evaluate(terms, label))
    if not dates:
        raise DataError(f"{path}: no data rows")

    n = len(dates)
    if n < 2:
        raise DataError(f"{path}: need a day-0 row plus at least one training day")
    if train_days is None:
        train_days = n - 1
    if not 1 <= train_days <= n - 1:
        raise DataError(f"train_days {train_days} outside 1..{n - 1}")
    observed = CensusSeries(start_day=0, counts={l: np.array(v, dtype=np.int64) for l, v in counts.items()})
    return Dataset(
        dates=dates,
        admissions=np.array(admissions, dtype=np.int64),
        observed=observed,
        train_end_index=train_days,
    )


def smooth_counts(values, window: int = 5, train_end_index: int | None = None) -> np.ndarray:
    """Centered moving average; the window shrinks at the edges.

    When train_end_index is given, averages for training days (indices <
    train_end_index) use training values only, so test-period counts never
    leak into the smoothed training series.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and positive, got {window!r}")
    values = np.asarray(values, dtype=float)
    half = window // 2
    n = len(values)
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        if train_end_index is not None and i < train_end_index:
            hi = min(hi, train_end_index)
        out[i] = values[lo:hi].mean()
    return out


def smooth_dataset(dataset: Dataset, window: int = 5) -> Dataset:
    """Dataset with every observed label smoothed (admissions untouched).

    Rows 0..train_end_index are what a forecaster would have seen at
    training time, so those rows smooth among themselves only.
    """
    smoothed = {
        label: smooth_counts(dataset.observed[label], window, dataset.train_end_index + 1)
        for label in dataset.labels
    }
    return Dataset(
        dates=list(dataset.dates),
        admissions=dataset.admissions.copy(),
        observed=CensusSeries(start_day=0, counts=smoothed),
        train_end_index=dataset.train_end_index,
    )


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """All tunables; defaults reproduce the standard full-scale run."""

    duration_cap: int = 22
    poisson_mode: bool = False
    scale_r: float = 1.0
    p_icu: float = 0.343
    p_vent: float = 0.204
    p_death: float = 0.193
    death_G_mean: float = 0.01
    death_I_mean: float = 0.02
    concentration_G: float = 100.0
    eps_init: float = 0.7
    gamma: float | None = None
    bump: float = 0.05
    bump_interval: int | None = None
    burn_in_sweeps: int = 24000
    sampling_raise: float = 0.15
    n_chains: int = 10
    samples_per_chain: int = 200
    thin: int = 1
    convergence_filter: float = 0.05
    train_days: int | None = None
    smoothing: bool = False
    smoothing_window: int = 5
    admissions_day_shift: int = 0
    stage_weights: dict[str, float] | None = None
    column_map: dict[str, str] | None = None
    admissions_schedule: AdmissionsSchedule | None = None
    recovery_policy: RecoveryDurationPolicy | None = None


def _convert(section: str, key: str, raw: str, kind: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        raise AssertionError(kind)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind}") from None


# (config key, RunConfig attribute, type, validator, description of the range)
_CONFIG_SCHEMA = {
    "model": [
        ("duration_cap", "duration_cap", "int", lambda v: v >= 1, ">= 1"),
        ("poisson_mode", "poisson_mode", "bool", lambda v: True, ""),
        ("scale_r", "scale_r", "float", lambda v: v >= 1.0, ">= 1"),
    ],
    "priors": [
        ("p_icu", "p_icu", "float", lambda v: 0.0 < v < 1.0, "in (0, 1)"),
        ("p_vent", "p_vent", "float", lambda v: 0.0 < v < 1.0, "in (0, 1)"),
        ("p_death", "p_death", "float", lambda v: 0.0 < v < 1.0, "in (0, 1)"),
        ("death_G_mean", "death_G_mean", "float", lambda v: 0.0 < v < 1.0, "in (0, 1)"),
        ("death_I_mean", "death_I_mean", "float", lambda v: 0.0 < v < 1.0, "in (0, 1)"),
        ("concentration_G", "concentration_G", "float", lambda v: v > 0.0, "> 0"),
    ],
    "epsilon": [
        ("eps_init", "eps_init", "float", lambda v: 0.0 < v <= 1.0, "in (0, 1]"),
        ("gamma", "gamma", "float", lambda v: 0.0 < v < 1.0, "in (0, 1)"),
        ("bump", "bump", "float", lambda v: v >= 0.0, ">= 0"),
        ("bump_interval", "bump_interval", "int", lambda v: v >= 1, ">= 1"),
        ("burn_in_sweeps", "burn_in_sweeps", "int", lambda v: v >= 1, ">= 1"),
        ("sampling_raise", "sampling_raise", "float", lambda v: v >= 0.0, ">= 0"),
    ],
    "chains": [
        ("n_chains", "n_chains", "int", lambda v: v >= 1, ">= 1"),
        ("samples_per_chain", "samples_per_chain", "int", lambda v: v >= 1, ">= 1"),
        ("thin", "thin", "int", lambda v: v >= 1, ">= 1"),
        ("convergence_filter", "convergence_filter", "float", lambda v: v >= 0.0, ">= 0"),
    ],
    "data": [
        ("train_days", "train_days", "int", lambda v: v >= 1, ">= 1"),
        ("smoothing", "smoothing", "bool", lambda v: True, ""),
        ("smoothing_window", "smoothing_window", "int", lambda v: v >= 1 and v % 2 == 1, "odd and >= 1"),
        ("admissions_day_shift", "admissions_day_shift", "int", lambda v: abs(v) <= 7, "in [-7, 7]"),
    ],
}

_SCHEDULE_KEYS = {
    "start_day": ("int", lambda v: True, ""),
    "ramp_days": ("int", lambda v: v >= 0, ">= 0"),
    "final_reduction": ("float", lambda v: 0.0 <= v <= 1.0, "in [0, 1]"),
}

_POLICY_KEYS = {
    "reduction_fraction": ("float", lambda v: 0.0 <= v < 1.0, "in [0, 1)"),
    "min_days": ("int", lambda v: v >= 1, ">= 1"),
}


def parse_config(path) -> RunConfig:
    """Parse and validate an INI run configuration; empty file -> defaults."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # labels are case-sensitive
    path = Path(path)
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    config = RunConfig()
    known_sections = set(_CONFIG_SCHEMA) | {"distance", "columns", "admissions_schedule", "recovery_policy"}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown config section [{section}]")

    for section, entries in _CONFIG_SCHEMA.items():
        if not parser.has_section(section):
            continue
        schema = {key: (attr, kind, check, desc) for key, attr, kind, check, desc in entries}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown config key [{section}] {key}")
            attr, kind, check, desc = schema[key]
            value = _convert(section, key, raw, kind)
            if not check(value):
                raise ConfigError(f"[{section}] {key} = {raw!r} out of range (must be {desc})")
            setattr(config, attr, value)

    if parser.has_section("distance"):
        weights = {}
        for key, raw in parser.items("distance"):
            if not key.startswith("weight_"):
                raise ConfigError(f"unknown config key [distance] {key}")
            label = key[len("weight_"):]
            value = _convert("distance", key, raw, "float")
            if value <= 0:
                raise ConfigError(f"[distance] {key} = {raw!r} out of range (must be > 0)")
            weights[label] = value
        if weights:
            config.stage_weights = weights

    if parser.has_section("columns"):
        column_map = {}
        for key, raw in parser.items("columns"):
            _parse_expression(raw)  # validates syntax
            column_map[key] = raw
        if column_map:
            config.column_map = column_map

    for section, keyspec, builder, attr in (
        ("admissions_schedule", _SCHEDULE_KEYS, AdmissionsSchedule, "admissions_schedule"),
        ("recovery_policy", _POLICY_KEYS, RecoveryDurationPolicy, "recovery_policy"),
    ):
        if not parser.has_section(section):
            continue
        kwargs = {}
        for key, raw in parser.items(section):
            if key not in keyspec:
                raise ConfigError(f"unknown config key [{section}] {key}")
            kind, check, desc = keyspec[key]
            value = _convert(section, key, raw, kind)
            if not check(value):
                raise ConfigError(f"[{section}] {key} = {raw!r} out of range (must be {desc})")
            kwargs[key] = value
        try:
            setattr(config, attr, builder(**kwargs))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}]: {exc}") from None
    return config


# ---------------------------------------------------------------------------
# outputs


def _fmt(value: float) -> str:
    return repr(float(value))


def write_samples_csv(samples: Sequence[ModelParams], path) -> None:
    """One row per posterior sample, 17 named parameter columns."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PARAM_NAMES)
        for params in samples:
            values = params.to_dict()
            writer.writerow([_fmt(values[name]) for name in PARAM_NAMES])


def read_samples_csv(path, duration_cap: int = 22) -> list[ModelParams]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PARAM_NAMES:
            raise DataError(f"{path}: expected header {PARAM_NAMES}")
        samples = []
        for row_num, row in enumerate(reader, start=1):
            if len(row) != len(PARAM_NAMES):
                raise DataError(f"{path} row {row_num}: expected {len(PARAM_NAMES)} values")
            values = dict(zip(PARAM_NAMES, (float(v) for v in row)))
            samples.append(ModelParams.from_dict(values, duration_cap=duration_cap))
    return samples


def _level_column(level: float) -> str:
    return f"p{level:g}"


def write_forecast_summary(summary: ForecastSummary, csv_path, json_path=None, dates=None) -> None:
    """Forecast bands as CSV (day,[date,]label,mean,p<levels...>) and JSON."""
    level_cols = [_level_column(l) for l in summary.levels]
    with Path(csv_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["day"] + (["date"] if dates is not None else []) + ["label", "mean"] + level_cols
        writer.writerow(header)
        for label in summary.labels:
            for i in range(summary.horizon):
                day = summary.start_day + i
                row = [str(day)]
                if dates is not None:
                    row.append(dates[i].isoformat())
                row += [label, _fmt(summary.mean[label][i])]
                row += [_fmt(summary.percentiles[label][j, i]) for j in range(len(summary.levels))]
                writer.writerow(row)
    if json_path is not None:
        payload = {
            "start_day": summary.start_day,
            "levels": list(summary.levels),
            "labels": {
                label: {
                    "mean": [float(v) for v in summary.mean[label]],
                    "percentiles": [[float(v) for v in row] for row in summary.percentiles[label]],
                }
                for label in summary.labels
            },
        }
        if dates is not None:
            payload["dates"] = [d.isoformat() for d in dates]
        Path(json_path).write_text(json.dumps(payload, indent=2))


def read_forecast_summary(csv_path) -> ForecastSummary:
    with Path(csv_path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or "label" not in header:
            raise DataError(f"{csv_path}: not a forecast summary file")
        level_cols = [h for h in header if h.startswith("p") and h != "label"]
        levels = tuple(float(h[1:]) for h in level_cols)
        idx = {name: i for i, name in enumerate(header)}
        rows = list(reader)
    if not rows:
        raise DataError(f"{csv_path}: empty forecast summary")
    start_day = int(rows[0][idx["day"]])
    by_label: dict[str, list] = {}
    for row in rows:
        by_label.setdefault(row[idx["label"]], []).append(row)
    mean = {}
    percentiles = {}
    for label, label_rows in by_label.items():
        label_rows.sort(key=lambda r: int(r[idx["day"]]))
        mean[label] = np.array([float(r[idx["mean"]]) for r in label_rows])
        percentiles[label] = np.array(
            [[float(r[idx[col]]) for r in label_rows] for col in level_cols]
        )
    return ForecastSummary(start_day=start_day, levels=levels, mean=mean, percentiles=percentiles)


def write_mae_report(report: MaeReport, csv_path, json_path=None) -> None:
    with Path(csv_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "mae_mean", "mae_lower", "mae_upper"])
        for label in report.labels:
            writer.writerow(
                [label, _fmt(report.mean[label]), _fmt(report.lower[label]), _fmt(report.upper[label])]
            )
    if json_path is not None:
        payload = {
            "batch_size": report.batch_size,
            "n_batches": report.n_batches,
            "labels": {
                label: {
                    "mean": report.mean[label],
                    "lower": report.lower[label],
                    "upper": report.upper[label],
                }
                for label in report.labels
            },
        }
        Path(json_path).write_text(json.dumps(payload, indent=2))


def write_coverage_csv(coverage_by_target: Mapping[float, Mapping[str, float]], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "target_pct", "coverage_pct"])
        for target, per_label in coverage_by_target.items():
            for label, value in per_label.items():
                writer.writerow([label, _fmt(target), _fmt(value)])


def write_diagnostics_csv(diagnostics, path) -> None:
    """Per-proposal chain trace (iteration, sweep, parameter, distance, eps, accepted)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "sweep", "parameter", "distance", "eps", "accepted"])
        for i in range(len(diagnostics.proposal)):
            writer.writerow(
                [
                    diagnostics.proposal[i],
                    diagnostics.sweep[i],
                    diagnostics.parameter[i],
                    _fmt(diagnostics.distance[i]),
                    _fmt(diagnostics.eps[i]),
                    int(diagnostics.accepted[i]),
                ]
            )


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Counts file in the `date,admissions,<labels...>` input schema."""
    labels = list(dataset.labels)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "admissions"] + labels)
        for i in range(len(dataset.dates)):
            row = [dataset.dates[i].isoformat(), int(dataset.admissions[i])]
            row += [int(dataset.observed[label][i]) for label in labels]
            writer.writerow(row)
