"""Shared test fixtures: compact parameter construction."""

from wardflow.model import ModelParams


def make_params(duration_cap=22, **overrides):
    values = {
        "recover_G": 0.6,
        "recover_I": 0.4,
        "recover_V": 0.12,
        "death_G": 0.01,
        "death_I": 0.02,
    }
    for stage in "GIV":
        for health in ("declining", "recovering"):
            values[f"mode_{stage}_{health}"] = 6.0
            values[f"temp_{stage}_{health}"] = 1.0
    values.update(overrides)
    return ModelParams.from_dict(values, duration_cap=duration_cap)
