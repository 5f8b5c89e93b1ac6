"""Simulation kernel selection.

Two interchangeable kernels simulate the patient population: a numba
JIT-compiled per-patient state machine and a pure-numpy vectorized fallback.
Selection order: the WARDFLOW_BACKEND environment variable ("numba" or
"numpy") if set, else numba when importable, else numpy. Both kernels are
bit-deterministic under a fixed seed but consume random numbers in different
orders, so their outputs agree statistically rather than bitwise.
"""

from __future__ import annotations

import os

_ENV_VAR = "WARDFLOW_BACKEND"
_forced: str | None = None
_cache: dict[str, object] = {}


def _load(name: str):
    if name not in _cache:
        if name == "numba":
            from . import _kernels_numba

            _cache[name] = _kernels_numba.simulate_patients
        elif name == "numpy":
            from . import _kernels_numpy

            _cache[name] = _kernels_numpy.simulate_patients
        else:
            raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")
    return _cache[name]


def active_backend() -> str:
    """Name of the backend get_kernel() will return."""
    if _forced is not None:
        return _forced
    env = os.environ.get(_ENV_VAR, "").strip().lower()
    if env:
        if env not in ("numba", "numpy"):
            raise ValueError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {env!r}")
        return env
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


def get_kernel():
    return _load(active_backend())


def use(name: str | None) -> None:
    """Force a backend programmatically (None restores env/default selection)."""
    global _forced
    if name is not None:
        _load(name)
    _forced = name
