"""Python access to the martinbench library."""

import json

from ._core import (
    ConfigError,
    ConvergenceError,
    Error,
    PreconditionError,
    RangeError,
    Truncation,
    fixture_names,
    rho_estimate,
    set_thread_count,
    green_limit,
)
from ._core import _run_config

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "Error",
    "PreconditionError",
    "RangeError",
    "Truncation",
    "fixture_names",
    "rho_estimate",
    "run",
    "set_thread_count",
    "green_limit",
]


def run(config):
    """Run an experiment config (dict or JSON text).

    Returns (summary, records, passed) with summary and records decoded.
    """
    text = config if isinstance(config, str) else json.dumps(config)
    summary, records, passed = _run_config(text)
    return json.loads(summary), [json.loads(r) for r in records], passed
