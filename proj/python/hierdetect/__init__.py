"""Hierarchical sparse user detection and channel estimation."""

import json as _json

from ._core import (
    ConfigError,
    DimensionError,
    Measurement,
    ProblemDims,
    __version__,
    b0,
    b1,
    block_energies,
    bounds_report,
    channel_norm_cdf,
    chi_sq_ccdf,
    diversity_slope,
    hier_threshold,
    hihtp,
    hiiht,
)
from ._core import run_experiment as _run_experiment


def simulate(config):
    """Monte Carlo run of one configuration; ``config`` uses the JSON config layout."""
    return _run_experiment(_json.dumps(config), False)


def sweep(config):
    """Monte Carlo over the grid in ``config["sweep"]``."""
    return _run_experiment(_json.dumps(config), True)


__all__ = [
    "ConfigError",
    "DimensionError",
    "Measurement",
    "ProblemDims",
    "__version__",
    "b0",
    "b1",
    "block_energies",
    "bounds_report",
    "channel_norm_cdf",
    "chi_sq_ccdf",
    "diversity_slope",
    "hier_threshold",
    "hihtp",
    "hiiht",
    "simulate",
    "sweep",
]
