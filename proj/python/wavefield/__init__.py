"""Python bindings for the local wave-field simulator."""

import json

import numpy as np

from ._wavefield import (
    Grid,
    IoError,
    UsageError,
    barrier_transmission,
    current,
    find_initial_boundary,
    free_gaussian_width,
    packet_transmission,
    scenario_defaults,
    scenarios,
    transfer_matrices,
)
from ._wavefield import evolve as _evolve
from ._wavefield import gaussian as _gaussian
from ._wavefield import _run

__all__ = [
    "Grid",
    "IoError",
    "UsageError",
    "barrier_transmission",
    "current",
    "evolve",
    "find_initial_boundary",
    "free_gaussian_width",
    "gaussian",
    "packet_transmission",
    "run_scenario",
    "scenario_defaults",
    "scenarios",
    "transfer_matrices",
]


def gaussian(grid, x0, sigma, k0=0.0):
    return np.asarray(_gaussian(grid, x0, sigma, k0), dtype=complex)


def evolve(grid, psi, potential=None, steps=1):
    pot = [] if potential is None else list(np.asarray(potential, dtype=float))
    return np.asarray(_evolve(grid, list(np.asarray(psi, dtype=complex)), pot, steps), dtype=complex)


def run_scenario(name, **config):
    """Run a registered scenario; keyword values are passed as config strings."""
    result = _run(name, {k: str(v) for k, v in config.items()})
    result["summary"] = json.loads(result.pop("summary_json"))
    return result
