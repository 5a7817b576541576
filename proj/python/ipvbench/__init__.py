"""Python access to the ipv benchmark core."""

import json

import numpy as np

from . import _ipvbench
from ._ipvbench import bootstrap_mean, ground_truth_discordance, method_names, theoretical_discordance

__all__ = [
    "bootstrap_mean",
    "catalog",
    "cohort",
    "ground_truth_discordance",
    "method_names",
    "pair_panel",
    "run",
    "theoretical_discordance",
]


def catalog(master_seed=42):
    """The 94 experiment specs as dicts."""
    return json.loads(_ipvbench.catalog_json(master_seed))


def run(selection="score2", master_seed=42, methods="all", smoke=False):
    """Run one experiment and return its report as a dict."""
    return json.loads(_ipvbench.run_json(selection, master_seed, methods, smoke))


def cohort(n_patients=10000, n_physicians=20, min_panel_size=90, seed=0):
    """(covariates, physician_of, covariate_names) for a generated cohort."""
    x, phys, names = _ipvbench.cohort(n_patients, n_physicians, min_panel_size, seed)
    return np.asarray(x), np.asarray(phys, dtype=np.int64), list(names)


def pair_panel(distances):
    """One-to-one caliper pairing on a symmetric distance matrix."""
    d = np.ascontiguousarray(distances, dtype=float)
    return [tuple(p) for p in _ipvbench.pair_panel(d)]
