"""Shared helpers: dataset builders independent of the package simulators."""

import numpy as np

from ordanova.designs import Dataset


def make_oneway(effects, n_per, sigma, seed, grand_mean=0.0):
    """One-way dataset in the nested schema, built with a raw numpy RNG so
    tests do not depend on the package's own simulators."""
    effects = np.asarray(effects, dtype=float)
    k = effects.size
    rng = np.random.default_rng(seed)
    y = np.concatenate(
        [grand_mean + e + sigma * rng.standard_normal(n_per) for e in effects]
    )
    n = k * n_per
    return Dataset.nested(
        y=y,
        machine=np.arange(n),
        treatment=np.repeat(np.arange(k), n_per),
        measure=np.zeros(n, dtype=int),
    )


def groups_dataset(*groups):
    """Dataset with explicit per-group observation lists."""
    y = np.concatenate([np.asarray(g, dtype=float) for g in groups])
    treatment = np.concatenate(
        [np.full(len(g), i, dtype=int) for i, g in enumerate(groups)]
    )
    n = y.size
    return Dataset.nested(
        y=y,
        machine=np.arange(n),
        treatment=treatment,
        measure=np.zeros(n, dtype=int),
    )


def machines_dataset(machine_means, n_measures, sigma, seed, group_of=None):
    """Nested dataset with one mean per machine and iid noise; machines are
    assigned to treatments by ``group_of`` (default: all one treatment)."""
    machine_means = np.asarray(machine_means, dtype=float)
    m = machine_means.size
    if group_of is None:
        group_of = np.zeros(m, dtype=int)
    group_of = np.asarray(group_of, dtype=int)
    rng = np.random.default_rng(seed)
    y = np.repeat(machine_means, n_measures) + sigma * rng.standard_normal(
        m * n_measures
    )
    return Dataset.nested(
        y=y,
        machine=np.repeat(np.arange(m), n_measures),
        treatment=np.repeat(group_of, n_measures),
        measure=np.tile(np.arange(n_measures), m),
    )
