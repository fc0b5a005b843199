"""Oracles and generators shared across test modules.

The finite-difference oracle perturbs one cell and renormalizes the table,
so the directional derivative it measures is the raw partial minus the
probability-weighted mean of all partials.  Analytic gradients are projected
the same way before comparison.
"""

from __future__ import annotations

import numpy as np

FD_STEP = 1e-6


def fd_gradient(metric_fn, pi: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite differences of metric_fn along renormalized cell bumps."""
    flat = pi.ravel()
    out = np.empty(flat.size)
    for idx in range(flat.size):
        bump = np.zeros(flat.size)
        bump[idx] = 1.0
        plus = (flat + step * bump) / (1.0 + step)
        minus = (flat - step * bump) / (1.0 - step)
        out[idx] = (metric_fn(plus.reshape(pi.shape))
                    - metric_fn(minus.reshape(pi.shape))) / (2.0 * step)
    return out.reshape(pi.shape)


def project_gradient(values: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Remove the direction normal to the simplex, matching the FD oracle."""
    return values - float((pi * values).sum())


def fd_relative_error(metric_fn, analytic: np.ndarray, pi: np.ndarray) -> float:
    projected = project_gradient(analytic, pi)
    fd = fd_gradient(metric_fn, pi)
    return float(np.max(np.abs(fd - projected)) / np.max(np.abs(projected)))


def random_single_table(rng: np.random.Generator, r: int,
                        min_marginal: float = 0.03) -> np.ndarray:
    """A random r*r probability table whose marginals stay off the boundary."""
    while True:
        pi = rng.dirichlet(np.ones(r * r)).reshape(r, r)
        u = pi.sum(axis=1)
        v = pi.sum(axis=0)
        if (u.min() > min_marginal and v.min() > min_marginal
                and u.max() < 1.0 - min_marginal and v.max() < 1.0 - min_marginal):
            return pi


def random_paired_table(rng: np.random.Generator, r: int,
                        min_marginal: float = 0.03) -> np.ndarray:
    """A random r*r*r joint table with both method marginals nondegenerate."""
    while True:
        pi = rng.dirichlet(np.ones(r ** 3)).reshape(r, r, r)
        ok = True
        for table in (pi.sum(axis=1), pi.sum(axis=0)):
            u = table.sum(axis=1)
            v = table.sum(axis=0)
            if (u.min() <= min_marginal or v.min() <= min_marginal
                    or u.max() >= 1.0 - min_marginal or v.max() >= 1.0 - min_marginal):
                ok = False
                break
        if ok:
            return pi
