from functools import lru_cache

import numpy as np
import pytest

from models import ObjectiveParams, PrivacyDemand


def _compositions(n, m):
    if n == 1:
        return np.array([[m]])
    if n == 2:
        a = np.arange(m + 1)
        return np.column_stack([a, m - a])
    rows = []
    for first in range(m + 1):
        rest = _compositions(n - 1, m - first)
        rows.append(np.column_stack([np.full(len(rest), first), rest]))
    return np.vstack(rows)


@lru_cache(maxsize=None)
def simplex_grid(n, m):
    """All points of the simplex with coordinates in multiples of 1/m, as a read-only (N, n) array."""
    grid = _compositions(n, m) / m
    grid.flags.writeable = False
    return grid


def grid_ratio(W, eps):
    finite = np.isfinite(eps)
    ratios = np.zeros_like(W)
    ratios[:, finite] = W[:, finite] / eps[finite]
    return ratios.max(axis=1)


@pytest.fixture
def grid_min():
    """Grid minimum of r_C / r_U / the turbo objective; a one-sided oracle for exact solvers."""

    def oracle(kind, eps, m, log_term=None, c=None):
        eps = np.asarray(eps, dtype=float)
        n = eps.size
        W = simplex_grid(n, m)
        t = grid_ratio(W, eps)
        if kind == "turbo":
            return float(np.min((W ** 2).sum(axis=1) + c * t ** 2))
        dev = np.abs(W - 1.0 / n).sum(axis=1) ** 2
        if kind == "U":
            dev = np.minimum(dev, log_term * (W ** 2).sum(axis=1))
        return float(np.sqrt(np.min(dev + (log_term * t) ** 2)))

    return oracle


@pytest.fixture
def random_instance():
    """Random (ObjectiveParams, eps) with log-uniform levels in [e^-3, e^3] and some public users."""
    rng = np.random.default_rng(7)

    def draw(n, k=2, beta=0.05, public_rate=0.2):
        eps = np.exp(rng.uniform(-3.0, 3.0, size=n))
        eps[rng.uniform(size=n) < public_rate] = np.inf
        return ObjectiveParams(float(k), beta, PrivacyDemand(eps))

    return draw
