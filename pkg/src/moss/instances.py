"""Seeded problem generators for tests, timing runs and ablations."""

from __future__ import annotations

import numpy as np

from .data import CandidatePool, Dataset, PredictionMatrix, build_prediction_matrix
from .rules import ForestConfig, generate_pool


def gaussian_instance(n: int, m: int, k: int, seed: int = 0, gamma: float = 1e-3,
                      noise: float = 1.0) -> tuple[np.ndarray, PredictionMatrix, np.ndarray]:
    """Centred Gaussian columns, a planted ``k``-sparse signal and
    selection proportions drawn uniformly from [0.01, 0.5] on a 0.001 grid.

    Returns ``(pi, pm, y)`` with ``y`` centred.
    """
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, m))
    M -= M.mean(axis=0)
    beta = np.zeros(m)
    beta[rng.choice(m, size=min(k, m), replace=False)] = rng.normal(size=min(k, m))
    y = M @ beta + rng.normal(scale=noise, size=n)
    y -= y.mean()
    pi = np.round(rng.uniform(0.01, 0.5, size=m), 3)
    return pi, PredictionMatrix(M, np.zeros(m), 0.0, gamma), y


def step_sine(n: int, p: int = 6, seed: int = 0, noise: float = 0.5) -> Dataset:
    """Linear, sine and step signal in the first three columns on Gaussian features; a forest-friendly target."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = 2.0 * X[:, 0] + np.sin(3.0 * X[:, 1]) + 1.5 * (X[:, 2] > 0) + rng.normal(scale=noise, size=n)
    return Dataset(X, y, ())


def forest_instance(n: int, p: int, max_rules: int, seed: int = 0, gamma: float = 1e-3,
                    forest_seed: int = 1) -> tuple[CandidatePool, PredictionMatrix, np.ndarray]:
    """Rule pool mined from a forest on :func:`step_sine` data.

    Returns ``(pool, pm, y)`` with ``y`` centred on the training mean.
    """
    data = step_sine(n, p, seed)
    pool = generate_pool(data, ForestConfig(n_trees=500, max_rules=max_rules, seed=forest_seed))
    pm = build_prediction_matrix(pool, data, gamma)
    return pool, pm, pm.center(data.target)
