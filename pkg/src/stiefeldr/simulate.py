"""Synthetic designs used in the examples and acceptance runs."""

from typing import NamedTuple

import numpy as np


class SurvivalSim(NamedTuple):
    X: np.ndarray
    Y: np.ndarray
    delta: np.ndarray
    fail_edr: np.ndarray
    censor_edr: np.ndarray


class RegressionSim(NamedTuple):
    X: np.ndarray
    y: np.ndarray
    true_B: np.ndarray


def survival_directions(p):
    """Unnormalized failure (p x 2) and censoring (p x 1) directions."""
    if p < 6:
        raise ValueError("the survival design needs p >= 6")
    fail = np.zeros((p, 2))
    fail[[0, 1], 0] = 1.0
    fail[2, 1], fail[3, 1] = 1.0, -1.0
    cens = np.zeros((p, 1))
    cens[[1, 3, 4, 5], 0] = 1.0
    return fail, cens


def gen_survival_sim(n=350, p=6, seed=None):
    """Censored data with two failure directions and one censoring direction.

    ``T = exp(-2.5 + X b1 + 0.5 (X b2) e_T)`` and ``C = exp(-0.5 + X g + e_C)``
    with standard normal ``X``, ``e_T`` and ``e_C``.  The returned EDR
    matrices have unit-norm columns.
    """
    rng = np.random.default_rng(seed)
    fail, cens = survival_directions(p)
    X = rng.standard_normal((n, p))
    eps_t = rng.standard_normal(n)
    eps_c = rng.standard_normal(n)
    T = np.exp(-2.5 + X @ fail[:, 0] + 0.5 * (X @ fail[:, 1]) * eps_t)
    C = np.exp(-0.5 + X @ cens[:, 0] + eps_c)
    Y = np.minimum(T, C)
    delta = (T < C).astype(int)
    return SurvivalSim(
        X, Y, delta, fail / np.linalg.norm(fail, axis=0), cens / np.linalg.norm(cens, axis=0)
    )


def gen_regression_sim(n=100, p=4, seed=None):
    """``y = -1 + X_1 + e`` with standard normal ``X`` and ``e``; truth ``e_1``."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = -1.0 + X[:, 0] + rng.standard_normal(n)
    true_B = np.zeros((p, 1))
    true_B[0, 0] = 1.0
    return RegressionSim(X, y, true_B)
