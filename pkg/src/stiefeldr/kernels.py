"""Gaussian-kernel estimators used inside the estimating equations.

All functions are pure and thread-safe.  Kernel arguments are projected
covariates ``Z = X B`` on the standardized scale, so a single bandwidth is
shared by every coordinate.
"""

import math

import numpy as np

from .exceptions import DimensionError, StiefelError


class DegenerateWindowError(StiefelError, ArithmeticError):
    """A kernel-weighted average has an empty or zero-weight denominator."""


def silverman_bw(d, n):
    """Silverman's rule-of-thumb bandwidth for a ``d``-dimensional Gaussian kernel.

    ``1.06 * (4 / (d + 2)) ** (1 / (d + 4)) * n ** (-1 / (d + 4))``; assumes
    unit-variance coordinates.
    """
    d = int(d)
    n = int(n)
    if d < 1 or n < 2:
        raise ValueError(f"silverman_bw needs d >= 1 and n >= 2, got d={d}, n={n}")
    return 1.06 * (4.0 / (d + 2)) ** (1.0 / (d + 4)) * n ** (-1.0 / (d + 4))


def default_slice_fraction(bw):
    """Fraction of the sample used as the slice width when none is given."""
    return min(0.2, float(bw))


def _as_points(z, name):
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2:
        raise DimensionError(f"{name} must be 1-d or 2-d")
    return z


def gaussian_kernel_weights(z_points, z0, bw):
    """Product Gaussian kernel ``K_h(z_i - z0) = prod_k phi((z_ik - z0k) / h) / h``.

    With one bandwidth for all coordinates this is the spherical Gaussian,
    so weights are invariant under rotations of the projected space.
    """
    Z = _as_points(z_points, "z_points")
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    if z0.shape != (Z.shape[1],):
        raise DimensionError(f"z0 must have length {Z.shape[1]}, got shape {z0.shape}")
    if not bw > 0:
        raise ValueError("bw must be positive")
    d = Z.shape[1]
    u = (Z - z0) / bw
    return np.exp(-0.5 * np.sum(u * u, axis=1)) / ((2.0 * math.pi) ** (d / 2.0) * bw**d)


def kernel_matrix(Z, bw):
    """Pairwise kernel values ``K[i, k] = exp(-||Z_i - Z_k||^2 / (2 h^2))``.

    The Gaussian normalizing constant is dropped: it cancels in every
    Nadaraya-Watson ratio.  The diagonal is exactly 1.
    """
    Z = _as_points(Z, "Z")
    sq = np.einsum("ij,ij->i", Z, Z)
    D = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    D *= -0.5 / (bw * bw)
    return np.exp(D, out=D)


def cond_mean_at_risk(X, Y, Z, u, z0, bw):
    """Nadaraya-Watson estimate of ``E(X | Y >= u, B^T X = z0)``.

    Raises
    ------
    DegenerateWindowError
        If nobody is at risk at ``u`` or all at-risk kernel weights vanish.
    """
    X = _as_points(X, "X")
    Y = np.asarray(Y, dtype=float)
    w = gaussian_kernel_weights(Z, z0, bw) * (Y >= u)
    total = w.sum()
    if not total > 0:
        raise DegenerateWindowError(f"no kernel mass in the risk set at u={u}")
    return w @ X / total


def cond_hazard(Y, delta, Z, u, z0, bw):
    """Single-kernel conditional hazard increment at time ``u``.

    ``sum_i 1(Y_i = u) delta_i K_h(Z_i - z0) / sum_i 1(Y_i >= u) K_h(Z_i - z0)``.
    Equality of times is exact floating-point equality; ``u`` is meant to be
    an observed failure time.
    """
    Y = np.asarray(Y, dtype=float)
    delta = np.asarray(delta)
    w = gaussian_kernel_weights(Z, z0, bw)
    den = np.sum(w * (Y >= u))
    if not den > 0:
        raise DegenerateWindowError(f"no kernel mass in the risk set at u={u}")
    return float(np.sum(w * ((Y == u) & (delta == 1))) / den)


def failure_window(Y, delta, u, size):
    """Failures in ``[u, u + du)`` where ``du`` covers ``size`` failures.

    Failures at or after ``u`` are taken in time order; all failures tied
    with the last one taken are included.  Returns ``(mask, truncated)``
    where ``truncated`` is set when fewer than ``size`` failures remain.
    """
    Y = np.asarray(Y, dtype=float)
    is_fail = (np.asarray(delta) == 1) & (Y >= u)
    times = np.sort(Y[is_fail])
    if times.size == 0:
        raise DegenerateWindowError(f"no failures at or after u={u}")
    truncated = times.size < size
    upper = times[min(size, times.size) - 1]
    return is_fail & (Y <= upper), truncated


def phi_hat(X, Y, delta, u, slice_fraction):
    """Sliced-average direction at time ``u``.

    Mean of ``X`` over the ``ceil(slice_fraction * n)`` failures following
    ``u`` minus the mean of ``X`` over the risk set ``{Y >= u}``.
    """
    X = _as_points(X, "X")
    if not 0 < slice_fraction < 1:
        raise ValueError("slice_fraction must lie in (0, 1)")
    Y = np.asarray(Y, dtype=float)
    size = max(1, math.ceil(slice_fraction * len(Y)))
    window, _ = failure_window(Y, delta, u, size)
    at_risk = Y >= u
    return X[window].mean(axis=0) - X[at_risk].mean(axis=0)
