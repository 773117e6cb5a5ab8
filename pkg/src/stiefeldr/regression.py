"""Semiparametric inverse regression for continuous outcomes.

Two estimating equations are available.  ``sir`` centers the inverse
regression curve ``E(X | y)`` and the covariates by their kernel
regressions on ``B^T X``; ``phd`` pairs the residual ``y - E(y | B^T X)``
with the centered second moment ``X X^T - E(X X^T | B^T X)``.  Both are
vectorized column-major into length ``p**2`` and the fit minimizes the
squared norm.
"""

import numpy as np

from ._validation import check_ndr, check_regression_data
from .base import DimensionReductionMixin, Standardizer, top_directions
from .kernels import kernel_matrix, silverman_bw
from .manifold import as_basis, gram_schmidt

REGRESSION_METHODS = ("sir", "phd")


def _smoother(Z, bw):
    # row-stochastic Nadaraya-Watson weights; the diagonal is 1 so rows never vanish
    K = kernel_matrix(Z, bw)
    K /= K.sum(axis=1, keepdims=True)
    return K


def inverse_regression_curve(X, y):
    """Kernel estimate of ``E(X | y)`` at each observed ``y``.

    ``y`` is standardized first; the bandwidth is the one-dimensional
    Silverman value for ``len(y)`` points.
    """
    y = np.asarray(y, dtype=float)
    sd = y.std()
    ys = (y - y.mean()) / (sd if sd > 0 else 1.0)
    return _smoother(ys[:, None], silverman_bw(1, len(y))) @ np.asarray(X, dtype=float)


class SIRObjective:
    """Squared norm of the semi-SIR equation; ``E(X | y)`` is cached at construction."""

    def __init__(self, X, y, bw):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.bw = float(bw)
        self.curve = inverse_regression_curve(self.X, self.y)

    def psi_matrix(self, B):
        R = _smoother(self.X @ B, self.bw)
        left = self.curve - R @ self.curve
        right = self.X - R @ self.X
        return left.T @ right / self.X.shape[0]

    def psi(self, B):
        return self.psi_matrix(np.asarray(B, dtype=float)).ravel(order="F")

    def __call__(self, B):
        M = self.psi_matrix(np.asarray(B, dtype=float))
        return float(np.sum(M * M))


class PHDObjective:
    """Squared norm of the semi-PHD equation.

    ``sum_i r_i (X_i X_i^T - sum_k R_ik X_k X_k^T)`` equals
    ``X^T diag(r - R^T r) X``, which avoids forming the ``n`` smoothed
    ``p x p`` moments.
    """

    def __init__(self, X, y, bw):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.bw = float(bw)

    def psi_matrix(self, B):
        R = _smoother(self.X @ B, self.bw)
        r = self.y - R @ self.y
        w = r - R.T @ r
        return (self.X.T * w) @ self.X / self.X.shape[0]

    def psi(self, B):
        return self.psi_matrix(np.asarray(B, dtype=float)).ravel(order="F")

    def __call__(self, B):
        M = self.psi_matrix(np.asarray(B, dtype=float))
        return float(np.sum(M * M))


_OBJECTIVES = {"sir": SIRObjective, "phd": PHDObjective}


def _objective(method, X, y, bw):
    if method not in _OBJECTIVES:
        raise ValueError(f"method must be one of {REGRESSION_METHODS}, got {method!r}")
    return _OBJECTIVES[method](X, y, bw)


def psi_sir(B, X, y, bw=None):
    """semi-SIR estimating equation (length ``p**2``) at ``B``."""
    B = as_basis(B)
    bw = silverman_bw(B.shape[1], len(y)) if bw is None else bw
    return SIRObjective(X, y, bw).psi(B)


def psi_phd(B, X, y, bw=None):
    """semi-PHD estimating equation (length ``p**2``) at ``B``."""
    B = as_basis(B)
    bw = silverman_bw(B.shape[1], len(y)) if bw is None else bw
    return PHDObjective(X, y, bw).psi(B)


def reg_objective(B, X, y, method="sir", bw=None):
    """``psi^T psi`` for the chosen regression equation."""
    psi = psi_sir(B, X, y, bw) if method == "sir" else psi_phd(B, X, y, bw)
    return float(psi @ psi)


def initial_B_reg(X, y, ndr, method="sir", n_slices=10, random_state=0):
    """Classical estimate used as the starting value.

    ``sir`` eigen-decomposes the covariance of slice means (slices are
    ``y`` quantile groups); ``phd`` uses ``mean(r_i X_i X_i^T)`` with
    ``r`` the least-squares residual, ranked by absolute eigenvalue.
    ``X`` is expected standardized.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    if method == "sir":
        M = np.zeros((X.shape[1], X.shape[1]))
        for idx in np.array_split(np.argsort(y, kind="stable"), min(n_slices, n)):
            mean = Xc[idx].mean(axis=0)
            M += idx.size / n * np.outer(mean, mean)
    elif method == "phd":
        design = np.column_stack([np.ones(n), Xc])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        r = y - design @ coef
        M = (Xc.T * r) @ Xc / n
    else:
        raise ValueError(f"method must be one of {REGRESSION_METHODS}, got {method!r}")
    return top_directions(M, ndr, random_state, symmetric=True)


def ols_direction(X, y):
    """Least-squares slope vector of ``y`` on ``X`` (with intercept)."""
    X = np.asarray(X, dtype=float)
    design = np.column_stack([np.ones(X.shape[0]), X - X.mean(axis=0)])
    coef, *_ = np.linalg.lstsq(design, np.asarray(y, dtype=float), rcond=None)
    return coef[1:]


def starting_candidates(X, y, ndr, method="sir", n_slices=10, random_state=0):
    """Starting values tried before a fit, best objective wins.

    Residual-based PHD cannot see a linear trend in ``y``, so for ``phd``
    the least-squares direction, completed by the leading PHD directions,
    is offered alongside the classical estimate.
    """
    classical = initial_B_reg(X, y, ndr, method, n_slices, random_state)
    if method != "phd":
        return [classical]
    slope = ols_direction(X, y)
    if not np.linalg.norm(slope) > 0:
        return [classical]
    Q, _ = np.linalg.qr(np.column_stack([slope, classical]))
    return [classical, gram_schmidt(Q[:, :ndr])]


class RegressionDR(DimensionReductionMixin):
    """Semiparametric SIR/PHD dimension reduction for a continuous outcome.

    Parameters
    ----------
    ndr : int, default=2
        Structural dimension.
    method : {'sir', 'phd'}, default='sir'
    bw : float, optional
        Kernel bandwidth on ``X B``; Silverman's rule for ``ndr`` dimensions by default.
    B_initial : array-like of shape (p, ndr), optional
        Starting value.  By default the best of :func:`starting_candidates`.
    n_slices : int, default=10
        Slices for the classical SIR starting value.
    ftol, gtol, btol, epsilon, maxitr, n_threads :
        Solver controls, see :class:`~stiefeldr.solver.SolverControl`.

    Attributes
    ----------
    B_ : ndarray of shape (n_features, ndr)
        Estimated basis for standardized covariates.
    result_ : FitResult
    bw_ : float

    Examples
    --------
    >>> from stiefeldr import RegressionDR, gen_regression_sim
    >>> sim = gen_regression_sim(n=100, p=4, seed=0)
    >>> est = RegressionDR(ndr=1, method="phd").fit(sim.X, sim.y)
    >>> est.B_.shape
    (4, 1)
    """

    def __init__(
        self,
        ndr=2,
        method="sir",
        bw=None,
        B_initial=None,
        n_slices=10,
        ftol=1e-6,
        gtol=1e-6,
        btol=1e-6,
        epsilon=1e-6,
        maxitr=500,
        n_threads=1,
    ):
        self.ndr = ndr
        self.method = method
        self.bw = bw
        self.B_initial = B_initial
        self.n_slices = n_slices
        self.ftol = ftol
        self.gtol = gtol
        self.btol = btol
        self.epsilon = epsilon
        self.maxitr = maxitr
        self.n_threads = n_threads

    def fit(self, X, y):
        if self.method not in REGRESSION_METHODS:
            raise ValueError(f"method must be one of {REGRESSION_METHODS}, got {self.method!r}")
        X, y = check_regression_data(X, y, int(self.ndr))
        n, p = X.shape
        ndr = check_ndr(self.ndr, p)
        self.n_features_in_ = p

        std = Standardizer(X)
        self.center_, self.scale_ = std.center, std.scale
        Xs = std(X)
        self.bw_ = silverman_bw(ndr, n) if self.bw is None else float(self.bw)
        self.objective_ = _objective(self.method, Xs, y, self.bw_)
        if self.B_initial is not None:
            B0 = self._start(None, p)
        else:
            B0 = min(starting_candidates(Xs, y, ndr, self.method, self.n_slices), key=self.objective_)
        return self._solve(self.objective_, B0)
