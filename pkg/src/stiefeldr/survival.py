"""Counting-process dimension reduction for censored survival data.

The estimating equation pairs, for every subject ``i`` and every observed
failure ``j``, the kernel-centered covariate ``X_i - E(X | Y >= Y_j, B^T X_i)``
with the sliced-average direction ``phi(Y_j)`` and the martingale-type
increment ``delta_i 1(i = j) - lambda(Y_j | B^T X_i)``.  The fitted ``B``
minimizes the squared norm of the averaged equation.
"""

import math

import numpy as np
from scipy import sparse

from ._validation import check_ndr, check_survival_data
from .base import DimensionReductionMixin, Standardizer, top_directions
from .kernels import default_slice_fraction, kernel_matrix, phi_hat, silverman_bw
from .manifold import as_basis

SURVIVAL_METHODS = ("dm", "dn", "forward")

# kernel mass below this counts as an empty window; dividing by subnormal
# denominators would overflow
EMPTY_WINDOW = 1e-200


class DMObjective:
    """Squared norm of the semiparametric inverse-regression equation.

    Everything that does not depend on ``B`` (time ordering, risk-set
    sizes, ``phi`` at each failure time, tie structure) is computed once
    here; instances are read-only afterwards and safe to evaluate from
    several threads.

    Parameters
    ----------
    X : ndarray of shape (n, p)
        Covariates, used as given (standardize beforehand).
    Y : ndarray of shape (n,)
        Observed times.
    delta : ndarray of shape (n,)
        1 for an observed failure, 0 for a censored time.
    bw : float
        Kernel bandwidth on ``X B``.
    slice_fraction : float
        Window size for ``phi``, as a fraction of ``n``.
    at_risk_compensator : bool, default=True
        Multiply the hazard term of subject ``i`` at failure time ``Y_j`` by
        ``1(Y_i >= Y_j)``, so that the increment is a counting-process
        martingale increment.  ``False`` applies the hazard to every subject.
    """

    def __init__(self, X, Y, delta, bw, slice_fraction, at_risk_compensator=True):
        self.X = np.asarray(X, dtype=float)
        self.Y = np.asarray(Y, dtype=float)
        self.delta = np.asarray(delta).astype(int)
        self.bw = float(bw)
        self.slice_fraction = float(slice_fraction)
        self.at_risk_compensator = bool(at_risk_compensator)
        n, p = self.X.shape

        self.fail = np.flatnonzero(self.delta == 1)
        t_fail = self.Y[self.fail]
        # all B-dependent work happens in descending time order, where the
        # risk set of a failure time is a prefix
        order = np.argsort(-self.Y, kind="stable")
        self._X_sorted = self.X[order]
        rank = np.empty(n, dtype=int)
        rank[order] = np.arange(n)
        self._fail_sorted = rank[self.fail]
        self._risk_end = np.searchsorted(-self.Y[order], -t_fail, side="right") - 1

        self.phi = np.array([phi_hat(self.X, self.Y, self.delta, t, self.slice_fraction) for t in t_fail])
        self._risk_mean = np.array([self.X[self.Y >= t].mean(axis=0) for t in t_fail])
        # in_risk[k, j]: the k-th subject in time order is at risk at failure j
        self._in_risk = np.arange(n)[:, None] <= self._risk_end[None, :]
        if self.at_risk_compensator:
            self._compensated = self._in_risk.astype(float)
        else:
            self._compensated = None
        # ties[a, b] = 1 when failures a and b share a time
        ties = t_fail[:, None] == t_fail[None, :]
        self._ties = sparse.csr_matrix(ties.astype(float)) if ties.sum() > t_fail.size else None
        self.n_degenerate = 0

    def psi_matrix(self, B):
        """The p x p matrix whose column-major vectorization is ``psi``."""
        Xs = self._X_sorted
        n = Xs.shape[0]
        m = self._fail_sorted.size
        K = kernel_matrix(Xs @ B, self.bw)
        den = np.cumsum(K, axis=1)[:, self._risk_end]
        W = K[:, self._fail_sorted]
        if self._ties is not None:
            W = np.asarray(self._ties.T @ W.T).T

        ok = den > EMPTY_WINDOW
        n_bad = n * m - int(np.count_nonzero(ok))
        self.n_degenerate = n_bad
        if n_bad:
            den = np.where(ok, den, 1.0)
            W *= ok
        # W becomes dN_i(t_j) - 1(at risk) * hazard_ij
        W /= den
        if self._compensated is not None:
            W *= self._compensated
        np.negative(W, out=W)
        W[self._fail_sorted, np.arange(m)] += 1.0

        # sum_i E_ij W_ij with E_ij = sum_{k at risk} K_ik X_k / den_ij is
        # sum_{k at risk at j} (K^T V)_kj X_k with V = W / den
        V = W / den
        if n_bad:
            V *= ok
        Q = K.T @ V
        Q *= self._in_risk
        smoothed = Q.T @ Xs
        if n_bad:
            smoothed += np.sum(np.where(ok, 0.0, W), axis=0)[:, None] * self._risk_mean
        centered = W.T @ Xs - smoothed
        return centered.T @ self.phi / n

    def psi(self, B):
        return self.psi_matrix(np.asarray(B, dtype=float)).ravel(order="F")

    def __call__(self, B):
        M = self.psi_matrix(np.asarray(B, dtype=float))
        return float(np.sum(M * M))


def psi_dm(B, X, Y, delta, bw=None, slice_fraction=None, at_risk_compensator=True):
    """Estimating equation ``psi`` (length ``p**2``) of the ``dm`` method at ``B``."""
    B = as_basis(B)
    bw = silverman_bw(B.shape[1], len(Y)) if bw is None else bw
    sf = default_slice_fraction(bw) if slice_fraction is None else slice_fraction
    return DMObjective(X, Y, delta, bw, sf, at_risk_compensator).psi(B)


def surv_objective(B, X, Y, delta, bw=None, slice_fraction=None, at_risk_compensator=True):
    """``psi^T psi`` for the ``dm`` equation."""
    psi = psi_dm(B, X, Y, delta, bw, slice_fraction, at_risk_compensator)
    return float(psi @ psi)


def initial_B_surv(X, Y, delta, ndr, slice_fraction=0.2, random_state=0):
    """Sliced inverse-regression starting value for censored data.

    Failures are sorted by time and cut into ``ceil(1 / slice_fraction)``
    slices (at least ``ndr``).  Each slice contributes its mean covariate
    minus the risk-set mean at the slice's first time; the leading left
    singular vectors of these columns span the estimate.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    fail = np.flatnonzero(np.asarray(delta) == 1)
    fail = fail[np.argsort(Y[fail], kind="stable")]
    n_slices = max(math.ceil(1.0 / slice_fraction), ndr)
    n_slices = min(n_slices, fail.size)
    columns = []
    for idx in np.array_split(fail, n_slices):
        t0 = Y[idx].min()
        columns.append(X[idx].mean(axis=0) - X[Y >= t0].mean(axis=0))
    return top_directions(np.column_stack(columns), ndr, random_state)


class SurvivalDR(DimensionReductionMixin):
    """Semiparametric dimension reduction for right-censored survival times.

    Parameters
    ----------
    ndr : int, default=2
        Structural dimension, the number of columns of ``B``.
    method : {'dm', 'dn', 'forward'}, default='dm'
        Only ``'dm'`` is implemented.
    bw : float, optional
        Kernel bandwidth on the standardized scale; Silverman's rule by default.
    slice_fraction : float, optional
        Slice width for the sliced averages; ``min(0.2, bw)`` by default.
    B_initial : array-like of shape (p, ndr), optional
        Starting value; orthonormalized if needed.
    ftol, gtol, btol, epsilon, maxitr :
        Solver controls, see :class:`~stiefeldr.solver.SolverControl`.
    n_threads : int, default=1
        Workers for the finite-difference gradient.

    Attributes
    ----------
    B_ : ndarray of shape (n_features, ndr)
        Estimated basis for standardized covariates.
    result_ : FitResult
    center_, scale_ : ndarray
        Standardization applied before fitting.
    bw_, slice_fraction_ : float
    """

    def __init__(
        self,
        ndr=2,
        method="dm",
        bw=None,
        slice_fraction=None,
        B_initial=None,
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
        self.slice_fraction = slice_fraction
        self.B_initial = B_initial
        self.ftol = ftol
        self.gtol = gtol
        self.btol = btol
        self.epsilon = epsilon
        self.maxitr = maxitr
        self.n_threads = n_threads

    def fit(self, X, y, censor):
        """Fit on covariates ``X``, observed times ``y`` and indicators ``censor``.

        ``censor[i] == 1`` means the failure of subject ``i`` was observed.
        """
        if self.method not in SURVIVAL_METHODS:
            raise ValueError(f"method must be one of {SURVIVAL_METHODS}, got {self.method!r}")
        if self.method != "dm":
            raise NotImplementedError(
                f"method {self.method!r} is not implemented; its estimating equation comes "
                "from the counting-process inverse regression literature and is not provided here"
            )
        X, Y, delta = check_survival_data(X, y, censor, int(self.ndr))
        n, p = X.shape
        ndr = check_ndr(self.ndr, p)
        self.n_features_in_ = p

        std = Standardizer(X)
        self.center_, self.scale_ = std.center, std.scale
        Xs = std(X)
        self.bw_ = silverman_bw(ndr, n) if self.bw is None else float(self.bw)
        self.slice_fraction_ = (
            default_slice_fraction(self.bw_) if self.slice_fraction is None else float(self.slice_fraction)
        )
        self.objective_ = DMObjective(Xs, Y, delta, self.bw_, self.slice_fraction_)
        B0 = self._start(None, p) if self.B_initial is not None else initial_B_surv(
            Xs, Y, delta, ndr, self.slice_fraction_
        )
        return self._solve(self.objective_, B0)
