"""Shared machinery for the dimension-reduction estimators."""

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .manifold import as_basis, feasibility_error, gram_schmidt, random_stiefel
from .solver import ObjectiveSpec, SolverControl, minimize_stiefel


class Standardizer:
    """Center columns and scale them to unit variance; constant columns keep scale 1."""

    def __init__(self, X):
        X = np.asarray(X, dtype=float)
        self.center = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        self.scale = scale

    def __call__(self, X):
        return (np.asarray(X, dtype=float) - self.center) / self.scale


def top_directions(M, ndr, random_state=0, symmetric=False):
    """Leading ``ndr`` directions of ``M``, orthonormalized.

    Uses left singular vectors, or eigenvectors ranked by absolute
    eigenvalue when ``symmetric``.  Falls back to a seeded random point
    with a warning when ``M`` has rank below ``ndr``.
    """
    p = M.shape[0]
    if symmetric:
        vals, vecs = np.linalg.eigh(M)
        order = np.argsort(-np.abs(vals), kind="stable")
        s, U = np.abs(vals[order]), vecs[:, order]
    else:
        U, s, _ = np.linalg.svd(M, full_matrices=True)
        s = np.concatenate([s, np.zeros(p - s.size)])
    if s.size < ndr or not s[0] > 0 or s[ndr - 1] <= 1e-12 * s[0]:
        warnings.warn(
            "initial estimation matrix is rank deficient; using a random starting point",
            RuntimeWarning,
            stacklevel=3,
        )
        return random_stiefel(p, ndr, random_state)
    return gram_schmidt(U[:, :ndr])


class DimensionReductionMixin(TransformerMixin, BaseEstimator):
    """Fit/transform plumbing shared by the survival and regression estimators.

    Subclasses build an objective on standardized covariates and call
    :meth:`_solve`.  After fitting, ``B_`` holds the basis on the
    standardized scale and ``center_``/``scale_`` the standardization.
    """

    def _control(self):
        return SolverControl(
            ftol=self.ftol,
            gtol=self.gtol,
            btol=self.btol,
            epsilon=self.epsilon,
            maxitr=self.maxitr,
            num_threads=self.n_threads,
        )

    def _start(self, B_default, p):
        if self.B_initial is None:
            return B_default
        B0 = as_basis(self.B_initial, "B_initial")
        if B0.shape != (p, self.ndr):
            raise ValueError(f"B_initial must have shape ({p}, {self.ndr}), got {B0.shape}")
        return B0 if feasibility_error(B0) <= 1e-10 else gram_schmidt(B0)

    def _solve(self, objective, B0):
        res = minimize_stiefel(ObjectiveSpec(objective), B0, self._control())
        self.initial_B_ = B0
        self.B_ = res.B
        self.result_ = res
        self.n_iter_ = res.iterations
        return self

    def transform(self, X):
        """Project ``X`` onto the fitted directions, ``standardize(X) @ B_``."""
        check_is_fitted(self, "B_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return ((X - self.center_) / self.scale_) @ self.B_

    def objective(self, B=None):
        """Value of the fitted objective at ``B`` (default: the estimate)."""
        check_is_fitted(self, "B_")
        return self.objective_(self.B_ if B is None else np.asarray(B, dtype=float))
