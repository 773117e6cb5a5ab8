"""Points on the Stiefel manifold and distances between column spaces.

A point on the Stiefel manifold St(p, d) is a ``p x d`` array ``B`` with
orthonormal columns, ``B.T @ B == I_d``.  Points are plain float ndarrays;
:func:`check_stiefel` enforces the feasibility invariant where it matters.
"""

import numpy as np

from .exceptions import DimensionError, MissingArgumentError, RankDeficiencyError

#: Largest tolerated ``||B^T B - I||_F`` for a feasible point.
FEASIBILITY_TOL = 1e-10

#: Residual column norm below which Gram-Schmidt declares rank deficiency.
RANK_TOL = 1e-12

DISTANCE_METHODS = ("dist", "trace", "canonical", "sine")


def as_basis(M, name="B"):
    """Return ``M`` as a 2-d float array, promoting vectors to one column."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise DimensionError(f"{name} must be a vector or a matrix, got ndim={M.ndim}")
    if M.shape[1] < 1 or M.shape[0] < M.shape[1]:
        raise DimensionError(f"{name} must satisfy p >= d >= 1, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def feasibility_error(B):
    """Frobenius norm of ``B^T B - I``."""
    B = np.asarray(B, dtype=float)
    return float(np.linalg.norm(B.T @ B - np.eye(B.shape[1])))


def is_feasible(B, tol=FEASIBILITY_TOL):
    return feasibility_error(B) <= tol


def check_stiefel(B, tol=FEASIBILITY_TOL, name="B"):
    """Validate that ``B`` is a finite ``p x d`` matrix with orthonormal columns."""
    B = as_basis(B, name)
    err = feasibility_error(B)
    if err > tol:
        raise ValueError(f"{name} is not orthonormal: ||B^T B - I||_F = {err:.3e}")
    return B


def gram_schmidt(M, tol=RANK_TOL):
    """Orthonormalize the columns of ``M`` by modified Gram-Schmidt.

    Each column is orthogonalized twice against the previously accepted
    columns, which keeps the loss of orthogonality at machine precision
    even for badly conditioned input.

    Parameters
    ----------
    M : array-like of shape (p, d)
        Full column rank matrix, ``p >= d``.
    tol : float
        Residual norm below which a column is rejected as dependent.

    Returns
    -------
    Q : ndarray of shape (p, d)
        Orthonormal columns with ``span(Q[:, :k]) == span(M[:, :k])`` for
        every ``k``.

    Raises
    ------
    RankDeficiencyError
        If some column's residual norm falls below ``tol``.
    """
    Q = np.array(as_basis(M, "M"), dtype=float, copy=True)
    d = Q.shape[1]
    for j in range(d):
        v = Q[:, j]
        for _ in range(2):
            for k in range(j):
                v -= (Q[:, k] @ v) * Q[:, k]
        nrm = np.linalg.norm(v)
        if nrm < tol:
            raise RankDeficiencyError(j, nrm)
        Q[:, j] = v / nrm
    return Q


def random_stiefel(p, d, random_state=None):
    """Draw a point of St(p, d) by orthonormalizing a Gaussian matrix."""
    rng = np.random.default_rng(random_state)
    return gram_schmidt(rng.standard_normal((p, d)))


def projection_matrix(B):
    """Orthogonal projector ``B (B^T B)^{-1} B^T`` onto the column space of ``B``."""
    B = as_basis(B)
    return B @ np.linalg.solve(B.T @ B, B.T)


def _canonical_correlations(U, V):
    U = U - U.mean(axis=0)
    V = V - V.mean(axis=0)
    qu, _ = np.linalg.qr(U)
    qv, _ = np.linalg.qr(V)
    s = np.linalg.svd(qu.T @ qv, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def distance(s1, s2, method="dist", x=None):
    """Distance or similarity between the column spaces of ``s1`` and ``s2``.

    Both bases may be arbitrary full-column-rank matrices; only their spans
    matter.

    Parameters
    ----------
    s1, s2 : array-like of shape (p, d1), (p, d2)
    method : {'dist', 'trace', 'canonical', 'sine'}
        * ``dist``: Frobenius norm of the difference of the projectors.
        * ``trace``: ``tr(P1 P2) / d``; requires ``d1 == d2``.
        * ``canonical``: mean canonical correlation between ``x @ s1`` and
          ``x @ s2``.
        * ``sine``: ``||sin Theta||_F``, the Frobenius norm of ``P1 (I - P2)``.
    x : array-like of shape (n, p), optional
        Design matrix, required for ``method='canonical'``.
    """
    if method not in DISTANCE_METHODS:
        raise ValueError(f"method must be one of {DISTANCE_METHODS}, got {method!r}")
    s1 = as_basis(s1, "s1")
    s2 = as_basis(s2, "s2")
    if s1.shape[0] != s2.shape[0]:
        raise DimensionError(
            f"s1 and s2 must share the ambient dimension, got {s1.shape[0]} and {s2.shape[0]}"
        )

    if method == "canonical":
        if x is None:
            raise MissingArgumentError("method='canonical' requires the design matrix x")
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != s1.shape[0]:
            raise DimensionError(f"x must have {s1.shape[0]} columns, got shape {x.shape}")
        return float(np.mean(_canonical_correlations(x @ s1, x @ s2)))

    P1 = projection_matrix(s1)
    P2 = projection_matrix(s2)
    if method == "dist":
        return float(np.linalg.norm(P1 - P2))
    if method == "trace":
        if s1.shape[1] != s2.shape[1]:
            raise DimensionError("method='trace' requires bases with equal column counts")
        return float(np.clip(np.trace(P1 @ P2) / s1.shape[1], 0.0, 1.0))
    # sine: singular values of P1 (I - P2) are the sines of the principal angles
    resid = P1 - P1 @ P2
    return float(np.sqrt(np.sum(np.linalg.svd(resid, compute_uv=False) ** 2)))
