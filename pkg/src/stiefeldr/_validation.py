import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DataValidationError


def check_survival_data(X, Y, delta, ndr=1):
    """Validate a censored survival sample and return float arrays.

    Observed times must be positive and finite, indicators in {0, 1}, at
    least one failure observed and ``n >= 2 * ndr``.
    """
    X = check_array(X, dtype=float, ensure_min_samples=2)
    Y = np.asarray(Y, dtype=float).ravel()
    delta = np.asarray(delta).ravel()
    n = X.shape[0]
    if Y.shape[0] != n or delta.shape[0] != n:
        raise DataValidationError(
            f"X has {n} rows but times has {Y.shape[0]} and censor has {delta.shape[0]}"
        )
    bad = np.flatnonzero(~np.isfinite(Y) | ~(Y > 0))
    if bad.size:
        raise DataValidationError("observed times must be positive and finite", bad)
    if delta.dtype == bool:
        delta = delta.astype(int)
    delta_f = np.asarray(delta, dtype=float)
    bad = np.flatnonzero(~np.isin(delta_f, (0.0, 1.0)))
    if bad.size:
        raise DataValidationError("censoring indicators must be 0 or 1", bad)
    delta = delta_f.astype(int)
    if not delta.any():
        raise DataValidationError("at least one failure (censor == 1) is required")
    if n < 2 * ndr:
        raise DataValidationError(f"need at least {2 * ndr} observations for ndr={ndr}, got {n}")
    return X, Y, delta


def check_regression_data(X, y, ndr=1):
    X = check_array(X, dtype=float, ensure_min_samples=2)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise DataValidationError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise DataValidationError("outcome contains non-finite values", bad)
    if X.shape[0] < 2 * ndr:
        raise DataValidationError(f"need at least {2 * ndr} observations for ndr={ndr}")
    return X, y


def check_ndr(ndr, p):
    ndr = int(ndr)
    if not 1 <= ndr <= p:
        raise ValueError(f"ndr must lie in [1, {p}], got {ndr}")
    return ndr
