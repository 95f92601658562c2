"""Input checks shared by the estimators and the analysis functions."""
import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .errors import DegenerateDataError, InsufficientDataError

MIN_PREDICTOR_VARIANCE = 1e-15


def as_2d(X):
    """Accept a 1-D predictor vector or an (n, p) matrix; always return (n, p) float64."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return check_array(X, dtype=np.float64, ensure_min_samples=0)


def check_xy(X, y, min_samples=2):
    """Validate a regression problem and return ``(X, y)`` as (n, p) and (n,) arrays.

    Raises InsufficientDataError below ``min_samples`` rows and
    DegenerateDataError when every predictor column is constant.
    """
    X = as_2d(X)
    y = np.asarray(y, dtype=float).ravel()
    check_consistent_length(X, y)
    if X.shape[0] < min_samples:
        raise InsufficientDataError(f"need at least {min_samples} samples, got {X.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    if np.all(X.var(axis=0) <= MIN_PREDICTOR_VARIANCE):
        raise DegenerateDataError("predictor is constant")
    return X, y


def check_values(values, min_count, name="values"):
    """1-D finite float array with at least ``min_count`` entries."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < min_count:
        raise InsufficientDataError(f"{name}: need at least {min_count}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v
