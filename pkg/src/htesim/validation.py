"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np


def check_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array with finite entries."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains NaN or infinite entries")
    return X


def check_vector(y, n: int | None = None, name: str = "y") -> np.ndarray:
    """Coerce to a contiguous float64 1-D array, optionally checking length."""
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if n is not None and y.shape[0] != n:
        raise ValueError(f"{name} has length {y.shape[0]}, expected {n}")
    if not np.isfinite(y).all():
        raise ValueError(f"{name} contains NaN or infinite entries")
    return y


def check_binary(d, n: int | None = None, name: str = "d") -> np.ndarray:
    """Validate a 0/1 vector."""
    d = check_vector(d, n, name)
    if not np.isin(d, (0.0, 1.0)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return d


def check_weights(w, n: int, name: str = "sample_weight") -> np.ndarray:
    w = check_vector(w, n, name)
    if (w < 0).any():
        raise ValueError(f"{name} must be nonnegative")
    if not (w > 0).any():
        raise ValueError(f"{name} must not be all zero")
    return w


def check_both_arms(d, name: str = "d") -> None:
    d = np.asarray(d)
    if d.min() == d.max():
        raise ValueError(f"{name} contains a single class; both treatment arms are required")
