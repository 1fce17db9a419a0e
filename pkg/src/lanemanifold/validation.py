"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np

from .exceptions import DimensionMismatchError, EmptyInputError, NonFiniteError


def check_finite(a, name="array"):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    return a


def check_features(X, name="features"):
    """Coerce to a finite 2-D float array of shape (n_samples, d)."""
    X = check_finite(X, name)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyInputError(f"{name} is empty")
    return X


def check_matrix(a, shape=None, name="matrix"):
    a = check_finite(a, name)
    if a.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {a.shape}")
    if shape is not None:
        want = tuple(shape)
        if any(w is not None and w != s for w, s in zip(want, a.shape)):
            raise DimensionMismatchError(f"{name} has shape {a.shape}, expected {want}")
    return a


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
