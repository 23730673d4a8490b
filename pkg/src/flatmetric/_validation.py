"""Input validation helpers shared by the estimators and the functional API."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

SUPPORTED_DIMS = (2, 3)


def check_points(X, dim=None, name="points") -> np.ndarray:
    """Validate a point list and return it as a read-only float64 ``(n, dim)`` array.

    Empty inputs are accepted; ``[]`` becomes a ``(0, dim)`` array when ``dim``
    is known, ``(0, 2)`` otherwise.
    """
    try:
        raw = np.asarray(X, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name}: could not convert to a numeric array ({exc})") from None
    if raw.size == 0:
        width = raw.shape[1] if raw.ndim == 2 else (dim if dim is not None else 2)
        arr = np.zeros((0, width))
    else:
        try:
            arr = check_array(raw, dtype=np.float64, ensure_all_finite=True, input_name=name)
        except ValueError as exc:
            raise ValueError(f"{name}: {exc}") from None
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D array, got shape {arr.shape}")
    if arr.shape[1] not in SUPPORTED_DIMS:
        raise ValueError(f"{name}: points must have 2 or 3 coordinates, got {arr.shape[1]}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"{name}: dimension mismatch ({arr.shape[1]} != {dim})")
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


def check_weights(weights, n, name="weights") -> np.ndarray:
    w = np.array(weights, dtype=np.float64, copy=True).reshape(-1)
    if w.shape[0] != n:
        raise ValueError(f"{name}: expected {n} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name}: weights must be finite")
    if np.any(w <= 0):
        raise ValueError(f"{name}: weights must be strictly positive")
    w.setflags(write=False)
    return w


def check_positive(value, name) -> float:
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite positive number, got {value}")
    return value
