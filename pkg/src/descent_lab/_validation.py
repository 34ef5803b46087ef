"""Input validation helpers shared by the public entry points."""

import numbers

import numpy as np

from .errors import DimensionMismatchError, NonFiniteError


def check_point(x, dim=None, name="x"):
    """Return ``x`` as a finite 1-D float64 array.

    Scalars are promoted to length-1 arrays. A copy is always made so the
    caller's buffer is never aliased.
    """
    arr = np.array(x, dtype=np.float64)
    if arr.ndim == 0 or (arr.ndim == 2 and arr.shape[0] == 1):
        arr = arr.reshape(-1)
    elif arr.ndim != 1:
        raise DimensionMismatchError(
            f"{name} must be a point (1-D), got shape {arr.shape}"
        )
    if arr.size == 0:
        raise DimensionMismatchError(f"{name} must have at least one coordinate")
    if dim is not None and arr.size != dim:
        raise DimensionMismatchError(f"{name} has dimension {arr.size}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} has non-finite coordinates: {arr}")
    return arr


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_int(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)
