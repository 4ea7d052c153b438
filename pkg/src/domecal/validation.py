"""Input validation helpers shared across the public API."""

from __future__ import annotations

import numpy as np

from .errors import InputError


def as_float_array(value, shape: tuple[int, ...] | None = None, name: str = "array") -> np.ndarray:
    """Coerce to a float64 ndarray, optionally enforcing a shape.

    A -1 in ``shape`` matches any size along that axis.
    """
    arr = np.asarray(value, dtype=np.float64)
    if shape is not None:
        if arr.ndim != len(shape) or any(
            s != -1 and s != a for s, a in zip(shape, arr.shape)
        ):
            raise InputError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def as_unit_vector(value, name: str = "vector") -> np.ndarray:
    """Coerce to a unit 3-vector."""
    v = as_float_array(value, (3,), name)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise InputError(f"{name} must be nonzero")
    return v / n


def check_rotation(R, tol: float, name: str = "rotation") -> np.ndarray:
    """Validate a proper rotation matrix (orthonormal, det +1)."""
    R = as_float_array(R, (3, 3), name)
    if np.max(np.abs(R @ R.T - np.eye(3))) > tol:
        raise InputError(f"{name} is not orthonormal within {tol}")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise InputError(f"{name} must have determinant +1")
    return R


def check_corners(corners, n_expected: int, name: str = "corners") -> np.ndarray:
    """Validate an (N, 2) pixel array with the expected corner count."""
    arr = as_float_array(corners, (-1, 2), name)
    if arr.shape[0] != n_expected:
        raise InputError(f"{name}: expected {n_expected} corners, got {arr.shape[0]}")
    return arr


def readonly(arr: np.ndarray) -> np.ndarray:
    """Return a non-writeable view so frozen dataclasses stay immutable."""
    out = np.asarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out
