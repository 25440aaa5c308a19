"""Minimal dense numeric substrate.

Small row-major matrices backed by numpy, a counted ``matmul``, masked
triangular views, and forward-substitution inversion of unit-lower-triangular
matrices.  64-bit floats are the verification default; 32-bit exists for the
benchmark path only (``KDA_LAB_PRECISION=f32`` or :func:`set_precision`).

The matmul counter is accumulated per thread and merged on demand, so
concurrent verification runs do not contend on a shared counter.
"""

from __future__ import annotations

import os
import threading
from contextlib import contextmanager

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_VALID_PRECISIONS = ("f32", "f64")

_precision = os.environ.get("KDA_LAB_PRECISION", "f64")
if _precision not in _VALID_PRECISIONS:
    raise ContractError(f"KDA_LAB_PRECISION must be one of {_VALID_PRECISIONS}")

_checked = True

_registry_lock = threading.Lock()
_registry: list["_ThreadCounts"] = []


class _ThreadCounts(threading.local):
    def __init__(self):
        self.matmul = 0
        self.score_matrices = 0
        with _registry_lock:
            _registry.append(self)


_counts = _ThreadCounts()


def dtype():
    """Active floating dtype (np.float64 unless f32 benchmark mode is on)."""
    return np.float64 if _precision == "f64" else np.float32


def set_precision(p: str):
    global _precision
    if p not in _VALID_PRECISIONS:
        raise ContractError(f"precision must be one of {_VALID_PRECISIONS}, got {p!r}")
    _precision = p


def get_precision() -> str:
    return _precision


def set_checked(flag: bool):
    global _checked
    _checked = bool(flag)


def is_checked() -> bool:
    return _checked


@contextmanager
def precision(p: str):
    old = _precision
    set_precision(p)
    try:
        yield
    finally:
        set_precision(old)


@contextmanager
def checked(flag: bool):
    old = _checked
    set_checked(flag)
    try:
        yield
    finally:
        set_checked(old)


def reset_counters():
    with _registry_lock:
        for c in _registry:
            c.matmul = 0
            c.score_matrices = 0


def counter_totals() -> dict:
    """Merge per-thread counters into a single tally."""
    with _registry_lock:
        return {
            "matmul": sum(c.matmul for c in _registry),
            "score_matrices": sum(c.score_matrices for c in _registry),
        }


def count_score_matrix(n: int = 1):
    """Record construction of ``n`` secondary (chunk-level) score matrices."""
    _counts.score_matrices += n


def as_matrix(data, rows=None, cols=None) -> np.ndarray:
    """Validate and return a 2-D row-major array in the active dtype.

    In checked mode rejects non-finite entries and shape mismatches.
    """
    m = np.ascontiguousarray(np.asarray(data, dtype=dtype()))
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise ShapeError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ShapeError(f"expected {cols} cols, got {m.shape[1]}")
    if _checked and not np.isfinite(m).all():
        raise NumericError("matrix contains NaN/Inf")
    return m


def check_finite(m: np.ndarray, what: str = "array", step=None):
    if _checked and not np.isfinite(m).all():
        raise NumericError(f"{what} contains NaN/Inf", step=step)


def matmul(a, b) -> np.ndarray:
    """Standard matrix product; every call bumps the per-thread matmul counter."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    _counts.matmul += 1
    out = a @ b
    if _checked:
        check_finite(out, "matmul result")
    return out


def tril(m: np.ndarray) -> np.ndarray:
    """Lower-triangular view including the diagonal; entries above are zeroed."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"tril expects a square matrix, got {m.shape}")
    return np.tril(m)


def strict_tril(m: np.ndarray) -> np.ndarray:
    """Strictly lower-triangular view; diagonal and above are zeroed."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"strict_tril expects a square matrix, got {m.shape}")
    return np.tril(m, -1)


def masked(m: np.ndarray, mask: str) -> np.ndarray:
    """Apply a named triangular mask; ``mask`` is "tril" or "strict_tril"."""
    if mask == "tril":
        return tril(m)
    if mask == "strict_tril":
        return strict_tril(m)
    raise ContractError(f"unknown mask {mask!r}")


def check_unit_lower_triangular(l: np.ndarray):
    l = np.asarray(l)
    if l.ndim != 2 or l.shape[0] != l.shape[1]:
        raise ShapeError(f"expected a square matrix, got {l.shape}")
    if np.any(np.triu(l, 1) != 0):
        raise ContractError("matrix has nonzero entries above the diagonal")
    if np.any(np.diag(l) != 1):
        raise ContractError("matrix diagonal is not identically one")


def tril_inverse_unit(l: np.ndarray) -> np.ndarray:
    """Invert a unit-lower-triangular matrix by row-wise forward substitution.

    Row i of the inverse is obtained from rows < i already solved:
    ``x[i, :i] = -l[i, :i] @ x[:i, :i]``; the diagonal stays one.
    """
    l = np.asarray(l, dtype=dtype())
    if _checked:
        check_unit_lower_triangular(l)
    elif np.any(np.diag(l) != 1):
        raise ContractError("matrix diagonal is not identically one")
    n = l.shape[0]
    x = np.eye(n, dtype=l.dtype)
    for i in range(1, n):
        x[i, :i] = -(l[i, :i] @ x[:i, :i])
    return x
