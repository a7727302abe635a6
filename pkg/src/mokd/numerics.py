"""Dense float64 kernels and seeded random streams used across the package.

Vectors and matrices are plain ``numpy.ndarray`` objects in float64. The
helpers here validate shape and finiteness once, at the boundary, so the
numerical code downstream can stay branch-free.
"""

from __future__ import annotations

import numpy as np

from .errors import DegeneracyError, DimensionError

# Column is treated as dependent when |R_jj| falls below this fraction of the largest |R_ii|.
RANK_TOL = 1e-12


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Return ``values`` as a 1-D float64 array, rejecting empty or non-finite input."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise DimensionError(f"{name} must have length >= 1")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"dot: length mismatch {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def norm(a) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    return float(np.sqrt(np.dot(a, a)))


def softmax(a) -> np.ndarray:
    """Numerically safe softmax along the last axis (max-subtracted)."""
    a = np.asarray(a, dtype=np.float64)
    z = a - np.max(a, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    z = a - np.max(a, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def qr_orthonormalize(m) -> np.ndarray:
    """Orthonormalize the columns of a tall matrix.

    The result is the ``Q`` factor of a thin QR decomposition with the sign
    convention that every diagonal entry of ``R`` is non-negative, which makes
    the map deterministic and idempotent.

    Raises:
        DimensionError: if ``m`` has more columns than rows.
        DegeneracyError: if the columns are numerically linearly dependent.
    """
    m = as_matrix(m)
    rows, cols = m.shape
    if rows < cols:
        raise DimensionError(f"qr_orthonormalize needs rows >= cols, got {m.shape}")
    q, r = np.linalg.qr(m, mode="reduced")
    diag = np.diag(r)
    scale = np.max(np.abs(diag))
    if scale == 0.0 or np.min(np.abs(diag)) <= RANK_TOL * scale:
        raise DegeneracyError("qr_orthonormalize: input columns are rank deficient")
    signs = np.where(diag < 0.0, -1.0, 1.0)
    return q * signs


def orthonormality_error(p) -> float:
    """max |PᵀP − I| over all entries."""
    p = np.asarray(p, dtype=np.float64)
    return float(np.max(np.abs(p.T @ p - np.eye(p.shape[1]))))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``seed`` and optional stream ids.

    Independent sub-streams come from distinct ``stream`` tuples, so no global
    RNG state is ever touched.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([int(seed), *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))
