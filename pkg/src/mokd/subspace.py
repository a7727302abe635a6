"""Teacher/student feature alignment in a shared space with a diagonal, possibly indefinite metric.

Both feature vectors are mapped *into* an ``n``-dimensional space by
column-orthonormal projections ``p_t`` (``n x n_t``) and ``p_s``
(``n x n_s``) and compared with ``s = sum_i d_i * (p_t z_t)_i * (p_s z_s)_i``.
The diagonal ``d`` is free in sign.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError
from .numerics import as_matrix, as_vector, qr_orthonormalize


@dataclass
class SubspaceMap:
    p_t: np.ndarray
    p_s: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.p_t = as_matrix(self.p_t, "p_t")
        self.p_s = as_matrix(self.p_s, "p_s")
        self.d = as_vector(self.d, "d")
        n = self.d.size
        if self.p_t.shape[0] != n or self.p_s.shape[0] != n:
            raise DimensionError(
                f"projections must have {n} rows, got p_t {self.p_t.shape} and p_s {self.p_s.shape}"
            )
        if n < self.p_t.shape[1] or n < self.p_s.shape[1]:
            raise DimensionError(f"shared dimension {n} is smaller than a feature dimension")

    @property
    def n(self) -> int:
        return self.d.size

    @property
    def n_t(self) -> int:
        return self.p_t.shape[1]

    @property
    def n_s(self) -> int:
        return self.p_s.shape[1]

    def copy(self) -> "SubspaceMap":
        return SubspaceMap(self.p_t.copy(), self.p_s.copy(), self.d.copy())


@dataclass(frozen=True)
class SimilarityGrads:
    d_zs: np.ndarray
    d_d: np.ndarray
    d_pt: np.ndarray
    d_ps: np.ndarray


def project(p, z) -> np.ndarray:
    """``p @ z``; accepts a single vector or a batch of row vectors."""
    p = np.asarray(p, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != p.shape[1]:
        raise DimensionError(f"project: matrix has {p.shape[1]} columns, feature has {z.shape[-1]} entries")
    return z @ p.T


def _check_pair(m: SubspaceMap, z_t, z_s):
    z_t = np.asarray(z_t, dtype=np.float64)
    z_s = np.asarray(z_s, dtype=np.float64)
    if z_t.shape[-1] != m.n_t or z_s.shape[-1] != m.n_s:
        raise DimensionError(
            f"features ({z_t.shape[-1]}, {z_s.shape[-1]}) do not match map ({m.n_t}, {m.n_s})"
        )
    return z_t, z_s


def similarity(m: SubspaceMap, z_t, z_s) -> float:
    z_t, z_s = _check_pair(m, z_t, z_s)
    a = m.p_t @ z_t
    b = m.p_s @ z_s
    return float(np.sum(m.d * a * b))


def similarity_grads(m: SubspaceMap, z_t, z_s) -> SimilarityGrads:
    """Analytic partial derivatives of :func:`similarity`."""
    z_t, z_s = _check_pair(m, z_t, z_s)
    a = m.p_t @ z_t
    b = m.p_s @ z_s
    da = m.d * b
    db = m.d * a
    return SimilarityGrads(
        d_zs=m.p_s.T @ db,
        d_d=a * b,
        d_pt=np.outer(da, z_t),
        d_ps=np.outer(db, z_s),
    )


def retract(m: SubspaceMap) -> SubspaceMap:
    """Restore orthonormal columns of both projections; ``d`` is untouched."""
    return replace(m, p_t=qr_orthonormalize(m.p_t), p_s=qr_orthonormalize(m.p_s), d=m.d.copy())


def clamp_metric(m: SubspaceMap, bound: float = 1.0) -> SubspaceMap:
    """Project ``d`` onto the box ``[-bound, bound]``.

    The cosine-normalized similarity is unbounded in the scale of ``d``, so
    training bounds the metric the same way it keeps the projections orthonormal.
    """
    return replace(m, d=np.clip(m.d, -bound, bound))


def init_subspace(n: int, n_t: int, n_s: int, rng: np.random.Generator) -> SubspaceMap:
    if min(n, n_t, n_s) < 1:
        raise DimensionError("subspace dimensions must be positive")
    if n < max(n_t, n_s):
        raise DimensionError(f"shared dimension n={n} must be >= max(n_t={n_t}, n_s={n_s})")
    p_t = qr_orthonormalize(rng.standard_normal((n, n_t)))
    p_s = qr_orthonormalize(rng.standard_normal((n, n_s)))
    return SubspaceMap(p_t=p_t, p_s=p_s, d=np.ones(n))
