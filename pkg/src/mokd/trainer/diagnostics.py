"""Gradient-dynamics scores and the Pareto dominance predicate."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, DomainError
from ..numerics import dot, norm


def conflict_score(g_dist, g_task) -> float:
    """Raw inner product of the two task gradients; negative means the objectives conflict."""
    return dot(g_dist, g_task)


def dominance_score(g_dist, g_task) -> float:
    """``log10(||g_dist|| / ||g_task||)``; strongly negative when the task gradient dominates."""
    nt = norm(g_task)
    if nt == 0.0:
        raise DomainError("dominance score undefined: task gradient is zero")
    nd = norm(g_dist)
    if nd == 0.0:
        return -math.inf
    return math.log10(nd / nt)


def pareto_dominates(a, b) -> bool:
    """True iff ``a`` is strictly lower than ``b`` in every coordinate."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"pareto_dominates: lengths differ {a.shape} vs {b.shape}")
    return bool(np.all(a < b))
