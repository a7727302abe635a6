"""Central finite differences for checking analytic gradients."""

from __future__ import annotations

import numpy as np


def central_difference(f, x, h: float = 1e-6) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``x`` (any shape), one coordinate at a time."""
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor: float = 1e-10) -> float:
    """``||a - n|| / max(||a||, ||n||, floor)`` in the Euclidean norm."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    den = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / den)


def check_gradient(f, grad, x, h: float = 1e-6, tol: float = 1e-6) -> tuple[bool, float]:
    """Compare ``grad`` (the analytic gradient at ``x``) with central differences of ``f``."""
    err = relative_error(grad, central_difference(f, x, h))
    return err <= tol, err
