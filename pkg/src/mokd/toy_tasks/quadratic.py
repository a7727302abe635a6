"""Two strictly convex quadratics with an analytic Pareto set.

``L_i(theta) = 0.5 (theta - c_i)^T A_i (theta - c_i) + b_i``. For SPD
``A_i`` the Pareto set is the curve of weighted-sum minimizers
``theta(w) = (w A_1 + (1-w) A_2)^{-1} (w A_1 c_1 + (1-w) A_2 c_2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from ..errors import DegeneracyError, DimensionError
from ..numerics import as_vector, qr_orthonormalize


@dataclass(frozen=True, eq=False)
class QuadraticPair:
    a1: np.ndarray
    a2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    b1: float = 1.0
    b2: float = 1.0
    _grids: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        for name in ("a1", "a2", "c1", "c2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        d = self.c1.size
        for name in ("a1", "a2"):
            a = getattr(self, name)
            if a.shape != (d, d):
                raise DimensionError(f"{name} must be {d}x{d}, got {a.shape}")
            if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(a).min() <= 0:
                raise ValueError(f"{name} must be positive definite")
        if self.c2.size != d:
            raise DimensionError("c1 and c2 differ in length")
        if not (self.b1 > 0 and self.b2 > 0):
            raise ValueError("offsets b1, b2 must be positive")

    @property
    def dim(self) -> int:
        return self.c1.size

    @cached_property
    def _gen_eig(self):
        # A1 V = A2 V diag(lam) with V^T A2 V = I
        lam, v = scipy.linalg.eigh(self.a1, self.a2)
        return lam, v

    def front(self, w) -> np.ndarray:
        """Pareto points for an array of weights, one row per weight."""
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        lam, v = self._gen_eig
        r = np.outer(w, self.a1 @ self.c1) + np.outer(1.0 - w, self.a2 @ self.c2)
        coef = (r @ v) / (w[:, None] * lam[None, :] + (1.0 - w)[:, None])
        return coef @ v.T

    def front_grid(self, samples: int) -> np.ndarray:
        pts = self._grids.get(samples)
        if pts is None:
            pts = self._grids[samples] = self.front(np.linspace(0.0, 1.0, samples))
        return pts


def quad_losses(q: QuadraticPair, theta):
    """Return ``(losses, g1, g2)`` at ``theta``."""
    theta = as_vector(theta, "theta")
    if theta.size != q.dim:
        raise DimensionError(f"theta has {theta.size} entries, pair is {q.dim}-dimensional")
    r1 = theta - q.c1
    r2 = theta - q.c2
    g1 = q.a1 @ r1
    g2 = q.a2 @ r2
    losses = np.array([0.5 * r1 @ g1 + q.b1, 0.5 * r2 @ g2 + q.b2])
    return losses, g1, g2


def quad_pareto_point(q: QuadraticPair, w: float) -> np.ndarray:
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"w must lie in [0, 1], got {w}")
    m = w * q.a1 + (1.0 - w) * q.a2
    rhs = w * q.a1 @ q.c1 + (1.0 - w) * q.a2 @ q.c2
    try:
        return np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError(f"combined curvature matrix is singular at w={w}") from exc


def pareto_distance(q: QuadraticPair, theta, samples: int = 2001, refine: bool = True) -> float:
    """Distance from ``theta`` to the Pareto set.

    Takes the minimum over a uniform grid of ``samples`` weights and, with
    ``refine``, polishes it by a bounded scalar search between the grid
    neighbours of the best grid point. The refined value never exceeds the
    grid value.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    theta = as_vector(theta, "theta")
    w = np.linspace(0.0, 1.0, samples)
    pts = q.front_grid(samples)
    dist = np.linalg.norm(pts - theta, axis=1)
    j = int(np.argmin(dist))
    best = float(dist[j])
    if not refine:
        return best
    lo, hi = w[max(j - 1, 0)], w[min(j + 1, samples - 1)]
    res = minimize_scalar(
        lambda x: float(np.linalg.norm(q.front(x)[0] - theta)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return min(best, float(res.fun))


def random_spd(rng: np.random.Generator, dim: int, eig_range=(1.0, 4.0)) -> np.ndarray:
    q = qr_orthonormalize(rng.standard_normal((dim, dim)))
    lam = rng.uniform(*eig_range, size=dim)
    a = (q * lam) @ q.T
    return 0.5 * (a + a.T)


def random_quadratic_pair(rng: np.random.Generator, dim: int, eig_range=(1.0, 4.0), spread: float = 1.0) -> QuadraticPair:
    return QuadraticPair(
        a1=random_spd(rng, dim, eig_range),
        a2=random_spd(rng, dim, eig_range),
        c1=spread * rng.standard_normal(dim),
        c2=spread * rng.standard_normal(dim),
    )


def conflict_quadratic_pair(rng: np.random.Generator, dim: int, eig_range=(1.0, 4.0), spread: float = 1.0) -> QuadraticPair:
    """Shared curvature and mirrored minimizers: the gradients at the origin are anti-parallel."""
    a = random_spd(rng, dim, eig_range)
    c = spread * rng.standard_normal(dim)
    return QuadraticPair(a1=a, a2=a.copy(), c1=c, c2=-c)
