"""Min-norm task weighting on the probability simplex.

For two tasks the weights minimizing ``0.5 * ||pi_1 g_1 + pi_2 g_2||**2`` have
a closed form in the entries of the 2x2 Gram matrix. The unconstrained-sign
solution is clamped back onto the simplex, which is exact for two tasks
because the objective restricted to the segment is a convex parabola.

For any number of tasks :func:`solve_simplex_qp` runs projected gradient
descent with a Frank-Wolfe duality-gap certificate; it doubles as the
reference oracle for the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegeneracyError, DimensionError
from .numerics import as_vector, dot

DEN_EPS = 1e-15


@dataclass(frozen=True)
class GramMatrix2:
    """Entries of the Gram matrix of two gradients (``g12 == g21``)."""

    g11: float
    g12: float
    g22: float

    @property
    def denominator(self) -> float:
        """``g11 + g22 - 2 g12``, i.e. ``||g1 - g2||**2``."""
        return self.g11 + self.g22 - 2.0 * self.g12

    @property
    def det(self) -> float:
        return self.g11 * self.g22 - self.g12 * self.g12

    def as_array(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])


@dataclass(frozen=True)
class BaselineWeights:
    """Fixed loss-combination weights of the classic weighted-sum objective."""

    alpha1: float = 0.5
    alpha2: float = 0.5

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError(f"baseline weights must be positive, got ({self.alpha1}, {self.alpha2})")

    def normalized(self) -> np.ndarray:
        a = np.array([self.alpha1, self.alpha2])
        return a / a.sum()


def check_simplex(pi, atol: float = 1e-12) -> np.ndarray:
    """Validate that ``pi`` lies on the probability simplex and return it as an array."""
    pi = as_vector(pi, "pi")
    if np.any(pi < 0.0) or np.any(pi > 1.0) or abs(pi.sum() - 1.0) > atol:
        raise ValueError(f"weights are not on the simplex: {pi.tolist()}")
    return pi


def as_jacobian(grads) -> np.ndarray:
    """Stack per-task gradients as rows of a ``k x n`` array."""
    j = np.asarray(grads, dtype=np.float64)
    if j.ndim == 1:
        j = j[None, :]
    if j.ndim != 2 or j.shape[0] < 1 or j.shape[1] < 1:
        raise DimensionError(f"task gradients must form a k x n array, got shape {j.shape}")
    if not np.all(np.isfinite(j)):
        raise ValueError("task gradients have non-finite entries")
    return j


def den_eps(g: GramMatrix2) -> float:
    return DEN_EPS * max(g.g11, g.g22, 1.0)


def gram2(g1, g2) -> GramMatrix2:
    g1 = as_vector(g1, "g1")
    g2 = as_vector(g2, "g2")
    if g1.shape != g2.shape:
        raise DimensionError(f"gram2: gradient lengths differ ({g1.size} vs {g2.size})")
    return GramMatrix2(g11=dot(g1, g1), g12=dot(g1, g2), g22=dot(g2, g2))


def solve_closed_form_raw(g: GramMatrix2) -> tuple[float, float]:
    """Equality-constrained minimizer; entries may fall outside [0, 1].

    Raises:
        DegeneracyError: when ``||g1 - g2||**2`` is numerically zero.
    """
    den = g.denominator
    if den <= den_eps(g):
        raise DegeneracyError(f"degenerate denominator {den!r}: gradients coincide")
    # both weights from their own numerators: 1 - pi1 loses the small weight to cancellation
    return (g.g22 - g.g12) / den, (g.g11 - g.g12) / den


def solve_closed_form(g: GramMatrix2) -> np.ndarray:
    """Simplex minimizer of ``0.5 * pi^T G pi`` for two tasks.

    Returns ``(0.5, 0.5)`` when the two gradients coincide (every weighting is
    optimal there), otherwise the raw closed form clamped to the nearest vertex.
    """
    den = g.denominator
    if den <= den_eps(g):
        return np.array([0.5, 0.5])
    pi1, pi2 = (g.g22 - g.g12) / den, (g.g11 - g.g12) / den
    if pi1 <= 0.0:
        return np.array([0.0, 1.0])
    if pi2 <= 0.0:
        return np.array([1.0, 0.0])
    return np.array([pi1, pi2])


def combine(grads, pi) -> np.ndarray:
    """``sum_i pi_i * grads[i]``."""
    j = as_jacobian(grads)
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (j.shape[0],):
        raise DimensionError(f"combine: {pi.size} weights for {j.shape[0]} gradients")
    out = pi[0] * j[0]
    for w, row in zip(pi[1:], j[1:]):
        out = out + w * row
    return out


def combine_fixed(g1, g2, w: BaselineWeights) -> np.ndarray:
    """Weighted-sum gradient ``alpha1 g1 + alpha2 g2``."""
    g1 = as_vector(g1, "g1")
    g2 = as_vector(g2, "g2")
    if g1.shape != g2.shape:
        raise DimensionError(f"combine_fixed: gradient lengths differ ({g1.size} vs {g2.size})")
    return w.alpha1 * g1 + w.alpha2 * g2


def dual_objective(g: GramMatrix2, pi) -> float:
    p1, p2 = float(pi[0]), float(pi[1])
    val = 0.5 * (p1 * p1 * g.g11 + p2 * p2 * g.g22 + 2.0 * p1 * p2 * g.g12)
    return max(val, 0.0)


def equal_contribution_value(g: GramMatrix2) -> float:
    """Common value of ``<g*, g1>`` and ``<g*, g2>`` at an interior optimum."""
    den = g.denominator
    if den <= den_eps(g):
        raise DegeneracyError("equal-contribution value undefined for coinciding gradients")
    return g.det / den


# -- general k ------------------------------------------------------------------

def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    k = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, k + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def power_iteration(a: np.ndarray, iters: int = 100, rtol: float = 1e-10) -> float:
    """Largest eigenvalue estimate of a symmetric PSD matrix."""
    k = a.shape[0]
    v = np.full(k, 1.0 / np.sqrt(k))
    lam = 0.0
    for _ in range(iters):
        w = a @ v
        nw = np.sqrt(w @ w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ a @ v)
        if abs(new - lam) <= rtol * abs(new):
            return new
        lam = new
    return lam


def solve_simplex_qp_gram(gram, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Minimize ``0.5 * pi^T G pi`` over the simplex by projected gradient descent.

    Stops once the Frank-Wolfe gap ``grad.pi - min(grad)`` (an upper bound on
    the suboptimality) drops below ``tol * max(f(pi), floor)``.

    Raises:
        ConvergenceError: after ``max_iter`` iterations; ``best`` holds the
            iterate with the smallest gap.
    """
    g = np.asarray(gram, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
        raise DimensionError(f"Gram matrix must be square, got shape {g.shape}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    k = g.shape[0]
    if k == 1:
        return np.ones(1)
    scale = float(np.max(np.diag(g)))
    if scale <= 0.0:
        return np.full(k, 1.0 / k)
    lam = power_iteration(g)
    # power iteration approaches lambda_max from below; the trace caps the overshoot
    step = 1.0 / min(max(lam, 1e-300), float(np.trace(g)))
    # below roughly machine precision times the scale the gap is rounding noise
    floor = 1e-5 * scale

    pi = np.full(k, 1.0 / k)
    best, best_gap = pi, np.inf
    for _ in range(max_iter):
        grad = g @ pi
        f = 0.5 * float(pi @ grad)
        gap = float(pi @ grad - grad.min())
        if gap < best_gap:
            best, best_gap = pi, gap
        if gap <= tol * max(f, floor):
            return pi
        pi = project_simplex(pi - step * grad)
    raise ConvergenceError(
        f"simplex QP did not converge in {max_iter} iterations (gap {best_gap:.3e})",
        best=best,
        gap=best_gap,
    )


def solve_simplex_qp(grads, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Min-norm convex combination of ``k`` task gradients (rows of ``grads``)."""
    j = as_jacobian(grads)
    return solve_simplex_qp_gram(j @ j.T, tol=tol, max_iter=max_iter)
