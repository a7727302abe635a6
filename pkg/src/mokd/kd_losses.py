"""Distillation and task losses, their gradients, and their grouping into a loss vector.

Every loss accepts a single sample (1-D arrays) or a batch (2-D arrays, one
sample per row); batched calls return the mean over rows and the matching
``*_grad`` functions return the gradient of that mean.

Naming: ``kl`` is the temperature-scaled KL term on logits, ``kd`` the
feature-alignment term, ``cls`` the supervised task loss.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError
from .numerics import log_softmax, softmax
from .subspace import SubspaceMap, _check_pair

GROUPINGS = ("two_task", "three_task")
SUBSPACE_EPS = 1e-8
SUBSPACE_OFFSET = 2.0


def _pair(a, b, what):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shapes differ {a.shape} vs {b.shape}")
    return a, b


def _batch_size(a: np.ndarray) -> int:
    return 1 if a.ndim == 1 else a.shape[0]


def kl_distill(student, teacher, temperature: float = 1.0) -> float:
    """``tau**2 * KL(softmax(teacher/tau) || softmax(student/tau))``."""
    s, t = _pair(student, teacher, "kl_distill")
    if not temperature > 0:
        raise DomainError(f"temperature must be positive, got {temperature!r}")
    log_p = log_softmax(t / temperature)
    log_q = log_softmax(s / temperature)
    kl = np.sum(np.exp(log_p) * (log_p - log_q), axis=-1)
    return float(temperature**2 * np.mean(np.maximum(kl, 0.0)))


def kl_distill_grad(student, teacher, temperature: float = 1.0) -> np.ndarray:
    s, t = _pair(student, teacher, "kl_distill")
    if not temperature > 0:
        raise DomainError(f"temperature must be positive, got {temperature!r}")
    p = softmax(t / temperature)
    q = softmax(s / temperature)
    return temperature * (q - p) / _batch_size(s)


def _unit(a):
    n = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise DomainError("normalized_l1 is undefined for a zero vector")
    return a / n, n


def normalized_l1(a, b) -> float:
    """L1 distance between the L2-normalized arguments (scale invariant)."""
    a, b = _pair(a, b, "normalized_l1")
    ua, _ = _unit(a)
    ub, _ = _unit(b)
    return float(np.mean(np.sum(np.abs(ua - ub), axis=-1)))


def normalized_l1_grad(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Gradients with respect to ``a`` and ``b`` (sign convention ``sign(0) = 0``)."""
    a, b = _pair(a, b, "normalized_l1")
    ua, na = _unit(a)
    ub, nb = _unit(b)
    sgn = np.sign(ua - ub)
    # d|u(a)|/da = (I - u u^T) / ||a|| applied to the upstream sign vector
    ga = (sgn - ua * np.sum(ua * sgn, axis=-1, keepdims=True)) / na
    gb = (-sgn + ub * np.sum(ub * sgn, axis=-1, keepdims=True)) / nb
    m = _batch_size(a)
    return ga / m, gb / m


def _labels(logits: np.ndarray, label):
    lab = np.atleast_1d(np.asarray(label))
    if not np.issubdtype(lab.dtype, np.integer):
        raise DomainError("labels must be integer class indices")
    k = logits.shape[-1]
    if np.any(lab < 0) or np.any(lab >= k):
        raise DomainError(f"label out of range for {k} classes")
    rows = 1 if logits.ndim == 1 else logits.shape[0]
    if lab.size != rows:
        raise DimensionError(f"{lab.size} labels for {rows} rows of logits")
    return lab


def cross_entropy(student, label) -> float:
    z = np.asarray(student, dtype=np.float64)
    lab = _labels(z, label)
    lp = np.atleast_2d(log_softmax(z))
    return float(-np.mean(lp[np.arange(lab.size), lab]))


def cross_entropy_grad(student, label) -> np.ndarray:
    z = np.asarray(student, dtype=np.float64)
    lab = _labels(z, label)
    g = np.atleast_2d(softmax(z)).copy()
    g[np.arange(lab.size), lab] -= 1.0
    g /= lab.size
    return g.reshape(z.shape)


def mean_absolute_error(pred, target) -> float:
    """Mean over samples of the summed absolute error; the toy box-regression term."""
    p, t = _pair(pred, target, "mean_absolute_error")
    return float(np.mean(np.sum(np.abs(p - t), axis=-1)))


def mean_absolute_error_grad(pred, target) -> np.ndarray:
    p, t = _pair(pred, target, "mean_absolute_error")
    return np.sign(p - t) / _batch_size(p)


def subspace_distill(m: SubspaceMap, z_t, z_s) -> float:
    """``3 - s / (||P_t z_t|| ||P_s z_s|| + eps)``: cosine-normalized similarity loss, always > 0 for |d| < 3."""
    z_t, z_s = _check_pair(m, z_t, z_s)
    a = z_t @ m.p_t.T
    b = z_s @ m.p_s.T
    s = np.sum(m.d * a * b, axis=-1)
    den = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1) + SUBSPACE_EPS
    return float(np.mean(1.0 - s / den + SUBSPACE_OFFSET))


def subspace_distill_grads(m: SubspaceMap, z_t, z_s):
    """Gradients of :func:`subspace_distill` as ``(d_zs, d_d, d_pt, d_ps)``."""
    z_t, z_s = _check_pair(m, z_t, z_s)
    single = z_t.ndim == 1
    zt2 = np.atleast_2d(z_t)
    zs2 = np.atleast_2d(z_s)
    bsz = zt2.shape[0]
    a = zt2 @ m.p_t.T
    b = zs2 @ m.p_s.T
    s = np.sum(m.d * a * b, axis=-1, keepdims=True)
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    nb = np.linalg.norm(b, axis=-1, keepdims=True)
    den = na * nb + SUBSPACE_EPS
    # d(s/den)/da = d*b/den - s/den^2 * nb * a/na ; zero-norm rows contribute no radial term
    with np.errstate(invalid="ignore", divide="ignore"):
        ra = np.where(na > 0, nb / na, 0.0)
        rb = np.where(nb > 0, na / nb, 0.0)
    ga = -(m.d * b / den - s / den**2 * ra * a) / bsz
    gb = -(m.d * a / den - s / den**2 * rb * b) / bsz
    d_d = -np.sum(a * b / den, axis=0) / bsz
    d_pt = ga.T @ zt2
    d_ps = gb.T @ zs2
    d_zs = gb @ m.p_s
    if single:
        d_zs = d_zs[0]
    return d_zs, d_d, d_pt, d_ps


def assemble_losses(grouping: str, components: dict) -> np.ndarray:
    """Group named component losses ``kl``, ``kd``, ``cls`` into the task loss vector.

    ``two_task`` gives ``(kl + kd, cls)``; ``three_task`` gives ``(kl, kd, cls)``.
    """
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    missing = {"kl", "kd", "cls"} - set(components)
    if missing:
        raise KeyError(f"missing loss components: {sorted(missing)}")
    for name in ("kl", "kd", "cls"):
        v = components[name]
        if not v > 0:
            raise DomainError(f"loss component '{name}' must be positive, got {v!r}")
    kl, kd, cls = (float(components[n]) for n in ("kl", "kd", "cls"))
    if grouping == "two_task":
        return np.array([kl + kd, cls])
    return np.array([kl, kd, cls])


def group_names(grouping: str) -> tuple[str, ...]:
    return ("distill", "task") if grouping == "two_task" else ("kl", "kd", "cls")


def group_members(grouping: str) -> tuple[tuple[str, ...], ...]:
    """Which named components feed each entry of the assembled vector."""
    if grouping == "two_task":
        return (("kl", "kd"), ("cls",))
    return (("kl",), ("kd",), ("cls",))
