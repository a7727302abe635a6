"""Per-run task-weight management.

Three modes share one :class:`WeightController`:

``exact``
    per-task gradients are turned into log-gradients (``grad L / L``) and the
    min-norm simplex weights are solved for every step.
``amortized``
    weights move by a single gradient step on ``0.5 * (pi . u)**2`` using an
    observed per-task signal ``u``, then are pushed back onto the simplex
    with a softmax. No per-task gradients are needed.
``fixed``
    the weighted-sum baseline with constant ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .moo_solver import (
    BaselineWeights,
    as_jacobian,
    combine,
    combine_fixed,
    gram2,
    solve_closed_form,
    solve_simplex_qp,
)
from .numerics import as_vector, softmax

MODES = ("exact", "amortized", "fixed")
SIGNALS = ("improvement", "raw_log_loss")


@dataclass
class ControllerConfig:
    mode: str = "exact"
    eta_pi: float = 0.025
    gamma: float = 1.0
    fixed_alpha: BaselineWeights = field(default_factory=BaselineWeights)
    amortized_signal: str = "improvement"
    qp_tol: float = 1e-10

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.amortized_signal not in SIGNALS:
            raise ValueError(f"amortized_signal must be one of {SIGNALS}, got {self.amortized_signal!r}")
        if not self.eta_pi > 0:
            raise ValueError(f"eta_pi must be positive, got {self.eta_pi}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.qp_tol > 0:
            raise ValueError(f"qp_tol must be positive, got {self.qp_tol}")


@dataclass
class ControllerState:
    pi: np.ndarray
    step_count: int = 0
    last_losses: np.ndarray | None = None

    @classmethod
    def initial(cls, k: int = 2) -> "ControllerState":
        return cls(pi=np.full(k, 1.0 / k))


def loss_vector(values, names=None) -> np.ndarray:
    """Validate a vector of strictly positive losses."""
    v = as_vector(values, "losses")
    bad = np.nonzero(~(v > 0.0))[0]
    if bad.size:
        i = int(bad[0])
        label = names[i] if names is not None else f"#{i}"
        raise DomainError(f"loss {label} must be positive, got {v[i]!r}")
    return v


def log_gradient(g, loss: float) -> np.ndarray:
    """Chain rule for ``grad log L = grad L / L``."""
    if not loss > 0:
        raise DomainError(f"log-gradient needs a positive loss, got {loss!r}")
    return np.asarray(g, dtype=np.float64) / loss


def rates(before, after) -> np.ndarray:
    """Relative per-task improvement ``(before - after) / before``."""
    before = loss_vector(before)
    after = as_vector(after, "after")
    if before.shape != after.shape:
        raise DimensionError(f"rates: {before.size} vs {after.size} losses")
    return (before - after) / before


def log_deltas(before, after) -> np.ndarray:
    """``log L_before - log L_after``, the default amortized signal."""
    return np.log(loss_vector(before)) - np.log(loss_vector(after))


class WeightController:
    """Owns the task weights of one training run. Not thread-safe; one run, one controller."""

    def __init__(self, config: ControllerConfig | None = None, k: int = 2):
        self.config = config or ControllerConfig()
        if k < 1:
            raise ValueError("need at least one task")
        if self.config.mode == "fixed" and k != 2:
            raise ValueError("fixed mode combines exactly two tasks")
        self.k = k
        self.state = ControllerState.initial(k)
        if self.config.mode == "fixed":
            self.state.pi = self.config.fixed_alpha.normalized()

    @property
    def pi(self) -> np.ndarray:
        return self.state.pi.copy()

    def log_jacobian(self, grads, losses) -> np.ndarray:
        j = as_jacobian(grads)
        losses = loss_vector(losses)
        if j.shape[0] != self.k or losses.size != self.k:
            raise DimensionError(f"expected {self.k} tasks, got {j.shape[0]} gradients and {losses.size} losses")
        return j / losses[:, None]

    def solve(self, log_grads) -> np.ndarray:
        if self.k == 2:
            return solve_closed_form(gram2(log_grads[0], log_grads[1]))
        return solve_simplex_qp(log_grads, tol=self.config.qp_tol)

    def step_exact(self, grads, losses) -> tuple[np.ndarray, np.ndarray]:
        """Solve for the min-norm weights of the log-gradients and return ``(pi, update)``."""
        lg = self.log_jacobian(grads, losses)
        pi = self.solve(lg)
        self.state.pi = pi
        self.state.step_count += 1
        self.state.last_losses = np.asarray(losses, dtype=np.float64).copy()
        return pi.copy(), combine(lg, pi)

    def step_amortized(self, signal) -> np.ndarray:
        """One descent step on ``0.5 * (pi . u)**2`` followed by softmax renormalization.

        ``signal`` is the per-task vector ``u``: log-loss improvements by
        default, raw log-loss values when ``amortized_signal == "raw_log_loss"``.
        """
        u = as_vector(signal, "signal")
        if u.size != self.k:
            raise DimensionError(f"signal has {u.size} entries for {self.k} tasks")
        pi = self.state.pi
        s = float(pi @ u)
        self.state.pi = softmax(pi - self.config.eta_pi * s * u)
        self.state.step_count += 1
        return self.state.pi.copy()

    def amortized_signal(self, before, after) -> np.ndarray:
        if self.config.amortized_signal == "improvement":
            return log_deltas(before, after)
        return np.log(loss_vector(before))

    def step_fixed(self, grads) -> np.ndarray:
        j = as_jacobian(grads)
        if j.shape[0] != 2:
            raise DimensionError("fixed mode combines exactly two gradients")
        self.state.pi = self.config.fixed_alpha.normalized()
        self.state.step_count += 1
        return combine_fixed(j[0], j[1], self.config.fixed_alpha)
