"""Two-hidden-layer ReLU perceptron with a hand-written backward pass.

Inputs are row-major batches (``B x d``); a single 1-D input is treated as a
batch of one and squeezed on the way out. The penultimate activation is
exposed as the feature vector used for distillation.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..errors import DimensionError

_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))
        h1, h2 = self.w1.shape[1], self.w2.shape[1]
        ok = (
            self.b1.shape == (h1,)
            and self.w2.shape[0] == h1
            and self.b2.shape == (h2,)
            and self.w3.shape[0] == h2
            and self.b3.shape == (self.w3.shape[1],)
        )
        if not ok:
            raise DimensionError(f"inconsistent MLP shapes: {self.shapes()}")

    def shapes(self) -> dict:
        return {n: getattr(self, n).shape for n in _NAMES}

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.w2.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w3.shape[1]

    @property
    def size(self) -> int:
        return sum(getattr(self, n).size for n in _NAMES)

    def flatten(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).ravel() for n in _NAMES])

    def unflatten(self, flat) -> "MlpParams":
        """New params with this instance's shapes, filled from ``flat``."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.size:
            raise DimensionError(f"expected {self.size} values, got {flat.size}")
        out, i = {}, 0
        for n in _NAMES:
            shape = getattr(self, n).shape
            k = int(np.prod(shape))
            out[n] = flat[i : i + k].reshape(shape)
            i += k
        return MlpParams(**out)

    def copy(self) -> "MlpParams":
        return MlpParams(**{n: getattr(self, n).copy() for n in _NAMES})


def init_mlp(rng: np.random.Generator, in_dim: int, width: int, out_dim: int) -> MlpParams:
    """He-initialized weights, zero biases; both hidden layers have ``width`` units."""
    return MlpParams(
        w1=rng.standard_normal((in_dim, width)) * np.sqrt(2.0 / in_dim),
        b1=np.zeros(width),
        w2=rng.standard_normal((width, width)) * np.sqrt(2.0 / width),
        b2=np.zeros(width),
        w3=rng.standard_normal((width, out_dim)) * np.sqrt(1.0 / width),
        b3=np.zeros(out_dim),
    )


def _forward(p: MlpParams, x: np.ndarray):
    z1 = x @ p.w1 + p.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ p.w2 + p.b2
    h2 = np.maximum(z2, 0.0)
    out = h2 @ p.w3 + p.b3
    return z1, h1, z2, h2, out


def _as_batch(p: MlpParams, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != p.in_dim:
        raise DimensionError(f"input width {x2.shape[-1]} does not match network input {p.in_dim}")
    return x2, single


def mlp_forward(p: MlpParams, x):
    """Return ``(logits, features)`` where features is the last hidden activation."""
    x2, single = _as_batch(p, x)
    _, _, _, h2, out = _forward(p, x2)
    if single:
        return out[0], h2[0]
    return out, h2


def pre_activations(p: MlpParams, x):
    """Hidden pre-activations ``(z1, z2)``; used to steer gradient checks away from ReLU kinks."""
    x2, _ = _as_batch(p, x)
    z1, _, z2, _, _ = _forward(p, x2)
    return z1, z2


def mlp_backward(p: MlpParams, x, d_logits, d_features=None) -> MlpParams:
    """Parameter gradients of a scalar loss given its gradients w.r.t. logits and features.

    ReLU uses the subgradient 0 at 0.
    """
    x2, _ = _as_batch(p, x)
    z1, h1, z2, h2, out = _forward(p, x2)
    d_out = np.asarray(d_logits, dtype=np.float64).reshape(out.shape)
    d_h2 = d_out @ p.w3.T
    if d_features is not None:
        d_h2 = d_h2 + np.asarray(d_features, dtype=np.float64).reshape(h2.shape)
    d_z2 = d_h2 * (z2 > 0.0)
    d_h1 = d_z2 @ p.w2.T
    d_z1 = d_h1 * (z1 > 0.0)
    return MlpParams(
        w1=x2.T @ d_z1,
        b1=d_z1.sum(axis=0),
        w2=h1.T @ d_z2,
        b2=d_z2.sum(axis=0),
        w3=h2.T @ d_out,
        b3=d_out.sum(axis=0),
    )
