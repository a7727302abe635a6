"""Seeded Gaussian-blob datasets standing in for image benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import make_rng

VAL_STRIDE = 5  # every 5th index goes to validation: an 80/20 split


@dataclass(frozen=True, eq=False)
class BlobDataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    means: np.ndarray
    offsets: np.ndarray | None = None

    def __len__(self) -> int:
        return self.labels.size

    @property
    def train_idx(self) -> np.ndarray:
        idx = np.arange(len(self))
        return idx[idx % VAL_STRIDE != VAL_STRIDE - 1]

    @property
    def val_idx(self) -> np.ndarray:
        idx = np.arange(len(self))
        return idx[idx % VAL_STRIDE == VAL_STRIDE - 1]

    @property
    def split(self) -> np.ndarray:
        """Per-sample tag, ``"train"`` or ``"val"``."""
        idx = np.arange(len(self))
        return np.where(idx % VAL_STRIDE == VAL_STRIDE - 1, "val", "train")


def _check_sizes(n, d, k):
    if not (n >= k >= 2 and d >= 2):
        raise ValueError(f"need N >= k >= 2 and d >= 2, got N={n}, d={d}, k={k}")


def make_blobs(seed: int, n: int, d: int, k: int, separation: float = 0.5, noise: float = 1.0) -> BlobDataset:
    """``k`` Gaussian clusters sharing one seeded covariance, labels balanced within one."""
    _check_sizes(n, d, k)
    rng = make_rng(seed, 101)
    means = separation * rng.standard_normal((k, d))
    mix = np.eye(d) + 0.3 * rng.standard_normal((d, d)) / np.sqrt(d)
    labels = rng.permutation(np.arange(n) % k)
    eps = rng.standard_normal((n, d))
    inputs = means[labels] + noise * eps @ mix.T
    return BlobDataset(inputs=inputs, labels=labels, num_classes=k, means=means)


def make_toy_detection(seed: int, n: int, d: int, k: int, **kwargs) -> BlobDataset:
    """Blobs plus a 2-d regression target: each point's offset from its cluster mean (first two coordinates)."""
    ds = make_blobs(seed, n, d, k, **kwargs)
    offsets = ds.inputs[:, :2] - ds.means[ds.labels, :2]
    return BlobDataset(ds.inputs, ds.labels, ds.num_classes, ds.means, offsets)
