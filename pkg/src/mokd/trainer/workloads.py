"""Gradient providers the training loop drives.

A workload owns a flat parameter vector layout and answers three kinds of
request, each tallied on :class:`GradientCounter`:

* ``task_gradients``: one backward pass per task (``k`` per call);
* ``combined_log_gradient``: one backward pass for ``sum_i w_i grad log L_i``;
* ``losses``: a forward-only evaluation.

``probe_*`` methods compute the same quantities for diagnostics without
touching the counters, so instrumentation never perturbs the accounting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kd_losses as kl
from ..numerics import make_rng
from ..subspace import SubspaceMap, clamp_metric, init_subspace, retract
from ..toy_tasks.data import BlobDataset, make_blobs, make_toy_detection
from ..toy_tasks.mlp import MlpParams, init_mlp, mlp_backward, mlp_forward
from ..toy_tasks.quadratic import (
    QuadraticPair,
    conflict_quadratic_pair,
    pareto_distance,
    quad_losses,
    random_quadratic_pair,
)


@dataclass
class GradientCounter:
    per_task: int = 0
    combined: int = 0
    loss_only: int = 0

    @property
    def backward(self) -> int:
        return self.per_task + self.combined


class Workload:
    task_names: tuple[str, ...] = ("distill", "task")

    def __init__(self):
        self.counter = GradientCounter()

    @property
    def k(self) -> int:
        return len(self.task_names)

    # hooks for subclasses
    def initial_theta(self) -> np.ndarray:
        raise NotImplementedError

    def sample_batch(self, rng: np.random.Generator):
        return None

    def _losses(self, theta, batch) -> np.ndarray:
        raise NotImplementedError

    def _task_gradients(self, theta, batch):
        raise NotImplementedError

    def _combined(self, theta, batch, weights):
        raise NotImplementedError

    def retract(self, theta) -> np.ndarray:
        return theta

    def pareto_distance(self, theta) -> float | None:
        return None

    def summary(self, theta) -> dict:
        return {}

    # counted API
    def losses(self, theta, batch) -> np.ndarray:
        self.counter.loss_only += 1
        return self._losses(theta, batch)

    def task_gradients(self, theta, batch):
        """``(losses, J)`` with the raw per-task gradients as rows of ``J``."""
        self.counter.per_task += self.k
        return self._task_gradients(theta, batch)

    def combined_log_gradient(self, theta, batch, weights):
        """``(losses, sum_i weights[i] * grad L_i / L_i)`` from a single backward pass."""
        self.counter.combined += 1
        return self._combined(theta, batch, np.asarray(weights, dtype=np.float64))

    # uncounted API
    def probe_losses(self, theta, batch) -> np.ndarray:
        return self._losses(theta, batch)

    def probe_task_gradients(self, theta, batch):
        return self._task_gradients(theta, batch)


class QuadraticWorkload(Workload):
    def __init__(self, pair: QuadraticPair, theta0, pareto_samples: int = 2001):
        super().__init__()
        self.pair = pair
        self.theta0 = np.asarray(theta0, dtype=np.float64)
        self.pareto_samples = pareto_samples

    @classmethod
    def seeded(cls, seed: int, dim: int = 10, conflict: bool = False, init_scale: float = 1.0, pareto_samples: int = 2001):
        """Seeded instance with minimizers ``~ N(0, I/dim)`` and start ``~ N(0, init_scale**2 I)``."""
        rng = make_rng(seed, 1)
        make = conflict_quadratic_pair if conflict else random_quadratic_pair
        pair = make(rng, dim, spread=1.0 / np.sqrt(dim))
        theta0 = init_scale * rng.standard_normal(dim)
        return cls(pair, theta0, pareto_samples)

    def initial_theta(self):
        return self.theta0.copy()

    def _losses(self, theta, batch):
        return quad_losses(self.pair, theta)[0]

    def _task_gradients(self, theta, batch):
        losses, g1, g2 = quad_losses(self.pair, theta)
        return losses, np.stack([g1, g2])

    def _combined(self, theta, batch, weights):
        losses, g1, g2 = quad_losses(self.pair, theta)
        return losses, (weights[0] / losses[0]) * g1 + (weights[1] / losses[1]) * g2

    def pareto_distance(self, theta):
        return pareto_distance(self.pair, theta, samples=self.pareto_samples)

    def summary(self, theta):
        return {"dim": self.pair.dim}


class BatchSampler:
    """Seeded shuffle over ``indices`` with wraparound epochs."""

    def __init__(self, indices, batch_size: int):
        self.indices = np.asarray(indices)
        self.batch_size = min(batch_size, self.indices.size)
        self._order = None
        self._pos = 0

    def next(self, rng: np.random.Generator) -> np.ndarray:
        out = []
        need = self.batch_size
        while need:
            if self._order is None or self._pos >= self._order.size:
                self._order = rng.permutation(self.indices)
                self._pos = 0
            take = self._order[self._pos : self._pos + need]
            self._pos += take.size
            need -= take.size
            out.append(take)
        return np.concatenate(out)


def train_teacher(ds: BlobDataset, width: int, steps: int, lr: float, batch_size: int, seed: int) -> MlpParams:
    """Fit the teacher on the task loss with plain minibatch SGD; the result is then frozen."""
    out_dim = ds.num_classes + (2 if ds.offsets is not None else 0)
    rng = make_rng(seed, 11)
    p = init_mlp(rng, ds.inputs.shape[1], width, out_dim)
    sampler = BatchSampler(ds.train_idx, batch_size)
    for _ in range(steps):
        idx = sampler.next(rng)
        logits, _ = mlp_forward(p, ds.inputs[idx])
        d_logits = np.zeros_like(logits)
        d_logits[:, : ds.num_classes] = kl.cross_entropy_grad(logits[:, : ds.num_classes], ds.labels[idx])
        if ds.offsets is not None:
            d_logits[:, ds.num_classes :] = kl.mean_absolute_error_grad(logits[:, ds.num_classes :], ds.offsets[idx])
        g = mlp_backward(p, ds.inputs[idx], d_logits)
        p = p.unflatten(p.flatten() - lr * g.flatten())
    return p


def accuracy(p: MlpParams, ds: BlobDataset, idx) -> float:
    logits, _ = mlp_forward(p, ds.inputs[idx])
    return float(np.mean(np.argmax(logits[:, : ds.num_classes], axis=1) == ds.labels[idx]))


class DistillWorkload(Workload):
    """Teacher-to-student distillation on blob data.

    Parameter vector layout: student MLP, then (when the adapter is trained)
    ``p_t``, ``p_s`` and ``d``. With the adapter frozen, the map keeps its
    initial orthonormal projections and unit metric.
    """

    def __init__(
        self,
        ds: BlobDataset,
        teacher: MlpParams,
        student: MlpParams,
        smap: SubspaceMap,
        temperature: float = 1.0,
        grouping: str = "two_task",
        train_subspace: bool = True,
        feature_loss: str = "similarity",
        batch_size: int = 64,
    ):
        super().__init__()
        if grouping not in kl.GROUPINGS:
            raise ValueError(f"unknown grouping {grouping!r}")
        if feature_loss not in ("similarity", "normalized_l1"):
            raise ValueError(f"unknown feature_loss {feature_loss!r}")
        self.ds = ds
        self.teacher = teacher
        self.student0 = student
        self.smap0 = smap
        self.temperature = temperature
        self.grouping = grouping
        self.task_names = kl.group_names(grouping)
        self.members = kl.group_members(grouping)
        self.train_subspace = train_subspace
        self.feature_loss = feature_loss
        self.sampler = BatchSampler(ds.train_idx, batch_size)
        self.n_student = student.size
        n, n_t, n_s = smap.n, smap.n_t, smap.n_s
        self._cuts = np.cumsum([self.n_student, n * n_t, n * n_s, n])
        self._teacher_cache = {}

    @classmethod
    def seeded(
        cls,
        seed: int,
        task: str = "blobs_kd",
        num_samples: int = 4096,
        input_dim: int = 32,
        num_classes: int = 8,
        teacher_width: int = 128,
        student_width: int = 32,
        teacher_steps: int = 1500,
        teacher_lr: float = 0.05,
        subspace_n: int | None = None,
        **kwargs,
    ):
        make = make_toy_detection if task == "toy_detection" else make_blobs
        ds = make(seed, num_samples, input_dim, num_classes)
        teacher = train_teacher(ds, teacher_width, teacher_steps, teacher_lr, 128, seed)
        out_dim = teacher.out_dim
        rng = make_rng(seed, 12)
        student = init_mlp(rng, input_dim, student_width, out_dim)
        n = subspace_n or max(teacher_width, student_width)
        smap = init_subspace(n, teacher_width, student_width, rng)
        return cls(ds, teacher, student, smap, **kwargs)

    # layout
    def initial_theta(self):
        parts = [self.student0.flatten()]
        if self.train_subspace:
            parts += [self.smap0.p_t.ravel(), self.smap0.p_s.ravel(), self.smap0.d]
        return np.concatenate(parts)

    def unpack(self, theta) -> tuple[MlpParams, SubspaceMap]:
        student = self.student0.unflatten(theta[: self.n_student])
        if not self.train_subspace:
            return student, self.smap0
        a, b, c, _ = self._cuts
        m = self.smap0
        smap = SubspaceMap(
            p_t=theta[a:b].reshape(m.p_t.shape),
            p_s=theta[b:c].reshape(m.p_s.shape),
            d=theta[c:],
        )
        return student, smap

    def pack(self, student: MlpParams, smap: SubspaceMap) -> np.ndarray:
        parts = [student.flatten()]
        if self.train_subspace:
            parts += [smap.p_t.ravel(), smap.p_s.ravel(), smap.d]
        return np.concatenate(parts)

    def retract(self, theta):
        if not self.train_subspace:
            return theta
        student, smap = self.unpack(theta)
        return self.pack(student, clamp_metric(retract(smap)))

    def sample_batch(self, rng):
        return self.sampler.next(rng)

    # forward / backward
    def _teacher_out(self, idx):
        key = idx.tobytes()
        hit = self._teacher_cache.get(key)
        if hit is None:
            if len(self._teacher_cache) > 4:
                self._teacher_cache.clear()
            hit = self._teacher_cache[key] = mlp_forward(self.teacher, self.ds.inputs[idx])
        return hit

    def _components(self, theta, idx, with_grads: bool):
        """Named component losses and, optionally, their upstream gradients."""
        ds, k = self.ds, self.ds.num_classes
        student, smap = self.unpack(theta)
        x = ds.inputs[idx]
        s_logits, z_s = mlp_forward(student, x)
        t_logits, z_t = self._teacher_out(idx)
        tau = self.temperature

        vals = {"kl": kl.kl_distill(s_logits[:, :k], t_logits[:, :k], tau)}
        if self.feature_loss == "similarity":
            vals["kd"] = kl.subspace_distill(smap, z_t, z_s)
        else:
            a, b = z_t @ smap.p_t.T, (z_s @ smap.p_s.T) * smap.d
            vals["kd"] = kl.normalized_l1(a, b)
        cls = kl.cross_entropy(s_logits[:, :k], ds.labels[idx])
        if ds.offsets is not None:
            cls += kl.mean_absolute_error(s_logits[:, k:], ds.offsets[idx])
        vals["cls"] = cls
        if not with_grads:
            return vals, None, (student, smap, x)

        zeros_logits = np.zeros_like(s_logits)
        ups = {}
        g = zeros_logits.copy()
        g[:, :k] = kl.kl_distill_grad(s_logits[:, :k], t_logits[:, :k], tau)
        ups["kl"] = (g, None, None)
        if self.feature_loss == "similarity":
            d_zs, d_d, d_pt, d_ps = kl.subspace_distill_grads(smap, z_t, z_s)
        else:
            ga, gb = kl.normalized_l1_grad(a, b)
            d_pt = ga.T @ z_t
            gbd = gb * smap.d
            d_ps = gbd.T @ z_s
            d_d = np.sum(gb * (z_s @ smap.p_s.T), axis=0)
            d_zs = gbd @ smap.p_s
        ups["kd"] = (zeros_logits.copy(), d_zs, (d_pt, d_ps, d_d))
        g = zeros_logits.copy()
        g[:, :k] = kl.cross_entropy_grad(s_logits[:, :k], ds.labels[idx])
        if ds.offsets is not None:
            g[:, k:] = kl.mean_absolute_error_grad(s_logits[:, k:], ds.offsets[idx])
        ups["cls"] = (g, None, None)
        return vals, ups, (student, smap, x)

    def _assemble(self, vals) -> np.ndarray:
        return kl.assemble_losses(self.grouping, vals)

    def _backward(self, ctx, ups, coeffs: dict) -> np.ndarray:
        """One reverse pass for ``sum_name coeffs[name] * component[name]``."""
        student, smap, x = ctx
        d_logits = None
        d_feat = None
        adapter = None
        for name, c in coeffs.items():
            if c == 0.0:
                continue
            dl, df, da = ups[name]
            d_logits = c * dl if d_logits is None else d_logits + c * dl
            if df is not None:
                d_feat = c * df if d_feat is None else d_feat + c * df
            if da is not None:
                scaled = tuple(c * t for t in da)
                adapter = scaled if adapter is None else tuple(u + v for u, v in zip(adapter, scaled))
        if d_logits is None:
            d_logits = np.zeros((x.shape[0], student.out_dim))
        g_student = mlp_backward(student, x, d_logits, d_feat).flatten()
        if not self.train_subspace:
            return g_student
        if adapter is None:
            adapter = (np.zeros_like(smap.p_t), np.zeros_like(smap.p_s), np.zeros_like(smap.d))
        d_pt, d_ps, d_d = adapter
        return np.concatenate([g_student, d_pt.ravel(), d_ps.ravel(), d_d])

    def _losses(self, theta, idx):
        vals, _, _ = self._components(theta, idx, with_grads=False)
        return self._assemble(vals)

    def _task_gradients(self, theta, idx):
        vals, ups, ctx = self._components(theta, idx, with_grads=True)
        losses = self._assemble(vals)
        rows = [self._backward(ctx, ups, {n: 1.0 for n in group}) for group in self.members]
        return losses, np.stack(rows)

    def _combined(self, theta, idx, weights):
        vals, ups, ctx = self._components(theta, idx, with_grads=True)
        losses = self._assemble(vals)
        coeffs = {}
        for w, loss, group in zip(weights, losses, self.members):
            for n in group:
                coeffs[n] = w / loss
        return losses, self._backward(ctx, ups, coeffs)

    def component_values(self, theta, idx) -> dict:
        return self._components(theta, idx, with_grads=False)[0]

    def summary(self, theta):
        student, smap = self.unpack(theta)
        ds = self.ds
        return {
            "student_params": int(student.size),
            "adapter_params": int(smap.p_t.size + smap.p_s.size + smap.d.size),
            "teacher_val_accuracy": accuracy(self.teacher, ds, ds.val_idx),
            "student_val_accuracy": accuracy(student, ds, ds.val_idx),
            "negative_metric_entries": int(np.sum(smap.d < 0)),
        }
