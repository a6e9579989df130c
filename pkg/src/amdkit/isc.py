"""Multitask item/task network: wiring, loss, training loop, checkpoints.

The model maps a one-hot item and a one-hot task through sigmoid embeddings
into two output heads over all features:

    item ->(item_embed)-> h_item --+--> out_ci -> context-independent preds
                                   |
    task ->(task_embed)-> h_task --+--> hidden -> out_cd -> task-conditioned preds

The null task is the all-zero task embedding (it bypasses the sigmoid; the
embedding itself is zero) with all-zero targets. Ablations multiply h_task by
a binary mask, so the all-zero mask reproduces the null task exactly.

Backprop is written out by hand for this fixed architecture; with sigmoid
outputs and summed BCE the output deltas collapse to (pred - target).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ._util import atomic_write_text, fmt
from .datasets import Dataset
from .nn import AdamState, DenseLayer, bce_sum, sigmoid


class TrainingDivergence(RuntimeError):
    """Loss went non-finite; carries the offending epoch (1-based)."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class ModelDims:
    """Embedding and hidden widths; concat width is d_item + d_task."""

    d_item: int = 32
    d_task: int = 10
    d_hidden: int = 32

    def validate(self) -> None:
        for name, v in asdict(self).items():
            if v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")


@dataclass(frozen=True)
class Hyperparams:
    lr: float = 0.05
    epochs: int = 150
    batch_size: int = 64
    seed: int = 7

    def validate(self) -> None:
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class ISCModel:
    """Trained or in-training network; immutable once training returns."""

    item_embed: DenseLayer
    task_embed: DenseLayer
    hidden: DenseLayer
    out_ci: DenseLayer
    out_cd: DenseLayer
    dims: ModelDims
    dataset_fingerprint: str | None = None

    @classmethod
    def create(cls, n_items: int, n_tasks: int, n_features: int,
               dims: ModelDims, rng: np.random.Generator) -> "ISCModel":
        dims.validate()
        return cls(
            item_embed=DenseLayer.create(n_items, dims.d_item, rng),
            task_embed=DenseLayer.create(n_tasks, dims.d_task, rng),
            hidden=DenseLayer.create(dims.d_item + dims.d_task, dims.d_hidden, rng),
            out_ci=DenseLayer.create(dims.d_item, n_features, rng),
            out_cd=DenseLayer.create(dims.d_hidden, n_features, rng),
            dims=dims,
        )

    @property
    def n_items(self) -> int:
        return self.item_embed.n_in

    @property
    def n_tasks(self) -> int:
        return self.task_embed.n_in

    @property
    def n_features(self) -> int:
        return self.out_ci.n_out

    def layers(self) -> dict[str, DenseLayer]:
        return {"item_embed": self.item_embed, "task_embed": self.task_embed,
                "hidden": self.hidden, "out_ci": self.out_ci, "out_cd": self.out_cd}

    def params(self) -> dict[str, np.ndarray]:
        """Live parameter views keyed 'layer.W' / 'layer.b' (for the optimizer)."""
        out = {}
        for name, layer in self.layers().items():
            out[f"{name}.W"] = layer.W
            out[f"{name}.b"] = layer.b
        return out

    def item_representation(self, items: np.ndarray) -> np.ndarray:
        """Sigmoid item embeddings for an index array, shape (B, d_item).

        One-hot input means column selection: sigmoid(W[:, i] + b).
        """
        items = np.atleast_1d(np.asarray(items, dtype=np.intp))
        return sigmoid(self.item_embed.W.T[items] + self.item_embed.b)

    def task_representation(self, task: int | None) -> np.ndarray:
        """Embedding vector h(task); the null task (None) is exactly zero."""
        if task is None:
            return np.zeros(self.dims.d_task)
        if not (0 <= task < self.n_tasks):
            raise IndexError(f"task index {task} out of range [0, {self.n_tasks})")
        return sigmoid(self.task_embed.W[:, task] + self.task_embed.b)

    def predict_cd(self, items: np.ndarray, task: int | None,
                   mask: np.ndarray | None = None) -> np.ndarray:
        """Task-conditioned feature probabilities, shape (B, n_features).

        ``mask`` (length d_task, entries 0/1) multiplies the task embedding;
        None means no ablation (all ones).
        """
        h_task = self.task_representation(task)
        if mask is not None:
            mask = np.asarray(mask, dtype=np.float64)
            if mask.shape != h_task.shape:
                raise ValueError(f"mask length {mask.shape} != d_task {h_task.shape}")
            h_task = h_task * mask
        h_item = self.item_representation(items)
        x = np.concatenate([h_item, np.broadcast_to(h_task, (len(h_item), len(h_task)))],
                           axis=1)
        return self.out_cd.forward(self.hidden.forward(x))

    def predict_ci(self, items: np.ndarray) -> np.ndarray:
        """Context-independent feature probabilities, shape (B, n_features)."""
        return self.out_ci.forward(self.item_representation(items))

    def forward_full(self, item: int, task: int | None,
                     mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(ci_pred, cd_pred) for one item under an optionally masked task."""
        ci = self.predict_ci(np.array([item]))[0]
        cd = self.predict_cd(np.array([item]), task, mask)[0]
        return ci, cd

    def to_dict(self) -> dict:
        return {
            "dims": asdict(self.dims),
            "layers": {name: layer.to_dict() for name, layer in self.layers().items()},
            "dataset_fingerprint": self.dataset_fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ISCModel":
        layers = {name: DenseLayer.from_dict(ld) for name, ld in d["layers"].items()}
        return cls(dims=ModelDims(**d["dims"]),
                   dataset_fingerprint=d.get("dataset_fingerprint"), **layers)


@dataclass
class TrainingTrace:
    """Per-epoch raw geometric-mean accuracy per task, plus the epoch losses.

    ``accuracy[e, t]`` is the unsmoothed geometric mean of sensitivity and
    specificity for task t after epoch e+1 (all-ones mask). Unsmoothed so the
    value is exactly 0 until the model first gets a positive feature right,
    which is what first-crossing thresholds are measured against. ``loss[e]``
    is the epoch's per-example loss summed over all (item, task) pairs.
    """

    accuracy: np.ndarray
    loss: np.ndarray
    hyper: Hyperparams
    task_names: tuple[str, ...]

    @property
    def epochs(self) -> int:
        return self.accuracy.shape[0]

    def save_csv(self, path) -> None:
        lines = ["epoch,task,accuracy,loss"]
        for e in range(self.epochs):
            for t, name in enumerate(self.task_names):
                lines.append(f"{e + 1},{name},{fmt(self.accuracy[e, t])},{fmt(self.loss[e])}")
        atomic_write_text(path, "\n".join(lines) + "\n")


def loss_and_grads(model: ISCModel, ds: Dataset, items: np.ndarray,
                   tasks: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Three-component loss and its gradients for a batch of (item, task) pairs.

    Loss per example: bce(ci head, union targets) + bce(cd head under the
    task, task targets) + bce(cd head under the null task, zeros); the batch
    reduction is the mean. The null pass reuses the batch items and
    contributes no task-embedding gradient (the null embedding is a constant,
    not a parameter).
    """
    items = np.asarray(items, dtype=np.intp)
    tasks = np.asarray(tasks, dtype=np.intp)
    B = len(items)
    if B == 0:
        raise ValueError("empty batch")

    y_union = ds.targets[items].astype(np.float64)
    y_task = y_union * (ds.class_of_feature[None, :] == tasks[:, None])
    y_null = np.zeros_like(y_union)

    li, lt, lh = model.item_embed, model.task_embed, model.hidden
    lci, lcd = model.out_ci, model.out_cd

    h_item = sigmoid(li.W.T[items] + li.b)
    h_task = sigmoid(lt.W.T[tasks] + lt.b)
    x = np.concatenate([h_item, h_task], axis=1)
    x0 = np.concatenate([h_item, np.zeros_like(h_task)], axis=1)
    h = sigmoid(x @ lh.W.T + lh.b)
    h0 = sigmoid(x0 @ lh.W.T + lh.b)
    p_ci = sigmoid(h_item @ lci.W.T + lci.b)
    p_cd = sigmoid(h @ lcd.W.T + lcd.b)
    p_null = sigmoid(h0 @ lcd.W.T + lcd.b)

    loss = (bce_sum(p_ci, y_union) + bce_sum(p_cd, y_task)
            + bce_sum(p_null, y_null)) / B

    # sigmoid + BCE: delta at each head is (pred - target) / B
    d_ci = (p_ci - y_union) / B
    d_cd = (p_cd - y_task) / B
    d_null = (p_null - y_null) / B

    g = {}
    g["out_ci.W"] = d_ci.T @ h_item
    g["out_ci.b"] = d_ci.sum(axis=0)
    g["out_cd.W"] = d_cd.T @ h + d_null.T @ h0
    g["out_cd.b"] = (d_cd + d_null).sum(axis=0)

    d_h = (d_cd @ lcd.W) * h * (1.0 - h)
    d_h0 = (d_null @ lcd.W) * h0 * (1.0 - h0)
    g["hidden.W"] = d_h.T @ x + d_h0.T @ x0
    g["hidden.b"] = (d_h + d_h0).sum(axis=0)

    di = model.dims.d_item
    g_hitem = d_ci @ lci.W + (d_h @ lh.W)[:, :di] + (d_h0 @ lh.W)[:, :di]
    g_htask = (d_h @ lh.W)[:, di:]  # null pass: h_task is zero, no gradient

    d_item_emb = g_hitem * h_item * (1.0 - h_item)
    d_task_emb = g_htask * h_task * (1.0 - h_task)
    gwi = np.zeros_like(li.W.T)
    np.add.at(gwi, items, d_item_emb)
    gwt = np.zeros_like(lt.W.T)
    np.add.at(gwt, tasks, d_task_emb)
    g["item_embed.W"] = gwi.T
    g["item_embed.b"] = d_item_emb.sum(axis=0)
    g["task_embed.W"] = gwt.T
    g["task_embed.b"] = d_task_emb.sum(axis=0)
    return loss, g


def total_loss(model: ISCModel, ds: Dataset, items: np.ndarray,
               tasks: np.ndarray) -> float:
    loss, _ = loss_and_grads(model, ds, items, tasks)
    return loss


def train(ds: Dataset, hyper: Hyperparams,
          dims: ModelDims = ModelDims()) -> tuple[ISCModel, TrainingTrace]:
    """Train a fresh model; deterministic in hyper.seed.

    One epoch is a full shuffled pass over all item x real-task pairs,
    consumed in batches of hyper.batch_size (final partial batch kept). After
    each epoch the unmasked per-task accuracy is recorded into the trace.
    """
    from . import amd  # deferred: amd imports this module for model types

    hyper.validate()
    ds.validate()
    rng = np.random.default_rng(hyper.seed)
    model = ISCModel.create(ds.n_items, ds.n_tasks, ds.n_features, dims, rng)
    model.dataset_fingerprint = ds.fingerprint()
    opt = AdamState(lr=hyper.lr)
    params = model.params()

    pair_items, pair_tasks = np.divmod(np.arange(ds.n_items * ds.n_tasks), ds.n_tasks)
    acc = np.zeros((hyper.epochs, ds.n_tasks))
    losses = np.zeros(hyper.epochs)
    ones = np.ones(dims.d_task)
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(len(pair_items))
        epoch_loss = 0.0
        for start in range(0, len(order), hyper.batch_size):
            batch = order[start:start + hyper.batch_size]
            loss, grads = loss_and_grads(model, ds, pair_items[batch], pair_tasks[batch])
            if not np.isfinite(loss):
                raise TrainingDivergence(epoch)
            epoch_loss += loss * len(batch)
            opt.begin_step()
            for name, grad in grads.items():
                opt.update(name, params[name], grad)
        losses[epoch - 1] = epoch_loss
        for t in range(ds.n_tasks):
            acc[epoch - 1, t] = amd.task_mask_accuracy(model, ds, t, ones).raw_geo_mean()
    trace = TrainingTrace(accuracy=acc, loss=losses, hyper=hyper,
                          task_names=ds.task_names)
    return model, trace


def task_acquisition_order(trace: TrainingTrace | np.ndarray,
                           threshold: float) -> np.ndarray:
    """Fractional ranks of first epochs where accuracy exceeds threshold.

    Rank 1 is the earliest crosser; ties share the mean rank. Tasks that
    never cross sit at the bottom with rank exactly T.
    """
    if not (0.0 <= threshold < 1.0):
        raise ValueError(f"threshold must lie in [0, 1), got {threshold}")
    acc = trace.accuracy if isinstance(trace, TrainingTrace) else np.asarray(trace)
    epochs, T = acc.shape
    crossed = acc > threshold
    first = np.where(crossed.any(axis=0), crossed.argmax(axis=0), epochs)

    ranks = np.full(T, float(T))
    crossers = np.flatnonzero(first < epochs)
    by_epoch: dict[int, list[int]] = {}
    for t in crossers:
        by_epoch.setdefault(int(first[t]), []).append(int(t))
    next_rank = 1
    for e in sorted(by_epoch):
        group = by_epoch[e]
        mean_rank = next_rank + (len(group) - 1) / 2.0
        for t in group:
            ranks[t] = mean_rank
        next_rank += len(group)
    return ranks


def save_checkpoint(model: ISCModel, hyper: Hyperparams, path) -> None:
    payload = model.to_dict()
    payload["hyper"] = asdict(hyper)
    payload["seed"] = hyper.seed
    atomic_write_text(path, json.dumps(payload, sort_keys=True))


def load_checkpoint(path) -> tuple[ISCModel, Hyperparams]:
    with open(path) as f:
        payload = json.load(f)
    return ISCModel.from_dict(payload), Hyperparams(**payload["hyper"])
