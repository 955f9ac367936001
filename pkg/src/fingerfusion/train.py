"""Minibatch SGD training on FTDS datasets."""
from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional

import numpy as np

from .core.layers import euclidean_loss
from .core.optim import sgd_step
from .data.ftds import load_arrays
from .netzoo import build
from .netzoo.checkpoint import Checkpoint, config_hash

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, lr: float, loss: float):
        super().__init__(f"non-finite loss {loss} at iteration {iteration} (lr={lr})")
        self.iteration = iteration
        self.lr = lr


@dataclass
class TrainConfig:
    arch_id: str = "fusion-slow"
    batch_size: int = 196
    lr: float = 0.01
    momentum: float = 0.9
    max_iters: int = 400000
    seed: int = 0
    data: str = ""
    include_palm: bool = True
    tied: bool = True
    log_every: int = 100
    checkpoint_every: int = 0
    # step decay: lr *= lr_gamma every lr_step iterations (0 = constant lr)
    lr_step: int = 0
    lr_gamma: float = 0.1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def lr_at(self, iteration: int) -> float:
        if self.lr_step <= 0:
            return self.lr
        return self.lr * self.lr_gamma ** ((iteration - 1) // self.lr_step)

    def to_dict(self) -> dict:
        return asdict(self)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hashed_config(cfg: TrainConfig) -> dict:
    """Everything that determines the trained weights: config minus the dataset path, plus dataset bytes."""
    d = cfg.to_dict()
    d.pop("data")
    d.pop("log_every")
    d.pop("checkpoint_every")
    d["dataset_sha256"] = file_digest(cfg.data)
    return d


class BatchOrder:
    """Consecutive minibatches over one seed-derived permutation per epoch."""

    def __init__(self, n: int, batch_size: int, seed: int):
        self.n = n
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self._buf = np.zeros(0, dtype=np.int64)

    def next(self) -> np.ndarray:
        while self._buf.size < self.batch_size:
            self._buf = np.concatenate([self._buf, self.rng.permutation(self.n)])
        out, self._buf = self._buf[: self.batch_size], self._buf[self.batch_size :]
        return out


def _inputs(net, arrays, idx):
    depth = arrays["depth"][idx]
    edge = arrays["edge"][idx] if "edge" in net.streams else None
    return depth, edge


def train(
    cfg: TrainConfig,
    arrays: Optional[dict] = None,
    loss_log: Optional[List[tuple]] = None,
    on_checkpoint: Optional[Callable[[int, Checkpoint], None]] = None,
) -> Checkpoint:
    """Train ``cfg.arch_id`` and return the final checkpoint.

    ``arrays`` may supply pre-loaded dataset arrays (see :func:`load_arrays`);
    otherwise ``cfg.data`` is read. ``loss_log`` receives ``(iteration, loss, lr)``
    rows every ``cfg.log_every`` iterations.
    """
    if arrays is None:
        arrays = load_arrays(cfg.data, cfg.include_palm)
    n = len(arrays["depth"])
    if n == 0:
        raise ValueError("training dataset is empty")
    net = build(cfg.arch_id, include_palm=cfg.include_palm, seed=cfg.seed, tied=cfg.tied)
    if "edge" in net.streams and arrays.get("edge") is None:
        raise ValueError(f"{cfg.arch_id} needs edge images but the dataset has none")
    targets = arrays["target"][:, : net.output_dim]
    digest = config_hash(hashed_config(cfg)) if cfg.data else config_hash(cfg.to_dict())
    order = BatchOrder(n, cfg.batch_size, cfg.seed)

    def snapshot(it):
        return Checkpoint.from_network(net, {"iterations": it, "seed": cfg.seed}, digest)

    for it in range(1, cfg.max_iters + 1):
        idx = order.next()
        lr = cfg.lr_at(it)
        depth, edge = _inputs(net, arrays, idx)
        pred = net.forward(depth, edge)
        loss, grad = euclidean_loss(pred, targets[idx])
        if not np.isfinite(loss):
            raise TrainingDiverged(it, lr, loss)
        net.backward(grad)
        sgd_step(net.params, lr, cfg.momentum)
        if loss_log is not None and (it % cfg.log_every == 0 or it == 1 or it == cfg.max_iters):
            loss_log.append((it, loss, lr))
            log.info("iter %d loss %.6f lr %g", it, loss, lr)
        if on_checkpoint and cfg.checkpoint_every and it % cfg.checkpoint_every == 0 and it != cfg.max_iters:
            on_checkpoint(it, snapshot(it))
    return snapshot(cfg.max_iters)


def write_loss_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss", "lr"])
        for it, loss, lr in rows:
            w.writerow([it, repr(float(loss)), repr(float(lr))])
