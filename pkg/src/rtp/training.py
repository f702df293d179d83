"""Mini-batch training loop with Adam/SGD, a seeded check split, and early
stopping that restores the best-epoch weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    LOSS_CCE,
    NetworkModel,
    backward_with_loss,
    clone_model,
    data_loss,
    forward,
    regularization_loss,
    restore_params,
    snapshot_params,
)

MONITORED_METRICS = ("val_accuracy", "val_loss", "val_mse")


class DivergenceError(RuntimeError):
    """Loss became NaN/Inf during training."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainingConfig:
    optimizer: str = "adam"  # "adam" | "sgd"
    learning_rate: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 1000
    check_fraction: float = 0.33
    early_stop_patience: int = 5
    early_stop_min_delta: float = 0.005
    monitored_metric: str = "val_accuracy"
    shuffle_each_epoch: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not (0.0 < self.check_fraction < 1.0):
            raise ValueError("check_fraction must be in (0, 1)")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.monitored_metric not in MONITORED_METRICS:
            raise ValueError(f"monitored_metric must be one of {MONITORED_METRICS}")


@dataclass
class TrainingHistory:
    records: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def n_epochs(self) -> int:
        return len(self.records)


class SGD:
    def __init__(self, learning_rate: float):
        self.lr = learning_rate

    def step(self, params, grads) -> None:
        for (w, b), (dw, db) in zip(params, grads):
            w -= self.lr * dw
            b -= self.lr * db


class Adam:
    def __init__(self, learning_rate: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: list | None = None
        self.v: list | None = None

    def step(self, params, grads) -> None:
        if self.m is None:
            self.m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
            self.v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for (w, b), (dw, db), (mw, mb), (vw, vb) in zip(params, grads, self.m, self.v):
            mw *= self.beta1
            mw += (1.0 - self.beta1) * dw
            mb *= self.beta1
            mb += (1.0 - self.beta1) * db
            vw *= self.beta2
            vw += (1.0 - self.beta2) * np.square(dw)
            vb *= self.beta2
            vb += (1.0 - self.beta2) * np.square(db)
            w -= self.lr * (mw / correction1) / (np.sqrt(vw / correction2) + self.eps)
            b -= self.lr * (mb / correction1) / (np.sqrt(vb / correction2) + self.eps)


def _make_optimizer(config: TrainingConfig):
    if config.optimizer == "sgd":
        return SGD(config.learning_rate)
    return Adam(config.learning_rate, config.adam_betas, config.adam_eps)


def _subset(inputs: dict[str, np.ndarray], idx: np.ndarray) -> dict[str, np.ndarray]:
    return {name: arr[idx] for name, arr in inputs.items()}


def accuracy(predictions: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean(np.argmax(predictions, axis=1) == np.argmax(targets, axis=1)))


def _evaluate_metrics(model: NetworkModel, inputs, targets) -> dict[str, float]:
    out = forward(model, inputs)
    out2d = np.atleast_2d(out)
    metrics = {
        "loss": data_loss(out2d, targets, model.loss_kind) + regularization_loss(model),
    }
    if model.loss_kind == LOSS_CCE:
        metrics["accuracy"] = accuracy(out2d, targets)
    else:
        metrics["mae"] = float(np.mean(np.abs(out2d - targets)))
        metrics["mse"] = float(np.mean(np.square(out2d - targets)))
    return metrics


def _monitored_value(metric: str, val_metrics: dict[str, float]) -> float:
    if metric == "val_accuracy":
        return val_metrics["accuracy"]
    if metric == "val_mse":
        return val_metrics["mse"]
    return val_metrics["loss"]


def train(
    model: NetworkModel,
    inputs: dict[str, np.ndarray],
    targets: np.ndarray,
    config: TrainingConfig,
) -> tuple[NetworkModel, TrainingHistory]:
    """Train a copy of the model; returns (trained model, history).

    A seeded check split of `check_fraction` is evaluated each epoch; training
    stops once the monitored metric fails to improve by at least
    `early_stop_min_delta` for `patience` consecutive epochs, and the
    best-epoch weights are restored.
    """
    model = clone_model(model)
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n_total = targets.shape[0]
    if n_total == 0:
        raise ValueError("dataset must be non-empty")

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n_total)
    n_val = max(1, round(config.check_fraction * n_total))
    if n_val >= n_total:
        raise ValueError("check split leaves no training samples")
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    train_inputs = _subset(inputs, train_idx)
    train_targets = targets[train_idx]
    val_inputs = _subset(inputs, val_idx)
    val_targets = targets[val_idx]
    n_train = train_targets.shape[0]

    optimizer = _make_optimizer(config)
    params = [(layer.weights, layer.biases) for layer in model.all_layers()]
    mode = "max" if config.monitored_metric == "val_accuracy" else "min"

    history = TrainingHistory()
    best_value = -math.inf if mode == "max" else math.inf
    best_snapshot = snapshot_params(model)
    wait = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n_train) if config.shuffle_each_epoch else np.arange(n_train)
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, n_train, config.batch_size), start=1):
            batch_idx = order[start : start + config.batch_size]
            grads, batch_loss = backward_with_loss(
                model,
                _subset(train_inputs, batch_idx),
                train_targets[batch_idx],
                model.loss_kind,
            )
            if not math.isfinite(batch_loss):
                raise DivergenceError(epoch, batch_no)
            epoch_loss += batch_loss * len(batch_idx)
            optimizer.step(params, grads)
        epoch_loss /= n_train

        train_metrics = _evaluate_metrics(model, train_inputs, train_targets)
        val_metrics = _evaluate_metrics(model, val_inputs, val_targets)
        record = {"epoch": epoch, "train_batch_loss": epoch_loss}
        record.update({f"train_{k}": v for k, v in train_metrics.items()})
        record.update({f"val_{k}": v for k, v in val_metrics.items()})
        history.records.append(record)

        value = _monitored_value(config.monitored_metric, val_metrics)
        if not math.isfinite(value):
            raise DivergenceError(epoch, 0)
        improved = (
            value > best_value + config.early_stop_min_delta
            if mode == "max"
            else value < best_value - config.early_stop_min_delta
        )
        if improved or epoch == 1:
            best_value = value
            best_snapshot = snapshot_params(model)
            history.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= config.early_stop_patience:
                history.stopped_early = True
                break

    restore_params(model, best_snapshot)
    return model, history
