from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..rng import RngStream
from .model import Examples, Model


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.01
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    temperature: float = 1.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def train(model: Model, examples: Examples, config: TrainConfig, rng: RngStream | None = None) -> Model:
    """Full-batch descent on the mean loss; returns a trained copy.

    Training is deterministic: there is no sampling inside an epoch, so
    ``rng`` is only recorded in the model metadata.
    """
    if len(examples) == 0:
        raise ValueError("no labelled examples to train on")
    out = model.copy()
    p = out.params
    m = {k: np.zeros_like(v) for k, v in p.items()}
    v2 = {k: np.zeros_like(v) for k, v in p.items()}
    b1, b2 = config.beta1, config.beta2
    history = []
    for epoch in range(1, config.epochs + 1):
        loss, grads = out.loss_and_grad(examples, config.temperature)
        if not math.isfinite(loss):
            raise TrainingDiverged(epoch, loss)
        history.append(loss)
        if config.optimizer == "sgd":
            for k in p:
                p[k] -= config.learning_rate * grads[k]
            continue
        c1 = 1 - b1 ** epoch
        c2 = 1 - b2 ** epoch
        for k in p:
            g = grads[k]
            m[k] = b1 * m[k] + (1 - b1) * g
            v2[k] = b2 * v2[k] + (1 - b2) * g * g
            p[k] -= config.learning_rate * (m[k] / c1) / (np.sqrt(v2[k] / c2) + config.eps)
    if config.epochs:
        out.meta["loss_history"] = out.meta.get("loss_history", []) + history
        out.meta["epochs_trained"] = out.meta.get("epochs_trained", 0) + config.epochs
        if rng is not None:
            out.meta["train"] = out.meta.get("train", []) + [str(rng)]
    for k, v in p.items():
        if not np.isfinite(v).all():
            raise TrainingDiverged(config.epochs, float("nan"))
    return out
