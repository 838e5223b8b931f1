"""Mini-batch Adam training on categorical cross-entropy."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 50
    epochs: int = 10
    seed: int = 0


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.epsilon = lr, beta1, beta2, epsilon
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        scale = self.lr * np.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= (scale * m / (np.sqrt(v) + self.epsilon)).astype(p.dtype)


def train(model, inputs, labels, config: TrainConfig = TrainConfig(), progress=None):
    """Fit ``model`` in place; returns ``(model, per-epoch mean loss)``.

    Shuffling and dropout draw from two generators derived from
    ``config.seed``, so a run is reproducible bit for bit.
    """
    inputs = np.asarray(inputs)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n == 0:
        raise ParameterError("cannot train on an empty dataset")
    if labels.min() < 0 or labels.max() >= model.n_classes:
        raise ParameterError(f"labels must lie in [0, {model.n_classes})")
    shuffle_rng = np.random.default_rng([config.seed, 0])
    dropout_rng = np.random.default_rng([config.seed, 1])
    opt = Adam(model.parameters(), config.lr, config.beta1, config.beta2, config.epsilon)
    history = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss = model.loss_and_grad(inputs[idx], labels[idx], dropout_rng)
            opt.step(model.gradients())
            total += loss * len(idx)
        history.append(total / n)
        log.info("epoch %d/%d loss %.4f", epoch + 1, config.epochs, history[-1])
        if progress is not None:
            progress(epoch, history[-1])
    model.trained = True
    return model, history


def accuracy(model, inputs, labels) -> float:
    pred = model.forward(inputs).argmax(axis=1)
    return float(np.mean(pred == np.asarray(labels)))
