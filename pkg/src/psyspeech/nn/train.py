"""Minibatch training with SGD or Adam and global-norm clipping."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    optimizer: str = "adam"
    clip_norm: float = 5.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not self.clip_norm > 0:
            raise ValueError("clip_norm must be > 0")


@dataclass
class TrainResult:
    losses: list = field(default_factory=list)
    epochs_run: int = 0


class TrainingDiverged(RuntimeError):
    pass


def clip_gradients(grads, clip_norm):
    """Scale ``grads`` in place so their global L2 norm is at most ``clip_norm``."""
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > clip_norm:
        scale = clip_norm / norm
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


class Adam:
    def __init__(self, params, cfg):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, names):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for k in names:
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            params[k] = params[k] - c.learning_rate * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + c.eps)


class SGD:
    def __init__(self, params, cfg):
        self.cfg = cfg

    def step(self, params, grads, names):
        for k in names:
            params[k] = params[k] - self.cfg.learning_rate * grads[k]


def train(net, inputs, targets, cfg, trainable=None):
    """Fit ``net.params`` in place; returns the per-epoch mean loss curve.

    ``trainable`` restricts updates to a subset of parameter names (the rest
    stay frozen).  Shuffling uses only ``cfg.seed``.
    """
    n = len(inputs)
    if n == 0:
        raise ValueError("empty training set")
    targets = np.asarray(targets)
    names = sorted(net.params) if trainable is None else sorted(trainable)
    unknown = set(names) - set(net.params)
    if unknown:
        raise KeyError(f"unknown parameters {sorted(unknown)}")
    opt = (Adam if cfg.optimizer == "adam" else SGD)(net.params, cfg)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult()
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = [inputs[i] for i in idx]
            try:
                loss, grads = net.loss_and_grads(batch, targets[idx])
            except FloatingPointError as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc
            clip_gradients(grads, cfg.clip_norm)
            if cfg.learning_rate > 0:
                opt.step(net.params, grads, names)
            total += loss * len(idx)
        mean = total / n
        if not np.isfinite(mean):
            raise TrainingDiverged(f"epoch {epoch}: loss is {mean}")
        result.losses.append(mean)
        result.epochs_run = epoch + 1
    return result
