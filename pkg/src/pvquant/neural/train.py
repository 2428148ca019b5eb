"""Mini-batch training of the networks on the smoothed multi-output quantile loss."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DivergenceDetected, EmptySampleSet
from ..loss import HuberConfig, batch_huber_loss
from .models import Architecture, Network

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 64
    seed: int = 0
    huber: HuberConfig = field(default_factory=HuberConfig)
    dtype: str = "float32"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "huber_delta": self.huber.delta,
            "dtype": self.dtype,
        }


def default_train_config(architecture, **overrides) -> TrainConfig:
    """MLP: lr 1e-2, batch 8. LSTM and encoder-decoders: lr 1e-3, batch 64. 500 epochs each."""
    arch = Architecture.parse(architecture) if isinstance(architecture, str) else architecture
    if arch is Architecture.MLP:
        cfg = TrainConfig(learning_rate=1e-2, epochs=500, batch_size=8)
    else:
        cfg = TrainConfig(learning_rate=1e-3, epochs=500, batch_size=64)
    return replace(cfg, **overrides)


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * np.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for k, p in params.items():
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= (lr_t * m / (np.sqrt(v) + self.eps)).astype(p.dtype, copy=False)


def loss_and_grads(model: Network, weather, past, targets, levels, delta):
    out, cache = model.forward(weather, past)
    pred = out.reshape(-1, model.spec.n_steps, model.spec.n_quantiles)
    loss, dpred = batch_huber_loss(pred, targets, levels, delta)
    grads = model.backward(cache, dpred.reshape(out.shape))
    return loss, grads


@dataclass
class TrainResult:
    model: Network
    history: list[float]


def train(model: Network, samples, cfg: TrainConfig, levels, on_epoch=None) -> TrainResult:
    """Fit ``model`` in place on a scaled sample set and return the per-epoch mean loss.

    ``samples`` needs ``inputs``, ``targets`` (normalized by capacity) and
    optionally ``past_pv``. Batches are reshuffled every epoch from ``cfg.seed``.
    ``on_epoch(n_done, model)`` is called after every epoch; since nothing in
    the update depends on ``cfg.epochs``, the model seen after ``e`` epochs is
    exactly the one a run with ``epochs=e`` returns.
    """
    weather = np.asarray(samples.inputs)
    targets = np.asarray(samples.targets)
    n = weather.shape[0]
    if n == 0:
        raise EmptySampleSet("cannot train on an empty sample set")
    dtype = np.dtype(cfg.dtype)
    if model.dtype != dtype:
        model.params = {k: v.astype(dtype) for k, v in model.params.items()}
    weather = weather.astype(dtype)
    targets = targets.astype(dtype)
    past = getattr(samples, "past_pv", None)
    past = None if past is None else np.asarray(past, dtype=dtype)
    levels = np.asarray(getattr(levels, "levels", levels), dtype=dtype)
    delta = cfg.huber.delta

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    history = []
    bs = min(cfg.batch_size, n)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, bs):
            idx = order[s : s + bs]
            loss, grads = loss_and_grads(
                model, weather[idx], None if past is None else past[idx], targets[idx], levels, delta
            )
            if not np.isfinite(loss):
                raise DivergenceDetected(f"non-finite training loss at epoch {epoch}")
            opt.step(model.params, grads)
            total += loss * len(idx)
        history.append(total / n)
        if on_epoch is not None:
            on_epoch(epoch + 1, model)
    log.debug("trained %s: final loss %.5f", model.spec.architecture.value, history[-1])
    return TrainResult(model, history)
