"""Pinball loss, its multi-output sum and the Huber-smoothed training surrogate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import QuantileLevels, QuantileMatrix
from .errors import DimensionMismatch, InvalidQuantile, NonPositiveDelta


@dataclass(frozen=True)
class HuberConfig:
    delta: float = 1e-3  # capacity-normalized units

    def __post_init__(self):
        if not self.delta > 0:
            raise NonPositiveDelta(f"delta must be > 0, got {self.delta}")


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0.0) | (q >= 1.0)):
        raise InvalidQuantile(f"quantile level must lie in (0, 1), got {q}")
    return q


def pinball(q, x, yhat):
    """Quantile loss of forecast ``yhat`` against observation ``x``.

    ``q * (x - yhat)`` when the observation exceeds the forecast, otherwise
    ``(1 - q) * (yhat - x)``. Broadcasts over numpy arrays.
    """
    q = _check_q(q)
    e = np.asarray(x, dtype=float) - np.asarray(yhat, dtype=float)
    out = np.where(e > 0, q * e, (q - 1.0) * e)
    return float(out) if out.ndim == 0 else out


def multi_output_loss(zm, targets, levels: QuantileLevels | None = None) -> float:
    """Pinball loss summed over every horizon step and quantile level.

    ``zm`` is a :class:`QuantileMatrix` or a ``(T, Q)`` array; ``targets`` has
    length T. For a batch ``(N, T, Q)`` / ``(N, T)`` the per-sample sums are
    averaged, which is the training objective.
    """
    if isinstance(zm, QuantileMatrix):
        levels = zm.levels if levels is None else levels
        values = zm.values
    else:
        values = np.asarray(zm, dtype=float)
    if levels is None:
        raise ValueError("levels are required when passing a bare array")
    y = np.asarray(targets, dtype=float)
    if values.shape[-1] != len(levels) or values.shape[:-1] != y.shape:
        raise DimensionMismatch(
            f"forecast shape {values.shape} does not match targets {y.shape} x Q={len(levels)}"
        )
    losses = pinball(levels.as_array(), y[..., None], values)
    per_sample = np.sum(losses, axis=(-2, -1))
    return float(np.mean(per_sample))


def _huber(u, delta):
    au = np.abs(u)
    return np.where(au <= delta, u * u / (2.0 * delta), au - delta / 2.0)


def _huber_slope(u, delta):
    return np.where(np.abs(u) <= delta, u / delta, np.sign(u))


def huber_pinball(q, x, yhat, cfg: HuberConfig = HuberConfig()):
    """Asymmetric Huber loss: ``q*h(e)`` for ``e = x - yhat >= 0`` else ``(1-q)*h(-e)``."""
    q = _check_q(q)
    if not cfg.delta > 0:
        raise NonPositiveDelta(f"delta must be > 0, got {cfg.delta}")
    e = np.asarray(x, dtype=float) - np.asarray(yhat, dtype=float)
    out = np.where(e >= 0, q, 1.0 - q) * _huber(e, cfg.delta)
    return float(out) if out.ndim == 0 else out


def huber_pinball_grad(q, x, yhat, cfg: HuberConfig = HuberConfig()):
    """Derivative of :func:`huber_pinball` with respect to ``yhat``."""
    q = _check_q(q)
    e = np.asarray(x, dtype=float) - np.asarray(yhat, dtype=float)
    out = -np.where(e >= 0, q, 1.0 - q) * _huber_slope(e, cfg.delta)
    return float(out) if out.ndim == 0 else out


def batch_huber_loss(pred: np.ndarray, targets: np.ndarray, levels: np.ndarray, delta: float):
    """Mean over samples of the smoothed multi-output loss, and its gradient.

    pred: (N, T, Q); targets: (N, T); levels: (Q,). Returns ``(loss, dpred)``
    with ``dpred`` in the dtype of ``pred``.
    """
    n = pred.shape[0]
    e = targets[:, :, None] - pred
    w = np.where(e >= 0, levels, 1.0 - levels).astype(pred.dtype, copy=False)
    ae = np.abs(e)
    quad = ae <= delta
    h = np.where(quad, e * e / (2.0 * delta), ae - delta / 2.0)
    slope = np.where(quad, e / delta, np.sign(e))
    loss = float(np.sum(w * h, dtype=np.float64)) / n
    grad = (-(w * slope) / n).astype(pred.dtype, copy=False)
    return loss, grad
