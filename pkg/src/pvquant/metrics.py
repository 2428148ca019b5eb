"""Scoring rules for quantile forecasts.

Forecast collections are accepted either as a list of :class:`QuantileMatrix`
or as an ``(M, T, Q)`` array; observations are ``(M, T)``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import QuantileLevels, QuantileMatrix
from .errors import AlignmentError, EmptyEnsemble, NonPositiveCapacity


def crps_enrg(ensemble, y) -> float:
    """Energy-form CRPS of a finite ensemble against one observation.

    Direct O(Q^2) evaluation of
    ``mean|x_i - y| - 1/(2 Q^2) sum_ij |x_i - x_j|``.
    """
    x = np.asarray(ensemble, dtype=float).ravel()
    if x.size == 0:
        raise EmptyEnsemble("ensemble must contain at least one member")
    q = x.size
    spread = np.abs(x[:, None] - x[None, :]).sum()
    return float(np.abs(x - y).mean() - spread / (2.0 * q * q))


def crps_enrg_sorted(ensemble, y) -> float:
    """Same score as :func:`crps_enrg` via the sorted-sample identity, O(Q log Q).

    Uses ``sum_ij |x_i - x_j| = 2 sum_i (2i - Q - 1) x_(i)`` with 1-based ranks.
    """
    x = np.sort(np.asarray(ensemble, dtype=float).ravel())
    if x.size == 0:
        raise EmptyEnsemble("ensemble must contain at least one member")
    q = x.size
    ranks = np.arange(1, q + 1)
    spread = 2.0 * np.dot(2 * ranks - q - 1, x)
    return float(np.abs(x - y).mean() - spread / (2.0 * q * q))


def crps_rows(values: np.ndarray, observations: np.ndarray) -> np.ndarray:
    """Vectorised eNRG score over the last axis of ``values``.

    values: (..., Q); observations: (...). Uses the sorted identity.
    """
    x = np.sort(np.asarray(values, dtype=float), axis=-1)
    y = np.asarray(observations, dtype=float)
    q = x.shape[-1]
    if q == 0:
        raise EmptyEnsemble("ensemble must contain at least one member")
    w = 2 * np.arange(1, q + 1) - q - 1
    spread = 2.0 * (x @ w)
    return np.abs(x - y[..., None]).mean(axis=-1) - spread / (2.0 * q * q)


def _stack(forecasts) -> tuple[np.ndarray, QuantileLevels | None]:
    if isinstance(forecasts, np.ndarray):
        if forecasts.ndim == 2:
            forecasts = forecasts[None]
        return np.asarray(forecasts, dtype=float), None
    forecasts = list(forecasts)
    if forecasts and isinstance(forecasts[0], QuantileMatrix):
        steps = forecasts[0].horizon_indices
        levels = forecasts[0].levels
        for zm in forecasts:
            if zm.horizon_indices != steps or zm.levels != levels:
                raise AlignmentError("forecasts do not share a horizon and level set")
        return np.stack([zm.values for zm in forecasts]), levels
    return np.asarray(forecasts, dtype=float), None


def _aligned(forecasts, observations, levels=None):
    values, lv = _stack(forecasts)
    y = np.asarray(observations, dtype=float)
    if y.ndim == 1 and values.shape[0] == 1:
        y = y[None]
    if values.ndim != 3 or y.shape != values.shape[:2]:
        raise AlignmentError(f"forecasts {values.shape} and observations {y.shape} are not aligned")
    levels = levels if levels is not None else lv
    return values, y, levels


def crps_summary(forecasts, observations) -> tuple[np.ndarray, float]:
    """Per-step mean CRPS over the evaluation samples, and its mean over steps."""
    values, y, _ = _aligned(forecasts, observations)
    curve = crps_rows(values, y).mean(axis=0)
    return curve, float(curve.mean())


def _interval_columns(values, levels: QuantileLevels, alpha: float):
    if levels is None:
        raise ValueError("quantile levels are required to locate interval bounds")
    lo = levels.index_of(alpha / 2.0)
    hi = levels.index_of(1.0 - alpha / 2.0)
    return values[..., lo], values[..., hi]


def interval_score_values(alpha: float, lower, upper, y) -> np.ndarray:
    lower, upper, y = (np.asarray(a, dtype=float) for a in (lower, upper, y))
    below = (lower - y) * (y <= lower)
    above = (y - upper) * (y >= upper)
    return (upper - lower) + (2.0 / alpha) * below + (2.0 / alpha) * above


def interval_score(alpha: float, forecasts, observations, levels: QuantileLevels | None = None) -> float:
    """Interval score of the central (1 - alpha) interval.

    Averaged over the T steps of each sample first, then over samples.
    """
    values, y, levels = _aligned(forecasts, observations, levels)
    lower, upper = _interval_columns(values, levels, alpha)
    per_sample = interval_score_values(alpha, lower, upper, y).mean(axis=1)
    return float(per_sample.mean())


def _errors(point_forecasts, observations, capacity):
    if not capacity > 0:
        raise NonPositiveCapacity(f"capacity must be positive, got {capacity}")
    f = np.asarray(point_forecasts, dtype=float)
    y = np.asarray(observations, dtype=float)
    if f.shape != y.shape:
        raise AlignmentError(f"point forecasts {f.shape} and observations {y.shape} are not aligned")
    return f - y


def nmae(point_forecasts, observations, capacity: float) -> float:
    """Mean absolute error as a percentage of installed capacity."""
    e = _errors(point_forecasts, observations, capacity)
    return float(100.0 * np.mean(np.abs(e)) / capacity)


def nrmse(point_forecasts, observations, capacity: float) -> float:
    """Root-mean-square error as a percentage of installed capacity."""
    e = _errors(point_forecasts, observations, capacity)
    return float(100.0 * np.sqrt(np.mean(e * e)) / capacity)


def empirical_coverage(forecasts, observations, alpha: float, levels: QuantileLevels | None = None) -> float:
    """Fraction of (sample, step) pairs inside the central (1 - alpha) interval (bounds inclusive)."""
    values, y, levels = _aligned(forecasts, observations, levels)
    lower, upper = _interval_columns(values, levels, alpha)
    return float(np.mean((y >= lower) & (y <= upper)))


def central_widths(levels: QuantileLevels) -> Sequence[float]:
    """Central-interval coverages available from a symmetric level set, widest first."""
    out = []
    for q in levels:
        if q < 0.5 - 1e-12 and (1.0 - q) in levels:
            out.append(round(1.0 - 2.0 * q, 10))
    return out
