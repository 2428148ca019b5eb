"""Synthetic PV + weather-forecast generator with closed-form conditional quantiles.

PV at step k of day d:

    min(C, C * peak * env(k) * D_d * exp(sigma * z_{d,k} - sigma^2 / 2))

with ``env`` a clear-sky bell that is exactly zero outside steps 11..80,
``D_d ~ U(clearness_low, clearness_high)`` the day's clearness and ``z`` a
stationary AR(1) N(0, 1) process within the day. Given ``D_d`` the
q-quantile is therefore ``min(C, C * peak * env(k) * D_d * exp(sigma * Phi^-1(q) - sigma^2/2))``.

Weather forecasts see a noisy clearness ``D_d * exp(s * xi - s^2/2)`` whose
log-error scale ``s`` grows with lead time, plus small per-step noise.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from ..core import STEP_MINUTES, STEPS_PER_DAY, PvSeries, QuantileLevels, WeatherForecastSet
from .data import Dataset

FIRST_LIGHT, LAST_LIGHT = 11, 80
ISSUE_HOURS = (0, 6, 12, 18)


@dataclass(frozen=True)
class SyntheticConfig:
    capacity: float = 466.4
    start: str = "2020-04-04"
    peak_fraction: float = 0.9
    clearness_low: float = 0.2
    clearness_high: float = 1.0
    cloud_sigma: float = 0.3
    cloud_phi: float = 0.93
    forecast_sigma0: float = 0.05
    forecast_sigma_per_hour: float = 0.006
    forecast_step_noise: float = 0.04
    horizon_steps: int = 160


@dataclass(frozen=True)
class SyntheticTruth:
    config: SyntheticConfig
    clearness: np.ndarray  # (days,)

    def conditional_quantiles(self, day: int, levels: QuantileLevels) -> np.ndarray:
        return conditional_quantiles(self.clearness[day], levels, self.config)


def envelope(k) -> np.ndarray:
    """Clear-sky shape in [0, 1]; zero outside steps 11..80."""
    k = np.asarray(k, dtype=float)
    phase = np.pi * (k - (FIRST_LIGHT - 0.5)) / (LAST_LIGHT - FIRST_LIGHT + 1)
    inside = (k >= FIRST_LIGHT) & (k <= LAST_LIGHT)
    return np.where(inside, np.sin(np.clip(phase, 0.0, np.pi)) ** 1.5, 0.0)


def conditional_quantiles(clearness: float, levels: QuantileLevels, cfg: SyntheticConfig = SyntheticConfig()) -> np.ndarray:
    """(96, Q) PV quantiles in kW for a day of known clearness."""
    s = cfg.cloud_sigma
    z = norm.ppf(levels.as_array())
    env = envelope(np.arange(STEPS_PER_DAY))
    raw = cfg.capacity * cfg.peak_fraction * env[:, None] * clearness * np.exp(s * z[None, :] - 0.5 * s * s)
    return np.minimum(raw, cfg.capacity)


def _ar1(rng, n_days, n_steps, phi):
    z = np.empty((n_days, n_steps))
    z[:, 0] = rng.standard_normal(n_days)
    shock = rng.standard_normal((n_days, n_steps)) * np.sqrt(1.0 - phi * phi)
    for k in range(1, n_steps):
        z[:, k] = phi * z[:, k - 1] + shock[:, k]
    return z


def generate_synthetic(days: int, seed: int = 0, capacity: float | None = None, cfg: SyntheticConfig | None = None,
                       clearness: float | None = None) -> Dataset:
    """Build a ``days``-long dataset with forecasts issued at 00/06/12/18 every day.

    Forecasts are also issued on the day before the first PV day so that the
    day-ahead gate is available from day 0. ``clearness`` pins every day's
    clearness to one value (for Monte-Carlo checks of the quantile formula).
    """
    if days < 2:
        raise ValueError("need at least two days")
    cfg = cfg or SyntheticConfig()
    if capacity is not None and capacity != cfg.capacity:
        cfg = replace(cfg, capacity=float(capacity))
    capacity = cfg.capacity
    rng = np.random.default_rng(seed)
    n_all = days + 3  # day -1 .. days + 1: forecast horizons spill past the last day
    if clearness is None:
        D = rng.uniform(cfg.clearness_low, cfg.clearness_high, n_all)
    else:
        D = np.full(n_all, float(clearness))
    z = _ar1(rng, n_all, STEPS_PER_DAY, cfg.cloud_phi)
    s = cfg.cloud_sigma
    env = envelope(np.arange(STEPS_PER_DAY))
    cloud = np.exp(s * z - 0.5 * s * s)
    pv_all = np.minimum(capacity, capacity * cfg.peak_fraction * env[None, :] * D[:, None] * cloud)

    start = np.datetime64(cfg.start, "D")
    ts = start.astype("datetime64[m]") + np.arange(days * STEPS_PER_DAY) * np.timedelta64(STEP_MINUTES, "m")
    pv = PvSeries(ts, pv_all[1 : days + 1].reshape(-1), capacity, STEP_MINUTES)

    # forecasts: one log-normal clearness error per (issue, target day)
    weather = []
    h = cfg.horizon_steps
    offsets = np.arange(h)
    for day in range(-1, days):
        for hour in ISSUE_HOURS:
            issue_step = day * STEPS_PER_DAY + hour * 60 // STEP_MINUTES
            abs_steps = issue_step + offsets  # relative to midnight of day 0
            tgt_day = np.floor_divide(abs_steps, STEPS_PER_DAY)
            k = abs_steps - tgt_day * STEPS_PER_DAY
            xi = rng.standard_normal(3)  # target days day, day+1, day+2
            lead_h = ((tgt_day * STEPS_PER_DAY + 46) - issue_step) * STEP_MINUTES / 60.0
            sig = cfg.forecast_sigma0 + cfg.forecast_sigma_per_hour * np.maximum(lead_h, 0.0)
            err = np.exp(sig * xi[tgt_day - day] - 0.5 * sig * sig)
            d_hat = D[tgt_day + 1] * err
            step_noise = np.exp(cfg.forecast_step_noise * rng.standard_normal(h))
            irr = 1000.0 * envelope(k) * d_hat * step_noise
            temp = 8.0 + 12.0 * d_hat + 6.0 * envelope(k) + 0.5 * rng.standard_normal(h)
            issue_time = start.astype("datetime64[m]") + issue_step * np.timedelta64(STEP_MINUTES, "m")
            weather.append(WeatherForecastSet(issue_time, offsets, irr, temp))

    truth = SyntheticTruth(cfg, D[1 : days + 1].copy())
    return Dataset(pv, tuple(weather), days, start, truth)
