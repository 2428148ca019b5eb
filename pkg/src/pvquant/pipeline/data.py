"""Dataset container, CSV ingestion and minute-to-quarter-hour resampling."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from ..core import STEP_MINUTES, STEPS_PER_DAY, PvSeries, WeatherForecastSet
from ..errors import NonUniformInput

log = logging.getLogger(__name__)


def resample_to_15min(raw: PvSeries) -> PvSeries:
    """Average each block of 15 one-minute values; a trailing partial block is dropped."""
    if raw.resolution == STEP_MINUTES:
        return raw
    if raw.resolution != 1:
        raise NonUniformInput(f"expected 1-minute input, got {raw.resolution}-minute resolution")
    n_full = len(raw) // STEP_MINUTES
    dropped = len(raw) - n_full * STEP_MINUTES
    if dropped:
        log.warning("dropping %d trailing minutes that do not fill a 15-minute window", dropped)
    power = raw.power[: n_full * STEP_MINUTES].reshape(n_full, STEP_MINUTES).mean(axis=1)
    ts = raw.timestamps[: n_full * STEP_MINUTES : STEP_MINUTES]
    return PvSeries(ts, power, raw.installed_capacity, STEP_MINUTES)


@dataclass(frozen=True)
class Dataset:
    """Quarter-hourly PV observations on whole days plus every weather issue.

    ``pv`` starts at midnight of ``start_day``; missing observations are NaN in
    :meth:`day_matrix`. ``truth`` carries generator internals for synthetic data.
    """

    pv: PvSeries
    weather: tuple[WeatherForecastSet, ...]
    span_days: int
    start_day: np.datetime64
    truth: Optional[object] = None
    _days: np.ndarray = field(init=False, repr=False, compare=False)
    _issues: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        start = np.datetime64(self.start_day, "D")
        object.__setattr__(self, "start_day", start)
        mat = np.full((self.span_days, STEPS_PER_DAY), np.nan)
        idx = ((self.pv.timestamps - start.astype("datetime64[m]")).astype(np.int64)) // STEP_MINUTES
        ok = (idx >= 0) & (idx < self.span_days * STEPS_PER_DAY)
        mat.reshape(-1)[idx[ok]] = self.pv.power[ok]
        mat.setflags(write=False)
        object.__setattr__(self, "_days", mat)
        object.__setattr__(self, "_issues", {np.datetime64(w.issue_time, "m"): w for w in self.weather})

    @classmethod
    def from_series(cls, pv: PvSeries, weather: Iterable[WeatherForecastSet], truth=None) -> "Dataset":
        pv = resample_to_15min(pv)
        start = pv.timestamps[0].astype("datetime64[D]")
        end = pv.timestamps[-1].astype("datetime64[D]")
        span = int((end - start).astype(np.int64)) + 1
        return cls(pv, tuple(sorted(weather, key=lambda w: w.issue_time)), span, start, truth)

    @property
    def capacity(self) -> float:
        return self.pv.installed_capacity

    def day_matrix(self) -> np.ndarray:
        """(span_days, 96) PV in kW, NaN where no observation exists."""
        return self._days

    def day_start(self, day: int) -> np.datetime64:
        return (self.start_day + np.timedelta64(day, "D")).astype("datetime64[m]")

    def issue(self, time) -> Optional[WeatherForecastSet]:
        return self._issues.get(np.datetime64(time, "m"))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.pv.timestamps.astype(np.int64)).tobytes())
        h.update(np.ascontiguousarray(self.pv.power).tobytes())
        h.update(repr(self.pv.installed_capacity).encode())
        for w in self.weather:
            h.update(str(w.issue_time).encode())
            for a in (w.steps, w.irradiance, w.temperature):
                h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]


def _naive_minutes(col: pd.Series) -> np.ndarray:
    ts = pd.to_datetime(col)
    if getattr(ts.dt, "tz", None) is not None:
        ts = ts.dt.tz_localize(None)
    return ts.to_numpy().astype("datetime64[m]")


def read_pv_csv(path, capacity: float, sep: str = ",") -> PvSeries:
    """Read ``timestamp_iso8601, power_kw`` rows; 1-minute data is resampled to 15 minutes."""
    df = pd.read_csv(path, sep=sep)
    ts_col, p_col = df.columns[:2]
    ts = _naive_minutes(df[ts_col])
    power = df[p_col].to_numpy(dtype=float)
    order = np.argsort(ts, kind="stable")
    ts, power = ts[order], power[order]
    if len(ts) < 2:
        raise NonUniformInput("need at least two PV rows to detect the resolution")
    spacing = np.diff(ts).astype(np.int64)
    resolution = int(np.median(spacing))
    if resolution not in (1, STEP_MINUTES):
        raise NonUniformInput(f"unsupported PV resolution of {resolution} minutes")
    series = PvSeries(ts, power, capacity, resolution)
    return resample_to_15min(series)


def read_weather_csv(path, sep: str = ",") -> list[WeatherForecastSet]:
    """Read ``issue_time_iso8601, valid_time_iso8601, irradiance_wm2, temperature_c`` rows."""
    df = pd.read_csv(path, sep=sep)
    issue_col, valid_col, irr_col, temp_col = df.columns[:4]
    issue = _naive_minutes(df[issue_col])
    valid = _naive_minutes(df[valid_col])
    steps = (valid - issue).astype(np.int64)
    if np.any(steps % STEP_MINUTES):
        raise NonUniformInput("weather valid times are not on the 15-minute grid")
    steps //= STEP_MINUTES
    irr = df[irr_col].to_numpy(dtype=float)
    temp = df[temp_col].to_numpy(dtype=float)
    out = []
    for t in np.unique(issue):
        m = issue == t
        order = np.argsort(steps[m], kind="stable")
        out.append(WeatherForecastSet(t, steps[m][order], irr[m][order], temp[m][order]))
    return out


def _iso(ts: np.ndarray) -> np.ndarray:
    return np.datetime_as_string(np.asarray(ts, dtype="datetime64[m]"), unit="m")


def write_pv_csv(series: PvSeries, path) -> None:
    pd.DataFrame({"timestamp_iso8601": _iso(series.timestamps), "power_kw": series.power}).to_csv(
        path, index=False, float_format="%.6f"
    )


def write_weather_csv(weather: Iterable[WeatherForecastSet], path) -> None:
    frames = []
    for w in weather:
        valid = w.issue_time + w.steps * np.timedelta64(STEP_MINUTES, "m")
        frames.append(
            pd.DataFrame(
                {
                    "issue_time_iso8601": _iso(np.full(len(w.steps), w.issue_time)),
                    "valid_time_iso8601": _iso(valid),
                    "irradiance_wm2": w.irradiance,
                    "temperature_c": w.temperature,
                }
            )
        )
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.6f")


def load_dataset(pv_path, weather_path, capacity: float) -> Dataset:
    return Dataset.from_series(read_pv_csv(pv_path, capacity), read_weather_csv(weather_path))


def save_dataset(ds: Dataset, directory) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pv_path, w_path = directory / "pv.csv", directory / "weather.csv"
    write_pv_csv(ds.pv, pv_path)
    write_weather_csv(ds.weather, w_path)
    return pv_path, w_path
