"""Domain types shared by every module: quantile levels, quantile matrices,
prediction intervals, PV/weather series and the gate schedule.

All horizon arithmetic is on a fixed 15-minute grid; step ``k`` of a day is
the quarter-hour starting at ``00:00 + 15 * k`` minutes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InvalidQuantile,
    MissingQuantileLevel,
    NonPositiveCapacity,
    NonUniformInput,
    ShapeMismatch,
    StepOutOfRange,
)

STEP_MINUTES = 15
STEPS_PER_DAY = 96
PAST_PV_STEPS = 12  # three hours of history
LEVEL_TOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QuantileLevels:
    levels: tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(1, 10))

    def __post_init__(self):
        lv = tuple(float(q) for q in self.levels)
        if not lv:
            raise InvalidQuantile("at least one quantile level is required")
        if any(not 0.0 < q < 1.0 for q in lv):
            raise InvalidQuantile(f"levels must lie in (0, 1): {lv}")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise InvalidQuantile(f"levels must be strictly increasing: {lv}")
        object.__setattr__(self, "levels", lv)

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels)

    def index_of(self, q: float) -> int:
        for i, level in enumerate(self.levels):
            if abs(level - q) <= LEVEL_TOL:
                return i
        raise MissingQuantileLevel(f"quantile level {q} not in {self.levels}")

    def __contains__(self, q: float) -> bool:
        return any(abs(level - q) <= LEVEL_TOL for level in self.levels)


DEFAULT_LEVELS = QuantileLevels()


@dataclass(frozen=True)
class PredictionInterval:
    alpha: float
    lower: float
    upper: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class QuantileMatrix:
    """T x Q block of quantile forecasts issued at one time.

    Rows follow ``horizon_indices`` (step offsets in the day), columns follow
    ``levels``. When ``capacity`` is given the values are clipped into
    ``[0, capacity]`` on construction.
    """

    horizon_indices: tuple[int, ...]
    values: np.ndarray
    levels: QuantileLevels = DEFAULT_LEVELS
    issue_time: Optional[np.datetime64] = None
    capacity: Optional[float] = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 2:
            raise ShapeMismatch(f"values must be 2-D, got shape {vals.shape}")
        steps = tuple(int(k) for k in self.horizon_indices)
        if vals.shape != (len(steps), len(self.levels)):
            raise ShapeMismatch(
                f"values shape {vals.shape} != ({len(steps)}, {len(self.levels)})"
            )
        if self.capacity is not None:
            if self.capacity <= 0:
                raise NonPositiveCapacity(f"capacity must be positive, got {self.capacity}")
            vals = np.clip(vals, 0.0, self.capacity)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "horizon_indices", steps)

    @property
    def n_steps(self) -> int:
        return len(self.horizon_indices)

    def row(self, k: int) -> np.ndarray:
        try:
            i = self.horizon_indices.index(int(k))
        except ValueError:
            raise StepOutOfRange(f"step {k} not in horizon {self.horizon_indices[0]}..{self.horizon_indices[-1]}") from None
        return self.values[i]

    def column(self, q: float) -> np.ndarray:
        return self.values[:, self.levels.index_of(q)]

    def replace_values(self, values: np.ndarray) -> "QuantileMatrix":
        return QuantileMatrix(self.horizon_indices, values, self.levels, self.issue_time, self.capacity)


def enforce_monotonicity(zm: QuantileMatrix) -> QuantileMatrix:
    """Repair quantile crossing by sorting each row ascending."""
    return zm.replace_values(np.sort(zm.values, axis=1))


def central_interval(zm: QuantileMatrix, alpha: float, k: int) -> PredictionInterval:
    """Central (1 - alpha) interval at step ``k`` from the alpha/2 and 1 - alpha/2 columns."""
    lo = zm.levels.index_of(alpha / 2.0)
    hi = zm.levels.index_of(1.0 - alpha / 2.0)
    row = zm.row(k)
    return PredictionInterval(alpha, float(row[lo]), float(row[hi]))


class Gate(str, enum.Enum):
    DAY_AHEAD_12 = "DayAhead12"
    INTRA_00 = "Intra00"
    INTRA_06 = "Intra06"
    INTRA_12 = "Intra12"
    INTRA_18 = "Intra18"

    @classmethod
    def parse(cls, name: str) -> "Gate":
        key = name.strip().lower().replace("-", "").replace("_", "")
        for g in cls:
            if g.value.lower() == key:
                return g
        raise ValueError(f"unknown gate {name!r}; expected one of {[g.value for g in cls]}")


@dataclass(frozen=True)
class GateSchedule:
    gate: Gate
    horizon_start_k: int
    horizon_end_k: int
    uses_past_pv: bool
    issue_hour: int
    issue_day_offset: int = 0  # -1: forecast issued on the previous day

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.horizon_start_k, self.horizon_end_k + 1)

    @property
    def issue_step(self) -> int:
        """Step index of the issue instant within its own day."""
        return self.issue_hour * 60 // STEP_MINUTES


GATES: dict[Gate, GateSchedule] = {
    Gate.DAY_AHEAD_12: GateSchedule(Gate.DAY_AHEAD_12, 11, 80, False, 12, -1),
    Gate.INTRA_00: GateSchedule(Gate.INTRA_00, 11, 80, False, 0),
    Gate.INTRA_06: GateSchedule(Gate.INTRA_06, 24, 80, True, 6),
    Gate.INTRA_12: GateSchedule(Gate.INTRA_12, 48, 80, True, 12),
    Gate.INTRA_18: GateSchedule(Gate.INTRA_18, 72, 80, True, 18),
}


def gate_schedule(gate: Gate | str) -> GateSchedule:
    if isinstance(gate, GateSchedule):
        return gate
    return GATES[Gate.parse(gate) if isinstance(gate, str) else gate]


def horizon_length(gate: Gate | GateSchedule | str) -> int:
    sched = gate_schedule(gate)
    return sched.horizon_end_k - sched.horizon_start_k + 1


@dataclass(frozen=True)
class PvSeries:
    """Uniformly sampled PV power in kW, clipped to [0, installed_capacity]."""

    timestamps: np.ndarray
    power: np.ndarray
    installed_capacity: float = 466.4
    resolution: int = STEP_MINUTES  # minutes

    def __post_init__(self):
        if self.installed_capacity <= 0:
            raise NonPositiveCapacity("installed capacity must be positive")
        ts = np.asarray(self.timestamps, dtype="datetime64[m]")
        power = np.asarray(self.power, dtype=float)
        if ts.shape != power.shape or ts.ndim != 1:
            raise ShapeMismatch("timestamps and power must be 1-D and aligned")
        if len(ts) > 1:
            steps = np.diff(ts).astype(np.int64)
            if np.any(steps != self.resolution):
                raise NonUniformInput(
                    f"timestamps are not uniformly spaced at {self.resolution} min"
                )
        object.__setattr__(self, "timestamps", _frozen(ts, ts.dtype))
        object.__setattr__(self, "power", _frozen(np.clip(power, 0.0, self.installed_capacity)))

    def __len__(self) -> int:
        return len(self.power)


@dataclass(frozen=True)
class WeatherForecastSet:
    """One weather forecast run: per-step irradiance (W/m2) and 2-m temperature (C).

    ``steps`` are offsets in 15-minute units from ``issue_time``.
    """

    issue_time: np.datetime64
    steps: np.ndarray
    irradiance: np.ndarray
    temperature: np.ndarray

    def __post_init__(self):
        issue = np.datetime64(self.issue_time, "m")
        minutes = (issue - issue.astype("datetime64[D]")).astype(np.int64)
        if minutes % 360 != 0:
            raise ValueError(f"issue time {issue} is not one of 00:00/06:00/12:00/18:00")
        steps = np.asarray(self.steps, dtype=np.int64)
        irr = np.asarray(self.irradiance, dtype=float)
        temp = np.asarray(self.temperature, dtype=float)
        if not (steps.shape == irr.shape == temp.shape) or steps.ndim != 1:
            raise ShapeMismatch("steps, irradiance and temperature must be aligned 1-D arrays")
        if len(steps) > 1 and np.any(np.diff(steps) != 1):
            raise NonUniformInput("weather horizon steps must be consecutive 15-min steps")
        object.__setattr__(self, "issue_time", issue)
        object.__setattr__(self, "steps", _frozen(steps, np.int64))
        object.__setattr__(self, "irradiance", _frozen(irr))
        object.__setattr__(self, "temperature", _frozen(temp))

    @property
    def issue_hour(self) -> int:
        return int((self.issue_time - self.issue_time.astype("datetime64[D]")).astype(np.int64) // 60)

    def lookup(self, offsets: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Irradiance and temperature at the given step offsets from issue."""
        offsets = np.asarray(offsets, dtype=np.int64)
        if len(self.steps) == 0:
            raise StepOutOfRange("empty weather horizon")
        idx = offsets - self.steps[0]
        if np.any(idx < 0) or np.any(idx >= len(self.steps)):
            raise StepOutOfRange(
                f"offsets {offsets.min()}..{offsets.max()} outside forecast horizon "
                f"{self.steps[0]}..{self.steps[-1]}"
            )
        return self.irradiance[idx], self.temperature[idx]
