"""Gate-windowed (weather, past PV, target) samples and the standard scaler."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from ..core import PAST_PV_STEPS, STEP_MINUTES, GateSchedule, gate_schedule
from ..errors import EmptySampleSet, MissingObservation, MissingWeatherIssue, StepOutOfRange
from .data import Dataset

log = logging.getLogger(__name__)

DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray  # features mapped to zero

    def transform(self, X: np.ndarray) -> np.ndarray:
        safe = np.where(self.degenerate, 1.0, self.std)
        out = (np.asarray(X, dtype=float) - self.mean) / safe
        out[:, self.degenerate] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "degenerate": self.degenerate.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float), np.asarray(d["degenerate"], bool))


@dataclass(frozen=True)
class SampleSet:
    """Aligned per-day samples for one gate.

    ``inputs`` interleaves irradiance and temperature per horizon step in
    ascending k. Raw sets are in physical units; after :func:`apply_scaler`
    inputs are standardized and PV blocks are divided by capacity.
    """

    gate: GateSchedule
    days: np.ndarray
    inputs: np.ndarray
    targets: np.ndarray
    past_pv: Optional[np.ndarray]
    capacity: float
    scaler: Optional[Scaler] = None
    excluded: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.days)
        if self.inputs.shape[0] != n or self.targets.shape[0] != n:
            raise ValueError("row counts of days, inputs and targets disagree")
        if self.past_pv is not None and self.past_pv.shape[0] != n:
            raise ValueError("row count of past_pv disagrees")

    @property
    def scaled(self) -> bool:
        return self.scaler is not None

    @property
    def n_samples(self) -> int:
        return len(self.days)

    @property
    def steps(self) -> np.ndarray:
        return self.gate.steps

    def subset(self, days: Iterable[int]) -> "SampleSet":
        wanted = np.asarray(sorted(set(int(d) for d in days)), dtype=np.int64)
        rows = np.flatnonzero(np.isin(self.days, wanted))
        return replace(
            self,
            days=self.days[rows],
            inputs=self.inputs[rows],
            targets=self.targets[rows],
            past_pv=None if self.past_pv is None else self.past_pv[rows],
            excluded={d: r for d, r in self.excluded.items() if d in set(wanted.tolist())},
        )

    def to_dict(self) -> dict:
        return {
            "gate": self.gate.gate.value,
            "steps": [int(self.gate.horizon_start_k), int(self.gate.horizon_end_k)],
            "days": self.days.tolist(),
            "n_input": int(self.inputs.shape[1]),
            "scaled": self.scaled,
            "excluded": {str(k): v for k, v in self.excluded.items()},
            "scaler": self.scaler.to_dict() if self.scaler else None,
        }

    def export_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def build_samples(ds: Dataset, gate, days: Optional[Iterable[int]] = None, strict: bool = False,
                  allow_missing_targets: bool = False) -> SampleSet:
    """Assemble one sample per day for ``gate``.

    Days lacking the gate's weather issue, enough forecast horizon, or any
    needed PV observation are skipped and recorded in ``excluded`` (or raise
    when ``strict``). With ``allow_missing_targets`` a day whose horizon is not
    observed yet is kept with NaN targets, which is what operational
    forecasting needs; the PV history must still be complete.
    """
    sched = gate_schedule(gate)
    steps = sched.steps
    pv = ds.day_matrix()
    day_list = range(ds.span_days) if days is None else days
    rows_x, rows_y, rows_p, kept, excluded = [], [], [], [], {}

    def skip(day, exc):
        if strict:
            raise exc
        excluded[day] = str(exc)

    for d in day_list:
        d = int(d)
        issue = ds.day_start(d + sched.issue_day_offset) + np.timedelta64(sched.issue_hour, "h")
        w = ds.issue(issue)
        if w is None:
            skip(d, MissingWeatherIssue(f"no weather issued at {issue}"))
            continue
        valid = ds.day_start(d) + steps * np.timedelta64(STEP_MINUTES, "m")
        offsets = (valid - issue).astype(np.int64) // STEP_MINUTES
        try:
            irr, temp = w.lookup(offsets)
        except StepOutOfRange as exc:
            skip(d, MissingWeatherIssue(f"issue {issue} does not reach the horizon: {exc}"))
            continue
        y = pv[d, steps]
        if np.any(np.isnan(y)) and not allow_missing_targets:
            skip(d, MissingObservation(f"day {d} lacks PV observations on the horizon"))
            continue
        if sched.uses_past_pv:
            start = sched.issue_step - PAST_PV_STEPS
            past = pv[d, start : sched.issue_step]
            if np.any(np.isnan(past)):
                skip(d, MissingObservation(f"day {d} lacks the PV history before {issue}"))
                continue
            rows_p.append(past)
        rows_x.append(np.column_stack([irr, temp]).reshape(-1))
        rows_y.append(y)
        kept.append(d)

    if excluded:
        log.warning("%s: excluded %d day(s): %s", sched.gate.value, len(excluded), sorted(excluded))
    n_in = 2 * len(steps)
    return SampleSet(
        gate=sched,
        days=np.asarray(kept, dtype=np.int64),
        inputs=np.asarray(rows_x, dtype=float).reshape(len(kept), n_in),
        targets=np.asarray(rows_y, dtype=float).reshape(len(kept), len(steps)),
        past_pv=np.asarray(rows_p, dtype=float).reshape(len(kept), PAST_PV_STEPS) if sched.uses_past_pv else None,
        capacity=ds.capacity,
        excluded=excluded,
    )


def fit_scaler(train: SampleSet) -> Scaler:
    if train.n_samples == 0:
        raise EmptySampleSet("cannot fit a scaler on an empty sample set")
    X = np.asarray(train.inputs, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    degenerate = std < DEGENERATE_STD
    if degenerate.any():
        log.info("%d constant feature(s) mapped to zero", int(degenerate.sum()))
    return Scaler(mean, std, degenerate)


def apply_scaler(scaler: Scaler, samples: SampleSet) -> SampleSet:
    """Standardize weather inputs with training statistics; divide PV blocks by capacity."""
    if samples.scaled:
        raise ValueError("sample set is already scaled")
    cap = samples.capacity
    return replace(
        samples,
        inputs=scaler.transform(samples.inputs),
        targets=samples.targets / cap,
        past_pv=None if samples.past_pv is None else samples.past_pv / cap,
        scaler=scaler,
    )
