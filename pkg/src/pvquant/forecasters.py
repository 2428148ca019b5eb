"""Fitted forecasters: a model plus the scaler it was trained with.

Every forecaster takes a *raw* :class:`SampleSet` and returns (N, T, Q)
quantile forecasts in kW, clipped to [0, capacity] with sorted rows.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import PAST_PV_STEPS, GateSchedule, QuantileLevels
from .errors import UntrainedModel
from .gbr import GbrConfig, GbrModel, fit_gbr, gbr_predict_array
from .neural import Architecture, Network, TrainConfig, build_spec, default_train_config, train
from .pipeline.samples import SampleSet, Scaler, apply_scaler, fit_scaler

NEURAL = ("MLP", "LSTM", "ED1", "ED2")
MODEL_NAMES = NEURAL + ("GBR",)
BASELINE = "Climatology"


def parse_model(name: str) -> str:
    key = name.strip().upper().replace("-", "").replace("_", "")
    if key in ("CLIM", "CLIMATOLOGY"):
        return BASELINE
    if key not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    return key


@dataclass
class Forecaster:
    name: str
    gate: GateSchedule
    levels: QuantileLevels
    capacity: float
    scaler: Optional[Scaler] = None
    network: Optional[Network] = None
    gbr: Optional[GbrModel] = None
    climatology: Optional[np.ndarray] = None  # (T, Q) in kW
    seed: int = 0
    train_seconds: float = 0.0
    history: list = field(default_factory=list)

    def _scaled(self, samples: SampleSet) -> SampleSet:
        return samples if samples.scaled else apply_scaler(self.scaler, samples)

    def predict(self, samples: SampleSet) -> np.ndarray:
        n = samples.n_samples
        if self.name == BASELINE:
            if self.climatology is None:
                raise UntrainedModel("climatology not fitted")
            return np.broadcast_to(self.climatology, (n,) + self.climatology.shape).copy()
        ss = self._scaled(samples)
        if self.network is not None:
            past = ss.past_pv if self.network.spec.past_input_width else None
            return self.network.quantiles(ss.inputs, past, self.capacity)
        if self.gbr is not None:
            return gbr_predict_array(self.gbr, ss, self.capacity)
        raise UntrainedModel(f"{self.name} forecaster has no fitted model")


def _past_width(name: str, gate: GateSchedule) -> int:
    if name in ("ED1", "ED2"):
        return PAST_PV_STEPS
    if name == "MLP" and gate.uses_past_pv:
        return PAST_PV_STEPS
    return 0


def fit_forecaster(
    name: str,
    train_samples: SampleSet,
    levels: QuantileLevels,
    seed: int = 0,
    train_cfg: Optional[TrainConfig] = None,
    gbr_cfg: Optional[GbrConfig] = None,
    on_epoch: Optional[Callable[[int, Forecaster], None]] = None,
) -> Forecaster:
    """Fit ``name`` on a raw training sample set (scaler fitted here, on these rows only).

    For neural models ``on_epoch(n_done, forecaster)`` lets the caller score
    intermediate states, e.g. to pick the epoch count.
    """
    name = parse_model(name)
    gate = train_samples.gate
    cap = train_samples.capacity
    t0 = time.perf_counter()
    if name == BASELINE:
        clim = np.quantile(train_samples.targets, levels.as_array(), axis=0).T
        fc = Forecaster(name, gate, levels, cap, climatology=np.sort(clim, axis=1), seed=seed)
        fc.train_seconds = time.perf_counter() - t0
        return fc
    scaler = fit_scaler(train_samples)
    ss = apply_scaler(scaler, train_samples)
    if name == "GBR":
        model = fit_gbr(ss, levels, gbr_cfg or GbrConfig())
        fc = Forecaster(name, gate, levels, cap, scaler=scaler, gbr=model, seed=seed)
    else:
        cfg = train_cfg or default_train_config(name)
        cfg = TrainConfig(**{**cfg.__dict__, "seed": seed})
        spec = build_spec(Architecture(name), len(gate.steps), len(levels), _past_width(name, gate))
        net = Network(spec, seed=seed, dtype=np.dtype(cfg.dtype))
        fc = Forecaster(name, gate, levels, cap, scaler=scaler, network=net, seed=seed)
        hook = None if on_epoch is None else (lambda e, _net: on_epoch(e, fc))
        # without PV history the encoder sees zeros, i.e. the night before 00:00
        fc.history = train(net, ss, cfg, levels, on_epoch=hook).history
    fc.train_seconds = time.perf_counter() - t0
    return fc
