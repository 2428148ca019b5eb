"""Forecaster checkpoints: one ``.npz`` file with a JSON header and raw arrays.

The header records the format version, model kind, gate, capacity, quantile
levels, seed, network spec (for neural models) and scaler. Arrays are stored
in their native dtype, so a reloaded forecaster reproduces the original
forecasts bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import QuantileLevels, gate_schedule
from .errors import CheckpointGateMismatch
from .forecasters import BASELINE, Forecaster
from .gbr import GbrConfig, GbrModel, QuantileGbr, TreeLearner
from .neural import ModelSpec, Network
from .pipeline.samples import Scaler

FORMAT_VERSION = 1
_TREE_FIELDS = ("feature", "threshold", "left", "right", "value", "roots", "loss_trace")


def _kind(fc: Forecaster) -> str:
    if fc.name == BASELINE:
        return "climatology"
    if fc.network is not None:
        return "neural"
    if fc.gbr is not None:
        return "gbr"
    raise ValueError(f"{fc.name} forecaster has nothing to save")


def save_forecaster(fc: Forecaster, path) -> Path:
    kind = _kind(fc)
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "model": fc.name,
        "gate": fc.gate.gate.value,
        "capacity": fc.capacity,
        "levels": list(fc.levels.levels),
        "seed": fc.seed,
        "train_seconds": fc.train_seconds,
        "scaler": fc.scaler.to_dict() if fc.scaler is not None else None,
    }
    arrays = {}
    if kind == "climatology":
        arrays["climatology"] = fc.climatology
    elif kind == "neural":
        meta["spec"] = fc.network.spec.to_dict()
        meta["param_names"] = list(fc.network.params)
        for name, value in fc.network.params.items():
            arrays[f"param/{name}"] = value
    else:
        model = fc.gbr
        meta["gbr_config"] = model.config.to_dict()
        meta["n_steps"] = model.n_steps
        learners = [lrn for qg in model.per_quantile for lrn in qg.learners]
        arrays["gbr/init"] = np.array([lrn.init for lrn in learners])
        for fld in _TREE_FIELDS:
            parts = [getattr(lrn, fld) for lrn in learners]
            arrays[f"gbr/{fld}"] = np.concatenate(parts)
            arrays[f"gbr/{fld}_len"] = np.array([len(p) for p in parts], dtype=np.int64)
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    return path


def _split(flat: np.ndarray, lengths: np.ndarray) -> list[np.ndarray]:
    return np.split(flat, np.cumsum(lengths)[:-1])


def load_forecaster(path, gate=None) -> Forecaster:
    """Reload a checkpoint; ``gate`` (optional) must match the gate it was trained for."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        arrays = {k: z[k] for k in z.files if k != "meta"}
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {meta.get('format_version')}")
    sched = gate_schedule(meta["gate"])
    if gate is not None and gate_schedule(gate).gate is not sched.gate:
        raise CheckpointGateMismatch(f"checkpoint was trained for {sched.gate.value}, not {gate_schedule(gate).gate.value}")
    levels = QuantileLevels(tuple(meta["levels"]))
    scaler = Scaler.from_dict(meta["scaler"]) if meta["scaler"] else None
    fc = Forecaster(meta["model"], sched, levels, meta["capacity"], scaler=scaler, seed=meta["seed"],
                    train_seconds=meta["train_seconds"])
    kind = meta["kind"]
    if kind == "climatology":
        fc.climatology = arrays["climatology"]
    elif kind == "neural":
        spec = ModelSpec.from_dict(meta["spec"])
        params = {name: arrays[f"param/{name}"] for name in meta["param_names"]}
        dtype = next(iter(params.values())).dtype
        fc.network = Network(spec, seed=meta["seed"], dtype=dtype, params=params)
    elif kind == "gbr":
        cfg = GbrConfig(**meta["gbr_config"])
        cols = {fld: _split(arrays[f"gbr/{fld}"], arrays[f"gbr/{fld}_len"]) for fld in _TREE_FIELDS}
        init = arrays["gbr/init"]
        n_steps = meta["n_steps"]
        per_q = []
        for qi, q in enumerate(levels.levels):
            learners = []
            for t in range(n_steps):
                i = qi * n_steps + t
                learners.append(TreeLearner(float(init[i]), **{fld: cols[fld][i] for fld in _TREE_FIELDS}))
            per_q.append(QuantileGbr(q, cfg, learners))
        fc.gbr = GbrModel(levels, cfg, per_q)
    else:
        raise ValueError(f"unknown checkpoint kind {kind!r}")
    return fc
