"""Command-line entry point.

Subcommands:

* ``evaluate``  k-fold evaluation, writes report.json, scores.csv, crps_curves.csv, timings.csv
* ``sensitivity``  epoch sensitivity on the tuning pair, writes a config fragment
* ``train``     fit one model for one gate and save a checkpoint
* ``forecast``  quantile forecast for one day from a checkpoint, as CSV
* ``generate``  write a synthetic dataset as pv.csv / weather.csv

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .checkpoint import load_forecaster, save_forecaster
from .core import Gate, QuantileLevels, gate_schedule
from .errors import PvQuantError
from .evaluation import EPOCH_GRID, EvalConfig, epoch_sensitivity, module_versions, run_evaluation, task_seed, with_selected_epochs
from .forecasters import BASELINE, fit_forecaster, parse_model
from .gbr import GbrConfig
from .pipeline import build_samples, generate_synthetic, load_dataset, make_folds, save_dataset
from .pipeline.data import Dataset

log = logging.getLogger("pvquant")

DEFAULT_CAPACITY = 466.4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a command needs; built from ``--config`` JSON, then command-line flags."""

    pv: Optional[str] = None
    weather: Optional[str] = None
    capacity: float = DEFAULT_CAPACITY
    synthetic: Optional[dict] = None
    models: tuple = ("MLP", "LSTM", "ED1", "ED2")
    gates: tuple = ("Intra06", "Intra12")
    seed: int = 0
    out: str = "out"
    jobs: int = 1
    train: dict = field(default_factory=dict)
    gbr: dict = field(default_factory=dict)
    epochs: dict = field(default_factory=dict)
    baseline: bool = True
    levels: tuple = QuantileLevels().levels

    def validate(self) -> None:
        if not self.models:
            raise UsageError("at least one model must be selected")
        if not self.gates:
            raise UsageError("at least one gate must be selected")
        try:
            self.models = tuple(parse_model(m) for m in self.models)
            self.gates = tuple(Gate.parse(g).value for g in self.gates)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if self.synthetic is None and not (self.pv and self.weather):
            raise UsageError("give --pv and --weather, or --synthetic")
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            models=self.models,
            gates=self.gates,
            seed=self.seed,
            baseline=self.baseline,
            train_overrides=self.train,
            gbr=GbrConfig(**self.gbr),
            levels=QuantileLevels(tuple(self.levels)),
            epochs=self.epochs,
        )

    def dataset(self) -> Dataset:
        if self.synthetic is not None:
            opts = dict(self.synthetic)
            days = int(opts.pop("days", 157))
            seed = int(opts.pop("seed", self.seed))
            cap = float(opts.pop("capacity", self.capacity))
            if opts:
                raise UsageError(f"unknown --synthetic keys: {sorted(opts)}")
            return generate_synthetic(days, seed=seed, capacity=cap)
        return load_dataset(self.pv, self.weather, self.capacity)


def _parse_kv(tokens) -> dict:
    out = {}
    for tok in tokens:
        for part in tok.split(","):
            if not part:
                continue
            if "=" not in part:
                raise UsageError(f"expected key=value, got {part!r}")
            k, v = part.split("=", 1)
            out[k.strip()] = float(v) if "." in v else int(v)
    return out


def _split_list(text: str) -> tuple:
    return tuple(t for t in (s.strip() for s in text.split(",")) if t)


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pv", help="PV CSV (timestamp, power_kw), 1- or 15-minute resolution")
    p.add_argument("--weather", help="weather CSV (issue_time, valid_time, irradiance_wm2, temperature_c)")
    p.add_argument("--capacity", type=float, help=f"installed capacity in kW (default {DEFAULT_CAPACITY})")
    p.add_argument("--synthetic", nargs="+", metavar="KEY=VALUE", help="synthetic data, e.g. days=157 seed=0")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("-v", "--verbose", action="store_true")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, help="override the epoch count of every neural model")
    p.add_argument("--lr", type=float, help="override the learning rate of every neural model")
    p.add_argument("--batch-size", type=int, help="override the batch size of every neural model")
    p.add_argument("--gbr-estimators", type=int, help="override the number of GBR stages")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvquant", description="Quantile PV forecasting: training and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="k-fold evaluation of models x gates")
    _data_args(ev)
    _model_args(ev)
    ev.add_argument("--models", help="comma-separated: MLP,LSTM,ED1,ED2,GBR")
    ev.add_argument("--gates", help="comma-separated: DayAhead12,Intra00,Intra06,Intra12,Intra18")
    ev.add_argument("--out", help="output directory")
    ev.add_argument("--jobs", type=int, help="worker processes")
    ev.add_argument("--no-baseline", action="store_true", help="skip the climatology baseline")

    se = sub.add_parser("sensitivity", help="score epoch counts on the tuning pair")
    _data_args(se)
    _model_args(se)
    se.add_argument("--models")
    se.add_argument("--gates")
    se.add_argument("--out", help="output directory for sensitivity.json")
    se.add_argument("--jobs", type=int)
    se.add_argument("--grid", default=",".join(map(str, EPOCH_GRID)), help="candidate epoch counts")

    tr = sub.add_parser("train", help="train one model for one gate and save a checkpoint")
    _data_args(tr)
    _model_args(tr)
    tr.add_argument("--model", required=True)
    tr.add_argument("--gate", required=True)
    tr.add_argument("--fold", type=int, help="train on this pair's training days (default: the tuning pair)")
    tr.add_argument("--out", required=True, help="checkpoint path (.npz)")

    fc = sub.add_parser("forecast", help="forecast one day from a checkpoint")
    _data_args(fc)
    fc.add_argument("--checkpoint", required=True)
    fc.add_argument("--gate", required=True)
    fc.add_argument("--date", required=True, help="target day, YYYY-MM-DD")
    fc.add_argument("--out", help="CSV path (default: stdout)")

    ge = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    ge.add_argument("--synthetic", nargs="+", metavar="KEY=VALUE", default=["days=157"])
    ge.add_argument("--seed", type=int)
    ge.add_argument("--capacity", type=float)
    ge.add_argument("--out", required=True, help="output directory")
    ge.add_argument("-v", "--verbose", action="store_true")
    return parser


def run_config(args) -> RunConfig:
    rc = RunConfig()
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(doc) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for k, v in doc.items():
            setattr(rc, k, tuple(v) if isinstance(v, list) else v)
    for name in ("pv", "weather", "capacity", "seed", "out", "jobs"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(rc, name, value)
    if getattr(args, "synthetic", None):
        rc.synthetic = _parse_kv(args.synthetic)
    if getattr(args, "models", None) is not None:
        rc.models = _split_list(args.models)
    if getattr(args, "gates", None) is not None:
        rc.gates = _split_list(args.gates)
    if getattr(args, "no_baseline", False):
        rc.baseline = False
    train = dict(rc.train)
    for flag, key in (("epochs", "epochs"), ("lr", "learning_rate"), ("batch_size", "batch_size")):
        value = getattr(args, flag, None)
        if value is not None:
            train[key] = value
    rc.train = train
    if getattr(args, "epochs", None) is not None:
        rc.epochs = {}  # an explicit epoch count beats any tuned table
    if getattr(args, "gbr_estimators", None) is not None:
        rc.gbr = {**rc.gbr, "n_estimators": args.gbr_estimators}
    return rc


def cmd_evaluate(rc: RunConfig) -> int:
    rc.validate()
    ds = rc.dataset()
    cfg = rc.eval_config()
    t0 = time.perf_counter()
    report = run_evaluation(ds, cfg, jobs=rc.jobs)
    files = report.write(rc.out)
    log.info("evaluation finished in %.1fs", time.perf_counter() - t0)
    print(report.table_csv(), end="")
    for f in files.values():
        print(f"wrote {f}")
    return 0


def cmd_sensitivity(rc: RunConfig, grid) -> int:
    rc.validate()
    ds = rc.dataset()
    res = epoch_sensitivity(ds, rc.eval_config(), grid=grid, jobs=rc.jobs)
    cfg = with_selected_epochs(rc.eval_config(), res)
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "seed": rc.seed,
        "dataset_fingerprint": ds.fingerprint(),
        "versions": module_versions(),
        "grid": list(grid),
        "results": res,
        "epochs": cfg.epochs,
    }
    path = out / "sensitivity.json"
    path.write_text(json.dumps(doc, indent=1) + "\n")
    print(json.dumps(cfg.epochs, indent=1))
    print(f"wrote {path}")
    return 0


def cmd_train(rc: RunConfig, model: str, gate: str, fold: Optional[int], out: str) -> int:
    try:
        model = parse_model(model)
        gate = Gate.parse(gate)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rc.models, rc.gates = (model,), (gate.value,)
    rc.validate()
    ds = rc.dataset()
    cfg = rc.eval_config()
    plan = make_folds(ds.span_days, cfg.n_pairs, cfg.test_days, cfg.tuning_pair_index)
    idx = plan.tuning_pair_index if fold is None else fold
    if not 0 <= idx < len(plan.pairs):
        raise UsageError(f"--fold must lie in [0, {len(plan.pairs)})")
    train_days = plan.pairs[idx][0]
    samples = build_samples(ds, gate).subset(train_days)
    neural = model not in ("GBR", BASELINE)
    fc = fit_forecaster(model, samples, cfg.levels, seed=task_seed(rc.seed, gate, idx, model),
                        train_cfg=cfg.train_config(model, gate) if neural else None, gbr_cfg=cfg.gbr)
    path = save_forecaster(fc, out)
    print(f"{model} {gate.value} pair {idx}: trained on {samples.n_samples} days in {fc.train_seconds:.2f}s")
    print(f"wrote {path}")
    return 0


def cmd_forecast(rc: RunConfig, checkpoint: str, gate: str, date: str, out: Optional[str]) -> int:
    if rc.synthetic is None and not (rc.pv and rc.weather):
        raise UsageError("give --pv and --weather, or --synthetic")
    try:
        gate = Gate.parse(gate)
        day = np.datetime64(date, "D")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    fc = load_forecaster(checkpoint, gate)
    ds = rc.dataset()
    d = int((day - ds.start_day).astype(np.int64))
    if not 0 <= d < ds.span_days:
        raise PvQuantError(f"{date} lies outside the dataset ({ds.start_day} + {ds.span_days} days)")
    samples = build_samples(ds, gate, days=[d], strict=True, allow_missing_targets=True)
    pred = fc.predict(samples)[0]
    obs = samples.targets[0]
    lines = [f"# model={fc.name} gate={gate.value} date={date} seed={fc.seed} dataset={ds.fingerprint()}"]
    lines.append(",".join(["k", "observation"] + [f"q{q:g}" for q in fc.levels]))
    for k, o, row in zip(gate_schedule(gate).steps, obs, pred):
        ob = "" if np.isnan(o) else f"{o:.6f}"
        lines.append(",".join([str(int(k)), ob] + [f"{v:.6f}" for v in row]))
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_generate(rc: RunConfig) -> int:
    ds = rc.dataset()
    pv, w = save_dataset(ds, rc.out)
    print(f"wrote {pv} and {w} ({ds.span_days} days, fingerprint {ds.fingerprint()})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = run_config(args)
        if args.command == "evaluate":
            return cmd_evaluate(rc)
        if args.command == "sensitivity":
            try:
                grid = tuple(int(x) for x in _split_list(args.grid))
            except ValueError as exc:
                raise UsageError(f"bad --grid: {exc}") from exc
            return cmd_sensitivity(rc, grid)
        if args.command == "train":
            return cmd_train(rc, args.model, args.gate, args.fold, args.out)
        if args.command == "forecast":
            return cmd_forecast(rc, args.checkpoint, args.gate, args.date, args.out)
        if args.command == "generate":
            if rc.synthetic is None:
                rc.synthetic = {"days": 157}
            return cmd_generate(rc)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pvquant: error: {exc}", file=sys.stderr)
        return 2
    except (PvQuantError, OSError, ValueError, KeyError, IndexError) as exc:
        print(f"pvquant: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
