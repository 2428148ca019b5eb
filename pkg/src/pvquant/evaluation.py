"""K-fold evaluation harness and the score report.

Scores are percentages of installed capacity. Each (gate, fold, model) task
is seeded from ``(seed, gate, fold, model)`` so results do not depend on the
model/gate selection or on the number of worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import DEFAULT_LEVELS, Gate, QuantileLevels, gate_schedule
from .forecasters import BASELINE, MODEL_NAMES, fit_forecaster, parse_model
from .gbr import GbrConfig
from .metrics import crps_rows, empirical_coverage, interval_score, nmae, nrmse
from .neural import default_train_config
from .pipeline.data import Dataset
from .pipeline.folds import FoldPlan, make_folds
from .pipeline.samples import build_samples

log = logging.getLogger(__name__)

WIDTHS = (0.8, 0.6, 0.4, 0.2)
# candidate epoch counts scored on the tuning pair; capped by the configured epochs
EPOCH_GRID = (10, 25, 50, 100, 200, 300, 500)
# a longer run must beat every shorter candidate by this relative margin to be selected
EPOCH_TOLERANCE = 0.01
SCORE_ROWS = ("NMAE", "NRMSE", "CRPS")


def width_key(width: float) -> str:
    return str(int(round(100 * width)))


@dataclass(frozen=True)
class EvalConfig:
    models: tuple[str, ...] = ("MLP", "LSTM", "ED1", "ED2")
    gates: tuple[Gate, ...] = (Gate.INTRA_06, Gate.INTRA_12)
    seed: int = 0
    n_pairs: int = 11
    test_days: int = 15
    tuning_pair_index: int = 0
    baseline: bool = True
    train_overrides: dict = field(default_factory=dict)
    gbr: GbrConfig = field(default_factory=GbrConfig)
    levels: QuantileLevels = DEFAULT_LEVELS
    widths: tuple[float, ...] = WIDTHS
    epochs: dict = field(default_factory=dict)  # gate -> model -> epochs, e.g. from epoch_sensitivity

    def __post_init__(self):
        if not self.models:
            raise ValueError("select at least one model")
        if not self.gates:
            raise ValueError("select at least one gate")
        object.__setattr__(self, "models", tuple(parse_model(m) for m in self.models))
        object.__setattr__(self, "gates", tuple(Gate.parse(g) if isinstance(g, str) else g for g in self.gates))

    def train_config(self, model: str, gate: Optional[Gate] = None):
        """Defaults, then global overrides, then per-model overrides, then the per-gate epoch table."""
        overrides = {k: v for k, v in self.train_overrides.items() if k not in MODEL_NAMES}
        overrides.update(self.train_overrides.get(model, {}))
        if gate is not None and model in self.epochs.get(gate.value, {}):
            overrides["epochs"] = int(self.epochs[gate.value][model])
        return default_train_config(model, **overrides)

    def to_dict(self) -> dict:
        return {
            "models": list(self.models),
            "gates": [g.value for g in self.gates],
            "seed": self.seed,
            "n_pairs": self.n_pairs,
            "test_days": self.test_days,
            "tuning_pair_index": self.tuning_pair_index,
            "baseline": self.baseline,
            "train": {m: self.train_config(m).to_dict() for m in self.models if _is_neural(m)},
            "gbr": self.gbr.to_dict(),
            "levels": list(self.levels.levels),
            "widths": list(self.widths),
            "epochs": {g: dict(sorted(v.items())) for g, v in sorted(self.epochs.items())},
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def task_seed(seed: int, gate: Gate, fold: int, model: str) -> int:
    gi = list(Gate).index(gate)
    mi = (MODEL_NAMES + (BASELINE,)).index(model)
    return int(np.random.SeedSequence([seed, gi, fold, mi]).generate_state(1)[0])


@dataclass
class FoldScore:
    gate: str
    fold: int
    model: str
    nmae: float
    nrmse: float
    crps: float
    interval_scores: dict
    coverage: dict
    crps_curve: list
    n_pairs: int
    train_seconds: float = 0.0


def score_forecasts(pred: np.ndarray, obs: np.ndarray, levels: QuantileLevels, capacity: float,
                    widths: Sequence[float] = WIDTHS) -> dict:
    """All fold-level scores for (M, T, Q) forecasts against (M, T) observations."""
    if 0.5 in levels:
        point = pred[:, :, levels.index_of(0.5)]
    else:
        point = pred.mean(axis=2)
    curve = 100.0 * crps_rows(pred, obs).mean(axis=0) / capacity
    return {
        "nmae": nmae(point, obs, capacity),
        "nrmse": nrmse(point, obs, capacity),
        "crps": float(curve.mean()),
        "interval_scores": {
            width_key(w): 100.0 * interval_score(round(1.0 - w, 10), pred, obs, levels) / capacity for w in widths
        },
        "coverage": {width_key(w): empirical_coverage(pred, obs, round(1.0 - w, 10), levels) for w in widths},
        "crps_curve": curve.tolist(),
        "n_pairs": int(obs.size),
    }


def _is_neural(model: str) -> bool:
    return model not in ("GBR", BASELINE)


def _tune_task(args) -> dict:
    """Score each candidate epoch count on the tuning pair from a single training run."""
    model, train_ss, test_ss, seed, cfg, grid = args
    train_cfg = cfg.train_config(model)
    grid = sorted({int(e) for e in grid if 0 < e <= train_cfg.epochs})
    if not grid:
        raise ValueError(f"no candidate epoch count in 1..{train_cfg.epochs}")
    train_cfg = replace(train_cfg, epochs=grid[-1])
    scores = {}

    def on_epoch(n_done, fc):
        if n_done in grid:
            pred = fc.predict(test_ss)
            scores[n_done] = float(100.0 * crps_rows(pred, test_ss.targets).mean() / test_ss.capacity)

    fit_forecaster(model, train_ss, cfg.levels, seed=seed, train_cfg=train_cfg, on_epoch=on_epoch)
    return {"epochs": select_epochs(scores), "crps": {str(e): scores[e] for e in grid}}


def select_epochs(scores: dict, tolerance: float = EPOCH_TOLERANCE) -> int:
    """Fewest epochs whose score is within ``tolerance`` (relative) of the best.

    A single tuning pair is a noisy judge, so near-ties go to the shorter run.
    """
    if not scores:
        raise ValueError("no epoch scores to select from")
    best = min(scores.values())
    return min(int(e) for e, v in scores.items() if v <= best * (1.0 + tolerance))


def _run_task(args) -> FoldScore:
    model, train_ss, test_ss, seed, cfg, fold, train_cfg = args
    fc = fit_forecaster(model, train_ss, cfg.levels, seed=seed, train_cfg=train_cfg, gbr_cfg=cfg.gbr)
    pred = fc.predict(test_ss)
    scores = score_forecasts(pred, test_ss.targets, cfg.levels, test_ss.capacity, cfg.widths)
    log.info("%s fold %d %s: CRPS %.2f%% (%.1fs)", test_ss.gate.gate.value, fold, model, scores["crps"], fc.train_seconds)
    return FoldScore(train_ss.gate.gate.value, fold, model, train_seconds=fc.train_seconds, **scores)


@dataclass
class EvalReport:
    meta: dict
    steps: dict  # gate -> list of horizon steps
    folds: list  # FoldScore, in (gate, fold, model) order

    @property
    def models(self) -> list[str]:
        seen = []
        for f in self.folds:
            if f.model not in seen:
                seen.append(f.model)
        return seen

    @property
    def gates(self) -> list[str]:
        return list(self.steps)

    def fold_count(self, gate: str, model: str) -> int:
        return sum(1 for f in self.folds if f.gate == gate and f.model == model)

    def _select(self, gate, model):
        return [f for f in self.folds if f.gate == gate and f.model == model]

    def summary(self) -> dict:
        """gate -> model -> score -> (mean, std) over folds (population std)."""
        out = {}
        for gate in self.gates:
            out[gate] = {}
            for model in self.models:
                rows = self._select(gate, model)
                if not rows:
                    continue
                entry = {}
                for key in ("nmae", "nrmse", "crps"):
                    v = np.array([getattr(r, key) for r in rows])
                    entry[key] = (float(v.mean()), float(v.std()))
                for group in ("interval_scores", "coverage"):
                    entry[group] = {}
                    for w in rows[0].interval_scores:
                        v = np.array([getattr(r, group)[w] for r in rows])
                        entry[group][w] = (float(v.mean()), float(v.std()))
                entry["n_folds"] = len(rows)
                entry["n_pairs"] = int(sum(r.n_pairs for r in rows))
                out[gate][model] = entry
        return out

    def crps_curves(self) -> dict:
        """gate -> model -> mean per-step CRPS over folds."""
        out = {}
        for gate in self.gates:
            out[gate] = {}
            for model in self.models:
                rows = self._select(gate, model)
                if rows:
                    out[gate][model] = np.mean([r.crps_curve for r in rows], axis=0).tolist()
        return out

    def to_json(self) -> str:
        folds = []
        for f in self.folds:
            d = asdict(f)
            d.pop("train_seconds")
            folds.append(d)
        doc = {
            "meta": self.meta,
            "steps": self.steps,
            "summary": self.summary(),
            "crps_curves": self.crps_curves(),
            "folds": folds,
        }
        return json.dumps(doc, indent=1, sort_keys=False)

    def _header(self) -> str:
        m = self.meta
        return (
            f"# seed={m['seed']} config={m['config_hash']} dataset={m['dataset_fingerprint']} "
            f"versions={json.dumps(m['versions'], sort_keys=True)}\n"
        )

    def table_csv(self, decimals: int = 1) -> str:
        """Rows = score x gate, columns = models, cells "mean (std)"."""
        summ = self.summary()
        models = self.models
        buf = io.StringIO()
        buf.write(self._header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["score", "gate"] + models)

        def cell(pair):
            return f"{pair[0]:.{decimals}f} ({pair[1]:.{decimals}f})"

        for score in SCORE_ROWS:
            for gate in self.gates:
                w.writerow([score, gate] + [cell(summ[gate][m][score.lower()]) if m in summ[gate] else "" for m in models])
        widths = list(next(iter(next(iter(summ.values())).values()))["interval_scores"])
        for wk in widths:
            for gate in self.gates:
                w.writerow([f"IS{wk}", gate] + [cell(summ[gate][m]["interval_scores"][wk]) if m in summ[gate] else "" for m in models])
        return buf.getvalue()

    def curves_csv(self) -> str:
        curves = self.crps_curves()
        buf = io.StringIO()
        buf.write(self._header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gate", "k"] + self.models)
        for gate in self.gates:
            for i, k in enumerate(self.steps[gate]):
                w.writerow([gate, k] + [f"{curves[gate][m][i]:.6f}" if m in curves[gate] else "" for m in self.models])
        return buf.getvalue()

    def timings_csv(self) -> str:
        """Training seconds per model and gate, "mean (std)" over folds."""
        buf = io.StringIO()
        buf.write(self._header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gate"] + self.models)
        for gate in self.gates:
            row = [gate]
            for m in self.models:
                t = np.array([f.train_seconds for f in self._select(gate, m)])
                row.append(f"{t.mean():.1f} ({t.std():.1f})" if t.size else "")
            w.writerow(row)
        return buf.getvalue()

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "report": out / "report.json",
            "table": out / "scores.csv",
            "curves": out / "crps_curves.csv",
            "timings": out / "timings.csv",
        }
        files["report"].write_text(self.to_json() + "\n")
        files["table"].write_text(self.table_csv())
        files["curves"].write_text(self.curves_csv())
        files["timings"].write_text(self.timings_csv())
        return files


def module_versions() -> dict:
    import numba
    import scipy

    return {"pvquant": __version__, "numpy": np.__version__, "numba": numba.__version__, "scipy": scipy.__version__}


def _map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _splits(ds: Dataset, gates, plan: FoldPlan) -> dict:
    out = {}
    for gate in gates:
        samples = build_samples(ds, gate)
        out[gate] = {i: (samples.subset(tr), samples.subset(te)) for i, (tr, te) in enumerate(plan.pairs)}
    return out


def _models(cfg: EvalConfig) -> list[str]:
    return list(cfg.models) + ([BASELINE] if cfg.baseline and BASELINE not in cfg.models else [])


def epoch_sensitivity(ds: Dataset, cfg: EvalConfig, grid: Sequence[int] = EPOCH_GRID, jobs: int = 1,
                      plan: Optional[FoldPlan] = None) -> dict:
    """Tuning-pair CRPS of every neural model after each epoch count in ``grid``.

    Returns gate -> model -> {"epochs": best count, "crps": {count: score}}.
    Only the tuning pair is touched, so feeding the selection back through
    ``EvalConfig.epochs`` leaves the test pairs unseen.
    """
    plan = plan or make_folds(ds.span_days, cfg.n_pairs, cfg.test_days, cfg.tuning_pair_index)
    ti = plan.tuning_pair_index
    splits = _splits(ds, cfg.gates, plan)
    keys, tasks = [], []
    for gate in cfg.gates:
        for model in cfg.models:
            if _is_neural(model):
                keys.append((gate.value, model))
                tr, te = splits[gate][ti]
                tasks.append((model, tr, te, task_seed(cfg.seed, gate, ti, model), cfg, tuple(grid)))
    out = {g.value: {} for g in cfg.gates}
    for (g, m), res in zip(keys, _map(_tune_task, tasks, jobs)):
        out[g][m] = res
        log.info("%s %s: %d epochs selected on the tuning pair", g, m, res["epochs"])
    return out


def with_selected_epochs(cfg: EvalConfig, sensitivity: dict) -> EvalConfig:
    table = {g: {m: r["epochs"] for m, r in models.items()} for g, models in sensitivity.items()}
    return replace(cfg, epochs=table)


def run_evaluation(ds: Dataset, cfg: EvalConfig, jobs: int = 1, plan: Optional[FoldPlan] = None) -> EvalReport:
    """Train and score every selected model on every test pair of the fold plan.

    Results are merged in (gate, fold, model) order whatever ``jobs`` is.
    """
    plan = plan or make_folds(ds.span_days, cfg.n_pairs, cfg.test_days, cfg.tuning_pair_index)
    splits = _splits(ds, cfg.gates, plan)
    steps = {g.value: gate_schedule(g).steps.tolist() for g in cfg.gates}
    tasks = []
    for gate in cfg.gates:
        for fold in plan.test_pairs:
            tr, te = splits[gate][fold]
            for model in _models(cfg):
                tcfg = cfg.train_config(model, gate) if _is_neural(model) else None
                tasks.append((model, tr, te, task_seed(cfg.seed, gate, fold, model), cfg, fold, tcfg))
    results = _map(_run_task, tasks, jobs)

    meta = {
        "seed": cfg.seed,
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "dataset_fingerprint": ds.fingerprint(),
        "capacity": ds.capacity,
        "span_days": ds.span_days,
        "n_fold_pairs": len(plan.pairs),
        "tuning_pair_index": plan.tuning_pair_index,
        "test_pairs": plan.test_pairs,
        "versions": module_versions(),
    }
    return EvalReport(meta, steps, results)
