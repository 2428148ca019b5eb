import json
import re

import numpy as np
import pytest

from pvquant.core import DEFAULT_LEVELS, Gate
from pvquant.evaluation import (
    EvalConfig,
    epoch_sensitivity,
    run_evaluation,
    score_forecasts,
    select_epochs,
    task_seed,
    with_selected_epochs,
)
from pvquant.forecasters import fit_forecaster
from pvquant.gbr import GbrConfig
from pvquant.metrics import crps_rows, empirical_coverage, interval_score, nmae, nrmse
from pvquant.pipeline import build_samples, generate_synthetic, make_folds

CELL = re.compile(r"^\d+\.\d \(\d+\.\d\)$")


@pytest.fixture(scope="module")
def ds():
    return generate_synthetic(40, seed=2)


@pytest.fixture(scope="module")
def small_cfg():
    return EvalConfig(
        models=("MLP", "ED1", "GBR"),
        gates=("Intra06", "Intra12"),
        seed=5,
        n_pairs=4,
        test_days=8,
        train_overrides={"epochs": 3, "ED1": {"batch_size": 16}},
        gbr=GbrConfig(n_estimators=10, max_depth=2),
    )


@pytest.fixture(scope="module")
def report(ds, small_cfg):
    return run_evaluation(ds, small_cfg)


def test_score_forecasts_against_metrics():
    rng = np.random.default_rng(0)
    pred = np.sort(rng.uniform(0, 400, size=(6, 5, 9)), axis=2)
    obs = rng.uniform(0, 400, size=(6, 5))
    s = score_forecasts(pred, obs, DEFAULT_LEVELS, 466.4)
    assert s["nmae"] == pytest.approx(nmae(pred[:, :, 4], obs, 466.4))
    assert s["nrmse"] == pytest.approx(nrmse(pred[:, :, 4], obs, 466.4))
    assert s["crps"] == pytest.approx(100 * crps_rows(pred, obs).mean() / 466.4)
    assert s["interval_scores"]["60"] == pytest.approx(100 * interval_score(0.4, pred, obs, DEFAULT_LEVELS) / 466.4)
    assert s["coverage"]["80"] == empirical_coverage(pred, obs, 0.2, DEFAULT_LEVELS)
    assert len(s["crps_curve"]) == 5 and s["n_pairs"] == 30


def test_task_seeds_are_stable_and_distinct():
    seeds = {task_seed(0, g, f, m) for g in Gate for f in range(11) for m in ("MLP", "ED1", "GBR", "Climatology")}
    assert len(seeds) == 5 * 11 * 4
    assert task_seed(3, Gate.INTRA_06, 2, "LSTM") == task_seed(3, Gate.INTRA_06, 2, "LSTM")


def test_train_config_precedence():
    cfg = EvalConfig(
        models=("MLP", "LSTM"),
        train_overrides={"epochs": 7, "learning_rate": 5e-3, "LSTM": {"learning_rate": 2e-3}},
        epochs={"Intra12": {"LSTM": 40}},
    )
    mlp, lstm = cfg.train_config("MLP"), cfg.train_config("LSTM")
    assert (mlp.epochs, mlp.learning_rate, mlp.batch_size) == (7, 5e-3, 8)
    assert (lstm.epochs, lstm.learning_rate, lstm.batch_size) == (7, 2e-3, 64)
    assert cfg.train_config("LSTM", Gate.INTRA_12).epochs == 40
    assert cfg.train_config("LSTM", Gate.INTRA_06).epochs == 7
    assert cfg.digest() != EvalConfig(models=("MLP", "LSTM")).digest()


def test_select_epochs_prefers_shorter_near_ties():
    assert select_epochs({10: 5.0, 25: 4.0, 50: 3.0}) == 50
    assert select_epochs({10: 5.0, 25: 3.02, 50: 3.0}) == 25  # within 1% of the best
    assert select_epochs({10: 5.0, 25: 3.02, 50: 3.0}, tolerance=0.0) == 50
    with pytest.raises(ValueError):
        select_epochs({})


def test_report_shape(report, small_cfg):
    assert report.gates == ["Intra06", "Intra12"]
    assert report.models == ["MLP", "ED1", "GBR", "Climatology"]
    for g in report.gates:
        for m in report.models:
            assert report.fold_count(g, m) == 3  # four pairs minus the tuning pair
    assert report.meta["n_fold_pairs"] == 4 and report.meta["test_pairs"] == [1, 2, 3]
    assert report.meta["config_hash"] == small_cfg.digest()
    assert len(report.steps["Intra06"]) == 57


def test_table_format(report):
    lines = report.table_csv().splitlines()
    assert lines[0].startswith("# seed=5 config=") and "dataset=" in lines[0] and "versions=" in lines[0]
    assert lines[1] == "score,gate,MLP,ED1,GBR,Climatology"
    body = [ln.split(",", 2) for ln in lines[2:]]
    assert [r[0] for r in body] == ["NMAE"] * 2 + ["NRMSE"] * 2 + ["CRPS"] * 2 + ["IS80"] * 2 + ["IS60"] * 2 + ["IS40"] * 2 + ["IS20"] * 2
    for row in lines[2:]:
        cells = re.findall(r"\d+\.\d \(\d+\.\d\)", row)
        assert len(cells) == 4
        assert all(CELL.match(c) for c in cells)


def test_summary_is_population_mean_and_std(report):
    rows = [f for f in report.folds if f.gate == "Intra12" and f.model == "GBR"]
    v = np.array([f.crps for f in rows])
    mean, std = report.summary()["Intra12"]["GBR"]["crps"]
    assert mean == pytest.approx(v.mean()) and std == pytest.approx(np.sqrt(((v - v.mean()) ** 2).mean()))
    curve = report.crps_curves()["Intra12"]["GBR"]
    assert np.mean(curve) == pytest.approx(mean)


def test_written_files(report, tmp_path):
    files = report.write(tmp_path)
    doc = json.loads(files["report"].read_text())
    assert set(doc) == {"meta", "steps", "summary", "crps_curves", "folds"}
    assert all("train_seconds" not in f for f in doc["folds"])
    curves = files["curves"].read_text().splitlines()
    assert curves[1] == "gate,k,MLP,ED1,GBR,Climatology"
    assert len(curves) == 2 + 57 + 33
    assert files["timings"].exists()


def test_evaluation_is_deterministic(ds, small_cfg, report):
    again = run_evaluation(ds, small_cfg)
    assert again.to_json() == report.to_json()
    assert again.table_csv() == report.table_csv()


def test_parallel_matches_serial(ds, small_cfg, report):
    par = run_evaluation(ds, small_cfg, jobs=2)
    assert par.to_json() == report.to_json()


def test_sensitivity_scores_equal_separate_runs(ds, small_cfg):
    cfg = EvalConfig(models=("ED2",), gates=("Intra12",), seed=1, n_pairs=4, test_days=8, train_overrides={"epochs": 4})
    sens = epoch_sensitivity(ds, cfg, grid=(2, 4, 9))
    res = sens["Intra12"]["ED2"]
    assert set(res["crps"]) == {"2", "4"}  # the grid is capped at the configured 4 epochs
    # stopping a 4-epoch run after 2 epochs is the same as training for 2 epochs
    plan = make_folds(ds.span_days, 4, 8)
    ss = build_samples(ds, "Intra12")
    train, test = ss.subset(plan.pairs[0][0]), ss.subset(plan.pairs[0][1])
    tcfg = cfg.train_config("ED2")
    fc = fit_forecaster("ED2", train, cfg.levels, seed=task_seed(1, Gate.INTRA_12, 0, "ED2"),
                        train_cfg=type(tcfg)(**{**tcfg.__dict__, "epochs": 2}))
    direct = 100 * crps_rows(fc.predict(test), test.targets).mean() / test.capacity
    assert res["crps"]["2"] == pytest.approx(direct, rel=1e-12)
    frozen = with_selected_epochs(cfg, sens)
    assert frozen.train_config("ED2", Gate.INTRA_12).epochs == res["epochs"]
