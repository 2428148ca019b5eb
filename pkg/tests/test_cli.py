import json

import pytest

from pvquant.cli import main

SYN = ["--synthetic", "days=40", "seed=1"]


def _rows(path):
    lines = path.read_text().splitlines()
    return lines[0], lines[1], [ln.split(",") for ln in lines[2:]]


def test_generate_then_evaluate_from_csv(tmp_path, capsys):
    assert main(["generate", "--synthetic", "days=40", "--seed", "1", "--out", str(tmp_path / "data")]) == 0
    pv, w = tmp_path / "data" / "pv.csv", tmp_path / "data" / "weather.csv"
    assert pv.exists() and w.exists()
    out = tmp_path / "eval"
    code = main(["evaluate", "--pv", str(pv), "--weather", str(w), "--models", "MLP", "--gates", "Intra18",
                 "--epochs", "1", "--out", str(out)])
    assert code == 0
    table = (out / "scores.csv").read_text().splitlines()
    assert table[1] == "score,gate,MLP,Climatology"
    assert len(table) == 2 + 7
    doc = json.loads((out / "report.json").read_text())
    assert len({f["fold"] for f in doc["folds"]}) == 10
    assert "wrote" in capsys.readouterr().out


def test_train_and_forecast(tmp_path):
    ck = tmp_path / "mlp.npz"
    assert main(["train", *SYN, "--model", "mlp", "--gate", "intra06", "--epochs", "1", "--out", str(ck)]) == 0
    csv = tmp_path / "fc.csv"
    assert main(["forecast", *SYN, "--checkpoint", str(ck), "--gate", "Intra06", "--date", "2020-04-20", "--out", str(csv)]) == 0
    header, cols, rows = _rows(csv)
    assert header.startswith("# model=MLP gate=Intra06 date=2020-04-20")
    assert cols == "k,observation,q0.1,q0.2,q0.3,q0.4,q0.5,q0.6,q0.7,q0.8,q0.9"
    assert len(rows) == 57 and all(len(r) == 11 for r in rows)
    assert rows[0][0] == "24" and rows[-1][0] == "80"
    for r in rows:
        q = [float(v) for v in r[2:]]
        assert q == sorted(q) and 0 <= q[0] and q[-1] <= 466.4


def test_day_ahead_forecast_has_70_rows(tmp_path, capsys):
    ck = tmp_path / "gbr.npz"
    assert main(["train", *SYN, "--model", "GBR", "--gate", "DayAhead12", "--gbr-estimators", "5", "--out", str(ck)]) == 0
    capsys.readouterr()
    assert main(["forecast", *SYN, "--checkpoint", str(ck), "--gate", "DayAhead12", "--date", "2020-04-10"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 + 70


def test_forecast_gate_mismatch_exits_1(tmp_path, capsys):
    ck = tmp_path / "clim.npz"
    assert main(["train", *SYN, "--model", "Climatology", "--gate", "Intra12", "--out", str(ck)]) == 0
    assert main(["forecast", *SYN, "--checkpoint", str(ck), "--gate", "Intra06", "--date", "2020-04-10"]) == 1
    assert "CheckpointGateMismatch" in capsys.readouterr().err
    assert main(["forecast", *SYN, "--checkpoint", str(ck), "--gate", "Intra12", "--date", "2021-01-01"]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["evaluate", *SYN, "--models", ""],
        ["evaluate", *SYN, "--models", "SVM"],
        ["evaluate", *SYN, "--gates", "Intra03"],
        ["evaluate", "--models", "MLP"],  # no data
        ["evaluate", *SYN, "--jobs", "0"],
        ["evaluate", "--synthetic", "days"],
        ["train", *SYN, "--model", "MLP", "--gate", "Intra06", "--fold", "11", "--out", "x.npz"],
        ["sensitivity", *SYN, "--grid", "a,b"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_missing_files_exit_1(tmp_path):
    assert main(["evaluate", "--pv", str(tmp_path / "no.csv"), "--weather", str(tmp_path / "no.csv")]) == 1
    assert main(["forecast", *SYN, "--checkpoint", str(tmp_path / "no.npz"), "--gate", "Intra06", "--date", "2020-04-10"]) == 1


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"synthetic": {"days": 40, "seed": 1}, "models": ["ED2"], "gates": ["Intra18"],
                               "epochs": {"Intra18": {"ED2": 2}}, "out": str(tmp_path / "sens")}))
    assert main(["sensitivity", "--config", str(cfg), "--grid", "1,2"]) == 0
    doc = json.loads((tmp_path / "sens" / "sensitivity.json").read_text())
    assert doc["epochs"]["Intra18"]["ED2"] in (1, 2)
    assert set(doc["results"]["Intra18"]["ED2"]["crps"]) == {"1", "2"}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"modelz": ["MLP"]}))
    assert main(["evaluate", "--config", str(bad)]) == 2


def test_synthetic_smoke_run_has_ten_finite_folds(tmp_path):
    out = tmp_path / "smoke"
    argv = ["evaluate", "--synthetic", "days=157", "seed=0", "--models", "MLP,ED1", "--gates", "Intra06",
            "--epochs", "5", "--out", str(out)]
    assert main(argv) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["meta"]["n_fold_pairs"] == 11
    for model in ("MLP", "ED1", "Climatology"):
        assert doc["summary"]["Intra06"][model]["n_folds"] == 10
    lines = (out / "scores.csv").read_text().splitlines()[2:]
    cells = [c for ln in lines for c in ln.split(",")[2:]]
    assert len(cells) == 7 * 3
    assert all(c != "nan (nan)" and "inf" not in c for c in cells)
