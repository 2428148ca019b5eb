import json

import numpy as np
import pytest

from pvquant.checkpoint import FORMAT_VERSION, load_forecaster, save_forecaster
from pvquant.core import DEFAULT_LEVELS
from pvquant.errors import CheckpointGateMismatch
from pvquant.forecasters import fit_forecaster
from pvquant.gbr import GbrConfig
from pvquant.neural import TrainConfig
from pvquant.pipeline import build_samples, generate_synthetic


@pytest.fixture(scope="module")
def samples():
    ss = build_samples(generate_synthetic(24, seed=8), "Intra12")
    return ss.subset(range(18)), ss.subset(range(18, 24))


@pytest.mark.parametrize("model", ["MLP", "LSTM", "ED1", "ED2", "GBR", "Climatology"])
def test_round_trip_reproduces_forecasts(samples, model, tmp_path):
    train, test = samples
    fc = fit_forecaster(model, train, DEFAULT_LEVELS, seed=4, train_cfg=TrainConfig(epochs=2, batch_size=8),
                        gbr_cfg=GbrConfig(n_estimators=8, max_depth=2))
    path = save_forecaster(fc, tmp_path / f"{model}.npz")
    back = load_forecaster(path)
    assert (back.name, back.seed, back.capacity) == (fc.name, fc.seed, fc.capacity)
    assert back.gate == fc.gate and back.levels == fc.levels
    np.testing.assert_array_equal(back.predict(test), fc.predict(test))


def test_header_contents(samples, tmp_path):
    fc = fit_forecaster("ED2", samples[0], DEFAULT_LEVELS, seed=1, train_cfg=TrainConfig(epochs=1))
    path = save_forecaster(fc, tmp_path / "ed2.npz")
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        assert "param/dense0.W" in z.files
    assert meta["format_version"] == FORMAT_VERSION
    assert (meta["kind"], meta["model"], meta["gate"]) == ("neural", "ED2", "Intra12")
    assert meta["spec"]["n_output"] == 33 * 9
    assert set(meta["scaler"]) == {"mean", "std", "degenerate"}


def test_gate_mismatch_is_rejected(samples, tmp_path):
    fc = fit_forecaster("Climatology", samples[0], DEFAULT_LEVELS)
    path = save_forecaster(fc, tmp_path / "clim.npz")
    assert load_forecaster(path, "Intra12").name == "Climatology"
    with pytest.raises(CheckpointGateMismatch):
        load_forecaster(path, "Intra06")
