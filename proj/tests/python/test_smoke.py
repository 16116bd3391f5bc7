import math
import os

import numpy as np
import pytest

import twincher


def test_rng_reference_values():
    assert twincher.mix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF
    assert twincher.derive_key(1, 2, 3) == twincher.derive_key(1, 2, 3)
    assert twincher.derive_key(1, 2, 3) != twincher.derive_key(1, 2, 4)


def test_squash_pair():
    assert twincher.squash(1.0) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert twincher.unsquash(twincher.squash(3.7)) == pytest.approx(3.7, rel=1e-12)
    with pytest.raises(ValueError):
        twincher.unsquash(1.0)


def test_entangler_round_trip_and_json():
    e = twincher.HarmonicEntangler(7, w_amp=1.0)
    p = np.array([0.3, -0.8])
    y = e.evaluate(p)
    assert y.shape == (4,)
    assert np.max(np.abs(e.inverse(y) - p)) < 1e-9
    back = twincher.HarmonicEntangler.from_json(e.to_json())
    assert np.array_equal(back.evaluate(p), y)
    with pytest.raises(ValueError):
        e.evaluate(np.array([1.5, 0.0]))


def test_model_round_trip(tmp_path):
    m = twincher.TwincherModel(3, 4, 2)
    assert m.parameter_count == 1024
    rng = np.random.default_rng(0)
    m.theta = rng.uniform(-1, 1, m.parameter_count)
    y = rng.uniform(-1, 1, 4)
    assert np.max(np.abs(m.inverse(m.forward(y)) - y)) < 1e-9
    assert m.log_abs_det(y) >= -4.0
    path = str(tmp_path / "model.json")
    m.save(path)
    assert np.array_equal(twincher.TwincherModel.load(path).forward(y), m.forward(y))


def test_refine_python_callable():
    a = np.array([[2.0, 0.0], [0.0, 1.5], [0.5, 0.5]])
    target = a @ np.array([0.2, -0.1])
    trace = twincher.refine(lambda p: a @ p, target, np.array([0.4, 0.1]))
    assert trace["forward_evals"] == 15
    assert min(trace["residual_norms"]) < 1e-6


def test_complexity_deterministic():
    e = twincher.HarmonicEntangler(1, w_amp=0.5)
    c = twincher.estimate_complexity(e, 200)
    assert c == twincher.estimate_complexity(e, 200)
    assert c >= 0.0


def test_cli_trial(tmp_path):
    code, _, err = twincher.run_cli(
        ["trial", "--learner", "baseline", "--n-calls", "256", "--seed", "2", "--set", "n_test=20",
         "--set", "complexity_trials=50", "--out", str(tmp_path)])
    assert code == 0, err
    assert os.path.exists(tmp_path / "trials.csv")
    code, _, err = twincher.run_cli(["trial", "--set", "lamda=1"])
    assert code == 2
    assert "lamda" in err
