import json
import math

import numpy as np
import pytest

from conftest import make_record
from shipperf.core import EnvironmentState
from shipperf.errors import InsufficientDataError, ModelCorruptError, SchemaError, TrainingDivergedError
from shipperf.mlmodel import (
    LAYER_SIZES,
    FeatureVector,
    FnnModel,
    TrainConfig,
    engineer_features,
    feature_matrix,
    forward,
    gradient_check,
    init_model,
    load,
    predict,
    save,
    softplus,
    train,
    train_arrays,
)


def features(**env):
    return engineer_features(make_record(env=EnvironmentState(**env), draft_aft=9.0, draft_fwd=7.0))


# --- features ------------------------------------------------------------------


def test_feature_examples():
    f = features(wind_speed_rel=8.0, wind_dir_rel=0.0)
    assert (f.wind_prod_long, f.wind_prod_trans) == (64.0, 0.0)
    g = features(sig_wave_height=4.0, wave_peak_period=10.0, wave_dir_rel=math.pi / 2)
    assert g.wave_power_long == pytest.approx(0.0, abs=1e-12)
    assert g.wave_power_trans == pytest.approx(160.0)
    assert f.draft_avg == 8.0


def test_angular_encoding():
    a = features(wind_speed_rel=7.0, wind_dir_rel=0.4, sig_wave_height=2.0, wave_dir_rel=1.0)
    b = features(wind_speed_rel=7.0, wind_dir_rel=0.4 + 2 * math.pi, sig_wave_height=2.0, wave_dir_rel=1.0)
    assert np.allclose(a.as_array(), b.as_array(), rtol=1e-12)
    c = features(wind_speed_rel=7.0, wind_dir_rel=-0.4, sig_wave_height=2.0, wave_dir_rel=1.0)
    assert c.wind_prod_long == pytest.approx(a.wind_prod_long)
    assert c.wind_prod_trans == pytest.approx(-a.wind_prod_trans)
    assert c.wave_power_trans == a.wave_power_trans


def test_feature_matrix_empty():
    assert feature_matrix([]).shape == (0, 6)


# --- activation and forward ----------------------------------------------------


def test_softplus_values():
    assert softplus(0.0) == pytest.approx(math.log(2.0), rel=1e-15)
    assert 0.0 < softplus(-50.0) == pytest.approx(math.exp(-50.0), rel=1e-12)
    assert softplus(50.0) == pytest.approx(50.0, abs=1e-9)
    assert np.all(np.isfinite(softplus(np.array([-1e4, 1e4]))))


def test_zero_model_predicts_target_mean():
    m = init_model(y_mean=4.2e6, y_std=1e6)
    m.weights = [np.zeros_like(w) for w in m.weights]
    rng = np.random.default_rng(1)
    out = forward(m, rng.normal(size=(7, 6)))
    assert np.all(out == 4.2e6)


def test_hand_built_single_unit():
    m = FnnModel(
        sizes=(2, 1, 1),
        weights=[np.array([[0.5, -1.0]]), np.array([[2.0]])],
        biases=[np.array([0.25]), np.array([-0.1])],
        x_mean=np.array([1.0, 2.0]),
        x_std=np.array([2.0, 4.0]),
        y_mean=10.0,
        y_std=3.0,
    )
    x = np.array([3.0, 6.0])
    z = 0.5 * (3 - 1) / 2 - 1.0 * (6 - 2) / 4 + 0.25
    hand = (2.0 * math.log1p(math.exp(z)) - 0.1) * 3.0 + 10.0
    assert forward(m, x) == pytest.approx(hand, rel=1e-12, abs=1e-12)
    assert forward(m, x) == forward(m, x)


def test_forward_shape_mismatch():
    m = init_model()
    with pytest.raises(ModelCorruptError):
        forward(m, np.zeros(5))
    m.weights[1] = np.zeros((3, 3))
    with pytest.raises(ModelCorruptError):
        forward(m, np.zeros(6))


def test_forward_accepts_feature_vector():
    m = init_model(seed=3)
    f = FeatureVector(5.0, 9.0, 1.0, 2.0, 3.0, 4.0)
    assert forward(m, f) == forward(m, f.as_array())


# --- gradients -----------------------------------------------------------------


def test_gradient_check_random_small_models():
    rng = np.random.default_rng(0)
    for i in range(20):
        sizes = (6, *rng.integers(2, 6, size=rng.integers(1, 4)), 1)
        m = init_model(sizes, seed=i)
        m.biases = [rng.normal(0, 0.3, b.shape) for b in m.biases]
        x = rng.normal(size=(int(rng.integers(1, 9)), 6))
        y = rng.normal(size=len(x))
        assert gradient_check(m, x, y) < 1e-4


def test_gradient_check_zero_weights_and_single_record():
    m = init_model((6, 4, 3, 1), seed=1)
    m.weights = [np.zeros_like(w) for w in m.weights]
    rng = np.random.default_rng(2)
    assert gradient_check(m, rng.normal(size=(5, 6)), rng.normal(size=5)) < 1e-4
    m2 = init_model((6, 4, 3, 1), seed=4)
    assert gradient_check(m2, rng.normal(size=(1, 6)), rng.normal(size=1)) < 1e-4


# --- training ------------------------------------------------------------------


def test_learns_linear_target():
    rng = np.random.default_rng(0)
    x = np.zeros((4000, 6))
    x[:, 0] = rng.uniform(3, 8, 4000)
    x[:, 1] = 10.0
    y = 3 * x[:, 0]
    m, trace = train_arrays(x, y, TrainConfig(epochs=5))
    pred = forward(m, x)
    assert np.mean(((pred - y) / m.y_std) ** 2) < 1e-3
    assert len(trace) == 5


def test_training_deterministic():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(200, 6))
    y = x @ np.arange(6.0)
    a, ta = train_arrays(x, y, TrainConfig(epochs=2, seed=9))
    b, tb = train_arrays(x, y, TrainConfig(epochs=2, seed=9))
    assert ta == tb
    assert all(np.array_equal(p, q) for p, q in zip(a.weights, b.weights))
    c, _ = train_arrays(x, y, TrainConfig(epochs=2, seed=10))
    assert not np.array_equal(a.weights[0], c.weights[0])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_divergence_reports_epoch():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(64, 6))
    y = rng.normal(size=64)
    y[3] = np.inf
    with pytest.raises(TrainingDivergedError) as exc:
        train_arrays(x, y, TrainConfig(epochs=3))
    assert exc.value.epoch == 0


def test_training_config_validation_and_small_data():
    for kw in ({"batch_size": 0}, {"learning_rate": 0.0}, {"epochs": 0}, {"loss": "mae"}):
        with pytest.raises(ValueError):
            TrainConfig(**kw)
    with pytest.raises(InsufficientDataError):
        train_arrays(np.zeros((10, 6)), np.zeros(10))


def test_default_architecture():
    assert LAYER_SIZES == (6, 64, 32, 16, 8, 1)
    assert init_model().n_params() == 6 * 64 + 64 + 64 * 32 + 32 + 32 * 16 + 16 + 16 * 8 + 8 + 8 + 1


def test_train_from_records():
    recs = [make_record(i, stw_kn=8 + (i % 9), power=1e6 * (1 + i % 9)) for i in range(64)]
    m, _ = train(recs, TrainConfig(epochs=1))
    assert predict(m, recs).shape == (64,)
    assert predict(m, []).shape == (0,)


# --- persistence ---------------------------------------------------------------


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100, 6))
    m, _ = train_arrays(x, x.sum(axis=1), TrainConfig(epochs=1))
    save(m, tmp_path / "m.json")
    m2 = load(tmp_path / "m.json")
    assert np.array_equal(forward(m, x), forward(m2, x))
    assert m2.config == m.config


def test_load_errors(tmp_path):
    m = init_model(seed=1)
    save(m, tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    (tmp_path / "t.json").write_text(text[: len(text) // 2])
    with pytest.raises(SchemaError):
        load(tmp_path / "t.json")
    d = json.loads(text)
    d["schema"] = "fnn/0"
    (tmp_path / "v.json").write_text(json.dumps(d))
    with pytest.raises(SchemaError, match="fnn/0"):
        load(tmp_path / "v.json")
    d = json.loads(text)
    d["weights"][2] = d["weights"][2][:-1]
    (tmp_path / "s.json").write_text(json.dumps(d))
    with pytest.raises(ModelCorruptError):
        load(tmp_path / "s.json")
    d = json.loads(text)
    del d["x_std"]
    (tmp_path / "k.json").write_text(json.dumps(d))
    with pytest.raises(SchemaError):
        load(tmp_path / "k.json")
