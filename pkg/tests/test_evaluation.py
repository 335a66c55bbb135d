import math

import numpy as np
import pytest

from conftest import make_record
from shipperf.calmwater import predict as calm_predict
from shipperf.core import EnvironmentState
from shipperf.data import NoiseModel, SyntheticScenario, generate
from shipperf.errors import FoldError, InsufficientDataError, UndefinedMetricError, ValidityError
from shipperf.evaluation import (
    BASELINE,
    DIRECT,
    benchmark,
    binned_mape,
    fit_calm_from_records,
    kfold_evaluate,
    kfold_indices,
    metrics,
    weather_correct,
    write_benchmark_csv,
    write_benchmark_svg,
    write_binned_csv,
    write_binned_svg,
    write_mape_matrix_csv,
)
from shipperf.waves import WaveTheory, default_registry, get_theory


@pytest.fixture(scope="module")
def scenario():
    return SyntheticScenario(n_records=1500, seed=11, noise=NoiseModel(log_power=0.0))


@pytest.fixture(scope="module")
def records(scenario):
    return generate(scenario)


# --- metrics ---------------------------------------------------------------------


def test_metrics_hand_example():
    m = metrics([100, 200], [110, 190])
    assert m.mae == 10.0
    assert m.mape == (10 / 110 + 10 / 190) / 2
    assert m.mape == pytest.approx(0.07177, abs=5e-6)
    assert m.mbe == 0.0
    assert m.r2 == 0.96
    assert m.n == 2


def test_metrics_identities():
    p = [3.0, 5.0, 9.0]
    perfect = metrics(p, p)
    assert (perfect.mae, perfect.mape, perfect.mbe, perfect.r2) == (0.0, 0.0, 0.0, 1.0)
    assert metrics(p, [np.mean(p)] * 3).r2 == pytest.approx(0.0, abs=1e-15)
    assert metrics(p, [9.0, 3.0, 5.0]).r2 < 0


def test_mbe_sign_and_mape_asymmetry():
    assert metrics([100, 200], [120, 220]).mbe == 20.0
    a, b = [100.0, 300.0], [150.0, 250.0]
    assert metrics(a, b).mape != metrics(b, a).mape
    assert metrics(a, b, conventional=True).mape == pytest.approx(metrics(b, a).mape)


def test_metrics_errors():
    with pytest.raises(ValueError):
        metrics([1, 2], [1])
    with pytest.raises(ValueError):
        metrics([], [])
    with pytest.raises(UndefinedMetricError):
        metrics([1, 2], [0, 2])
    with pytest.raises(UndefinedMetricError):
        metrics([0, 2], [1, 2], conventional=True)
    with pytest.raises(UndefinedMetricError):
        metrics([2, 2], [1, 3])


def test_metrics_order_independent():
    rng = np.random.default_rng(0)
    a = rng.uniform(1e6, 1e7, 1000)
    b = a * rng.normal(1, 0.05, 1000)
    perm = rng.permutation(1000)
    assert metrics(a, b) == metrics(a[perm], b[perm])


# --- weather correction ------------------------------------------------------------


def test_correction_identity_without_weather(vessel, scenario):
    # no true wind: the relative wind is the ship's own speed from ahead
    recs = [make_record(i, power=4e6 + i, env=EnvironmentState(wind_speed_rel=12 * 1852 / 3600)) for i in range(5)]
    cd = weather_correct(recs, vessel, scenario.wind_setup(), get_theory("kreitner-directional"))
    assert list(cd.calm_power) == [4e6 + i for i in range(5)]


def test_correction_recovers_ground_truth(records, scenario):
    cd = weather_correct(records, scenario.vessel, scenario.wind_setup(), get_theory(scenario.wave_theory))
    truth = calm_predict(scenario.calm_model, cd.stw, cd.draft_mean)
    assert cd.n_dropped == 0
    assert np.max(np.abs(cd.calm_power / truth - 1)) < 1e-9


def test_correction_drops_non_positive(vessel, scenario):
    gale = EnvironmentState(wind_speed_rel=30.0)
    recs = [make_record(0, stw_kn=14, power=2e5, env=gale), make_record(1)]
    cd = weather_correct(recs, vessel, scenario.wind_setup(), None)
    assert cd.n_dropped == 1 and len(cd.calm_power) == 1


def test_correction_validity_modes(vessel):
    beam_sea = EnvironmentState(sig_wave_height=2.0, wave_dir_rel=math.pi / 2)
    recs = [make_record(0, env=beam_sea), make_record(1)]
    cd = weather_correct(recs, vessel, None, get_theory("stawave1"))
    assert cd.n_out_of_validity == 1 and len(cd.calm_power) == 1
    with pytest.raises(ValidityError):
        weather_correct(recs, vessel, None, get_theory("stawave1"), mode="strict")


def test_fit_calm_needs_calm_records(vessel):
    rough = [make_record(i, env=EnvironmentState(sig_wave_height=3.0)) for i in range(20)]
    with pytest.raises(InsufficientDataError, match="20"):
        fit_calm_from_records(rough, vessel, None, None)


# --- k-fold ----------------------------------------------------------------------


def test_fold_partition():
    folds = kfold_indices(103, 5, seed=1)
    allidx = np.concatenate(folds)
    assert sorted(allidx) == list(range(103))
    assert {len(f) for f in folds} <= {20, 21}
    assert all(np.array_equal(a, b) for a, b in zip(folds, kfold_indices(103, 5, seed=1)))
    assert not all(np.array_equal(a, b) for a, b in zip(folds, kfold_indices(103, 5, seed=2)))


def test_fold_errors():
    with pytest.raises(FoldError):
        kfold_indices(4, 5)
    with pytest.raises(FoldError):
        kfold_indices(10, 1)


def oracle_trainer(train):
    return lambda recs: np.array([r.brake_power for r in recs])


def mean_trainer(train):
    mu = float(np.mean([r.brake_power for r in train]))
    return lambda recs: np.full(len(recs), mu)


def test_leave_one_out():
    recs = [make_record(i, power=1e6 * (1 + i)) for i in range(10)]
    res = kfold_evaluate(recs, 10, mean_trainer)
    assert len(res.folds) == 10 and all(f.n == 1 for f in res.folds)
    assert res.mean.n == 10
    assert math.isnan(res.mean.r2)


def test_kfold_oracle_and_determinism():
    recs = [make_record(i, power=1e6 * (1 + i % 7)) for i in range(50)]
    assert kfold_evaluate(recs, 5, oracle_trainer).mean.mape == 0.0
    a = kfold_evaluate(recs, 5, mean_trainer, seed=3)
    b = kfold_evaluate(recs, 5, mean_trainer, seed=3)
    assert a == b
    assert a.mean.mape == pytest.approx(np.mean([f.mape for f in a.folds]))


# --- benchmark -----------------------------------------------------------------


def builtins():
    reg = default_registry(include_plugins=False)
    return [reg["kreitner"], reg["kreitner-directional"], reg["stawave1"]]


def test_benchmark_generating_theory_wins(records, scenario):
    res = benchmark(records, scenario.vessel, builtins(), {"truth": scenario.calm_model}, scenario.wind_setup())
    assert res.columns == [BASELINE, "kreitner", "kreitner-directional", "stawave1"]
    gen = res.cell("truth", "kreitner-directional")
    assert gen.mape < 1e-3
    for col in (BASELINE, "kreitner", "stawave1"):
        assert res.cell("truth", col).mape > gen.mape
    assert res.cell("truth", "stawave1").n_out_of_validity > 0


def test_benchmark_order_independent(records, scenario):
    rng = np.random.default_rng(0)
    shuffled = [records[i] for i in rng.permutation(len(records))][:400]
    sub = sorted(shuffled, key=lambda r: r.timestamp)
    kw = dict(v=scenario.vessel, theories=builtins(), calm_models={"m": scenario.calm_model}, wind=scenario.wind_setup())
    a, b = benchmark(sub, **kw), benchmark(shuffled, **kw)
    assert a.cells == b.cells


def test_benchmark_flags_all_invalid_cell(vessel, scenario):
    beam = EnvironmentState(sig_wave_height=2.0, wave_dir_rel=math.radians(60))
    recs = [make_record(i, power=4e6 + 1e5 * i, env=beam) for i in range(6)]
    res = benchmark(recs, vessel, [get_theory("stawave1")], {"m": scenario.calm_model})
    cell = res.cell("m", "stawave1")
    assert cell.flagged and cell.report is None and cell.n_out_of_validity == 6
    assert math.isnan(res.mape_matrix()[0, 1])
    assert not res.cell("m", BASELINE).flagged


def test_benchmark_outputs(records, scenario, tmp_path):
    sub = records[:300]
    direct = {"nn": np.array([r.brake_power * 1.01 for r in sub])}
    res = benchmark(sub, scenario.vessel, builtins(), {"m": scenario.calm_model}, scenario.wind_setup(), direct)
    assert res.columns[-1] == DIRECT and res.rows == ["m", "nn"]
    assert res.cell("nn", DIRECT).mape == pytest.approx(0.01 / 1.01)
    write_benchmark_csv(res, tmp_path / "b.csv")
    write_mape_matrix_csv(res, tmp_path / "m.csv")
    write_benchmark_svg(res, tmp_path / "b.svg")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 + 1
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "model,no-weather-correction,kreitner,kreitner-directional,stawave1,direct"
    assert (tmp_path / "b.svg").read_text().lstrip().startswith("<?xml")
    with pytest.raises(ValueError):
        benchmark(sub, scenario.vessel, [], {"m": scenario.calm_model})


def test_benchmark_accepts_custom_theory(records, scenario):
    zero = WaveTheory("zero", lambda v, e, s: 0.0)
    res = benchmark(records[:100], scenario.vessel, [zero], {"m": scenario.calm_model})
    assert res.cell("m", "zero").report == res.cell("m", BASELINE).report


# --- binned error ----------------------------------------------------------------


def test_binned_perfect_and_partition():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 6, 500)
    p = rng.uniform(1, 2, 500)
    b = binned_mape(p, p, x, n_bins=12)
    assert b.count.sum() == 500
    assert np.all(b.mape[b.count > 0] == 0.0)
    assert len(b.edges) == 13 and b.edges[0] == x.min() and b.edges[-1] == x.max()


def test_binned_monotone_error():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 6, 2000)
    x[:5] = 100.0  # leaves empty bins in the middle
    pred = np.full(2000, 1000.0)
    actual = pred * (1 + 0.01 * x)
    b = binned_mape(actual, pred, x, n_bins=12)
    full = b.count > 0
    assert np.any(~full) and np.all(np.isnan(b.mape[~full]))
    assert np.all(np.diff(b.mape[full]) > 0)


def test_binned_errors_and_io(tmp_path):
    with pytest.raises(ValueError):
        binned_mape([1], [1], [1], n_bins=1)
    with pytest.raises(ValueError):
        binned_mape([1, 2], [1], [1, 2])
    b = binned_mape([1.0, 2.0, 4.0], [1.0, 2.5, 4.0], [0.0, 1.0, 2.0], n_bins=4)
    write_binned_csv(b, tmp_path / "b.csv", label="hs_m")
    write_binned_svg(b, tmp_path / "b.svg", xlabel="H_S (m)")
    rows = (tmp_path / "b.csv").read_text().splitlines()
    assert rows[0] == "hs_m_lo,hs_m_hi,count,mape,std"
    assert len(rows) == 5
