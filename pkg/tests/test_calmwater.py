import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shipperf.calmwater import (
    Breakpoint,
    CalmWaterModel,
    binary_segmentation,
    detect_breakpoints,
    fit,
    log_predictor,
    predict,
    smooth_dummy,
)
from shipperf.core import KNOT
from shipperf.errors import (
    DegenerateFitError,
    DomainError,
    InsufficientDataError,
    InvalidParameterError,
    OrderingError,
    SchemaError,
)


def line_sse(x, y):
    """Reference straight-line SSE via numpy.polyfit."""
    if len(x) < 2:
        return 0.0
    coef = np.polyfit(x, y, 1)
    r = y - np.polyval(coef, x)
    return float(r @ r)


def exhaustive_split(x, y, min_segment):
    best_t, best = None, math.inf
    for t in range(min_segment, len(x) - min_segment + 1):
        c = line_sse(x[:t], y[:t]) + line_sse(x[t:], y[t:])
        if c < best - 1e-12:
            best_t, best = t, c
    return best_t, best


def two_exponent_data(rng, n=2000, sigma=0.02, bp_kn=11.53):
    v = np.sort(rng.uniform(8.0, 16.0, n)) * KNOT
    bp = bp_kn * KNOT
    lnp = 12.0 + 1.8 * np.log(v) + 1.0 * np.maximum(np.log(v) - math.log(bp), 0.0)
    return v, np.exp(lnp + rng.normal(0.0, sigma, n))


# --- smooth dummy ------------------------------------------------------------


def test_smooth_dummy_values():
    assert smooth_dummy(5.0, 5.0, 0.3) == pytest.approx(0.5)
    assert smooth_dummy(5.0 + 20 * 0.3, 5.0, 0.3) == pytest.approx(1.0, abs=1e-15)
    assert smooth_dummy(5.0 - 20 * 0.3, 5.0, 0.3) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidParameterError):
        smooth_dummy(1.0, 1.0, 0.0)


# --- segmentation -------------------------------------------------------------


def test_greedy_split_matches_exhaustive_oracle():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(20, 500))
        x = np.sort(rng.uniform(0, 3, n))
        t0 = int(rng.integers(n // 4, 3 * n // 4))
        y = np.where(np.arange(n) < t0, x, 2.5 * x - 1.5 * x[t0]) + rng.normal(0, 0.3, n)
        ms = max(3, n // 10)
        (t,) = binary_segmentation(x, y, 1, ms)
        t_ref, c_ref = exhaustive_split(x, y, ms)
        c = line_sse(x[:t], y[:t]) + line_sse(x[t:], y[t:])
        assert t == t_ref or c == pytest.approx(c_ref, rel=1e-9)


def test_segmentation_recovers_sharp_kink():
    x = np.linspace(0, 1, 101)
    y = np.where(x < 0.4, x, 0.4 + 3 * (x - 0.4))
    (t,) = binary_segmentation(x, y, 1, 5)
    assert x[t - 1] <= 0.4 <= x[t]


def test_two_breakpoints():
    # the slope change at 1 dominates, so greedy places it first and then
    # finds the smaller one at 2 inside the right-hand segment
    x = np.linspace(0, 3, 300)
    y = np.piecewise(x, [x < 1, (x >= 1) & (x < 2), x >= 2],
                     [lambda s: 0 * s, lambda s: 6 * (s - 1), lambda s: 6 + 5.5 * (s - 2)])
    ts = binary_segmentation(x, y, 2, 10)
    assert np.allclose([x[t] for t in ts], [1.0, 2.0], atol=0.05)


def test_detect_breakpoint_midpoint_between_samples():
    v = np.linspace(4.0, 8.0, 80)
    p = np.exp(np.where(v < 6.0, 2 * np.log(v), 2 * np.log(6.0) + 3 * (np.log(v) - np.log(6.0))))
    (bp,) = detect_breakpoints(v, p)
    assert abs(bp - 6.0) < (v[1] - v[0])


def test_detect_errors():
    v = np.linspace(4, 8, 40)
    with pytest.raises(InsufficientDataError):
        detect_breakpoints(v[:5], v[:5] ** 2)
    with pytest.raises(OrderingError):
        detect_breakpoints(v[::-1], v**2)
    with pytest.raises(DomainError):
        detect_breakpoints(v, -(v**2))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.floats(min_value=0.5, max_value=20.0))
def test_detection_invariant_to_power_scale(seed, scale):
    rng = np.random.default_rng(seed)
    v, p = two_exponent_data(rng, n=200, sigma=0.05)
    assert detect_breakpoints(v, p) == detect_breakpoints(v, p * scale)


# --- regression ---------------------------------------------------------------


def test_fit_recovers_noiseless_model():
    truth = CalmWaterModel(11.5, 1.8, 0.06, 0.01, (Breakpoint(11.53 * KNOT, 1.0),), 0.5 * KNOT)
    rng = np.random.default_rng(0)
    v = rng.uniform(8, 16, 500) * KNOT
    t = rng.uniform(7, 12, 500)
    m, diag = fit(v, t, predict(truth, v, t), [11.53 * KNOT], 0.5 * KNOT)
    for a, b in [(m.ln_x1, 11.5), (m.x2, 1.8), (m.x3, 0.06), (m.x4, 0.01), (m.breakpoints[0].x5, 1.0)]:
        assert a == pytest.approx(b, rel=1e-8, abs=1e-9)
    assert diag.residual_sse < 1e-18


def test_breakpoint_recovery_over_seeds():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        v, p = two_exponent_data(rng)
        (bp,) = detect_breakpoints(v, p)
        _, diag = fit(v, np.full(len(v), 10.0) + rng.normal(0, 1e-3, len(v)), p, [bp], 1e-3 * KNOT)
        assert abs(bp / KNOT - 11.53) < 0.3
        assert diag.effective_exponents[0] == pytest.approx(1.8, abs=0.05)
        assert diag.effective_exponents[1] == pytest.approx(2.8, abs=0.05)


def test_collinear_draft_raises():
    v = np.linspace(4, 8, 50)
    with pytest.raises(DegenerateFitError) as exc:
        fit(v, np.full(50, 10.0), v**2)
    assert "x3" in exc.value.columns


def test_fit_needs_enough_points():
    with pytest.raises(InsufficientDataError):
        fit([5.0, 6.0, 7.0], [9.0, 9.5, 10.0], [1.0, 2.0, 3.0])


def test_prediction_monotone_in_speed():
    m = CalmWaterModel(11.5, 1.8, 0.06, 0.0, (Breakpoint(6.0, 1.0),), 0.25)
    v = np.linspace(3, 9, 200)
    assert np.all(np.diff(predict(m, v, 10.0)) > 0)
    assert isinstance(predict(m, 6.0, 10.0), float)
    with pytest.raises(DomainError):
        log_predictor(m, 0.0, 10.0)


def test_model_json_round_trip(tmp_path):
    m = CalmWaterModel(11.5, 1.8, 0.06, -0.002, (Breakpoint(5.9, 1.0), Breakpoint(7.0, 0.4)), 0.3)
    m.save(tmp_path / "m.json")
    assert CalmWaterModel.load(tmp_path / "m.json") == m
    (tmp_path / "bad.json").write_text('{"schema": "calmwater/0"}')
    with pytest.raises(SchemaError):
        CalmWaterModel.load(tmp_path / "bad.json")


def test_breakpoints_must_increase():
    with pytest.raises(InvalidParameterError):
        CalmWaterModel(1.0, 2.0, breakpoints=(Breakpoint(6.0, 1.0), Breakpoint(5.0, 1.0)))
