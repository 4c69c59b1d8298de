import math

import numpy as np
import pytest
from scipy import signal

from exotension.identification import (ConvergenceError, EmptySelectionError, SampleLog,
                                       SteadyStateCriteria, identify, identify_detailed,
                                       robust_linear_fit, select_steady_state,
                                       zero_phase_filter, zero_phase_lowpass)
from exotension.plantsim import ArmPlant, IdentificationProtocol, TDUModel
from exotension.plantsim.protocols import run_identification_protocol
from exotension.transmission import BowdenModel
from oracles import butterworth_gain_sq

FS = 1000.0


def _sine(f, n=20000, fs=FS):
    t = np.arange(n) / fs
    return t, np.sin(2 * np.pi * f * t)


def test_dc_passes_unchanged():
    x = np.full(500, 3.25)
    # identical up to floating-point roundoff in the initial filter state
    assert np.allclose(zero_phase_lowpass(x, 5.0, 3, FS), x, rtol=1e-10, atol=0)


@pytest.mark.parametrize("f", [0.5, 1.0, 2.0, 4.0, 5.0, 8.0])
def test_amplitude_matches_squared_butterworth(f):
    t, x = _sine(f)
    y = zero_phase_lowpass(x, 5.0, 3, FS)
    core = slice(5000, 15000)
    amp = np.sqrt(2 * np.mean(y[core] ** 2))
    assert amp == pytest.approx(butterworth_gain_sq(f, 5.0, FS, 3), rel=1e-3)


def test_one_hertz_example_and_zero_lag():
    t, x = _sine(1.0)
    y = zero_phase_lowpass(x, 5.0, 3, FS)
    core = slice(5000, 15000)
    assert np.sqrt(2 * np.mean(y[core] ** 2)) >= 0.999
    xc = signal.correlate(y[core] - y[core].mean(), x[core] - x[core].mean(), mode="full")
    lags = signal.correlation_lags(y[core].size, x[core].size, mode="full")
    assert lags[np.argmax(xc)] == 0


def test_fifty_hertz_suppressed():
    t, x = _sine(50.0)
    y = zero_phase_lowpass(x, 5.0, 3, FS)
    amp = np.sqrt(2 * np.mean(y[5000:15000] ** 2))
    assert amp < 1e-5
    assert amp == pytest.approx(butterworth_gain_sq(50.0, 5.0, FS, 3), rel=0.05)


def test_filter_is_linear():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(2, 3000))
    a, b = 2.5, -0.75
    lhs = zero_phase_lowpass(a * x + b * y, 5.0, 3, FS)
    rhs = a * zero_phase_lowpass(x, 5.0, 3, FS) + b * zero_phase_lowpass(y, 5.0, 3, FS)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(rhs))


def test_filter_rejects_bad_input():
    with pytest.raises(ValueError):
        zero_phase_lowpass(np.ones(100), 500.0, 3, FS)
    with pytest.raises(ValueError):
        zero_phase_lowpass(np.ones(12), 5.0, 3, FS)
    with pytest.raises(ValueError):
        zero_phase_filter(np.ones(1000), (20.0, 600.0), 3, FS, "bandpass")


def _log(speed, acc, torque, angle_deg, fs=100.0):
    n = len(speed)
    t = np.arange(n) / fs
    return SampleLog(t, np.asarray(speed, float), np.asarray(acc, float),
                     np.asarray(torque, float), np.ones(n), np.radians(angle_deg), fs)


def test_selection_examples():
    c = SteadyStateCriteria()
    v = math.radians(30)
    log = _log([v, v, 0.0, -v], [0, 0, 0, 0], [1, 1, 1, 1], [15, 50, 50, 50])
    up, down = select_steady_state(log, c)
    assert list(up) == [1]  # 15 deg excluded, zero speed excluded
    assert list(down) == [3]


def test_selection_soundness_exhaustive():
    c = SteadyStateCriteria()
    speeds = np.radians([-30, -15, -5, 0, 5, 15, 30])
    accs = np.radians([-20, -15, 0, 10, 15, 20])
    torques = [-0.1, 0.0, 0.5]
    angles = [10, 20, 45, 90, 100]
    grid = np.array(np.meshgrid(speeds, accs, torques, angles)).reshape(4, -1)
    log = _log(grid[0], grid[1], grid[2], grid[3])
    up, down = select_steady_state(log, c)
    kept = set(up) | set(down)
    for i in range(grid.shape[1]):
        s, a, q, th = grid[:, i]
        ok = (abs(math.degrees(s)) > 15 and abs(math.degrees(a)) < 15 and q > 0
              and 20 < th < 90)
        assert (i in kept) == ok
    assert all(log.tdu_speed[up] > 0) and all(log.tdu_speed[down] < 0)


def test_trapezoid_keeps_only_plateau():
    fs = 100.0
    t = np.arange(0, 6, 1 / fs)
    v = np.clip(np.minimum(t, 6 - t), 0, 1.0)  # 1 rad/s^2 ramps (57 deg/s^2)
    a = np.gradient(v, 1 / fs)
    log = _log(v, a, np.ones_like(t), np.full_like(t, 45.0), fs)
    up, _ = select_steady_state(log, SteadyStateCriteria())
    assert np.all((t[up] > 1.0 - 1e-9) & (t[up] < 5.0 + 1e-9))
    assert np.all(np.abs(a[up]) < 1e-9)


def test_empty_selection_is_reported():
    log = _log([0.0] * 20, [0.0] * 20, [1.0] * 20, [45] * 20)
    with pytest.raises(EmptySelectionError):
        select_steady_state(log, SteadyStateCriteria())


def test_sample_log_requires_uniform_time():
    with pytest.raises(ValueError):
        SampleLog([0, 0.01, 0.03], [0] * 3, [0] * 3, [0] * 3, [0] * 3, [0] * 3)


def test_robust_fit_exact_line():
    x = np.linspace(10, 60, 200)
    r = robust_linear_fit(x, 0.05 * x + 0.1)
    assert r.slope == pytest.approx(0.05, abs=1e-9)
    assert r.intercept == pytest.approx(0.1, abs=1e-9)
    assert r.r_squared == pytest.approx(1.0, abs=1e-9)


def test_robust_fit_agrees_with_ols_on_clean_noise():
    rng = np.random.default_rng(3)
    x = rng.uniform(10, 60, 500)
    y = 0.05 * x + 0.1 + rng.normal(0, 0.02, 500)
    r = robust_linear_fit(x, y)
    X = np.column_stack([np.ones_like(x), x])
    beta, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    sigma2 = res[0] / (x.size - 2)
    se = math.sqrt(sigma2 * np.linalg.inv(X.T @ X)[1, 1])
    assert r.slope == pytest.approx(0.05, rel=0.02)
    assert abs(r.slope - beta[1]) < se


def test_robust_fit_resists_outliers():
    rng = np.random.default_rng(4)
    x = rng.uniform(10, 60, 400)
    y = 0.05 * x + 0.1 + rng.normal(0, 0.02, 400)
    bad = rng.choice(400, 20, replace=False)
    y[bad] += 10 * 0.05 * x[bad]  # 10x the true response
    r = robust_linear_fit(x, y)
    ols = np.polyfit(x, y, 1)[0]
    assert r.slope == pytest.approx(0.05, rel=0.02)
    assert abs(ols / 0.05 - 1) > 0.05


def test_robust_fit_errors():
    with pytest.raises(ValueError):
        robust_linear_fit(np.arange(5.0), np.arange(5.0))
    with pytest.raises(ValueError):
        robust_linear_fit(np.ones(20), np.arange(20.0))
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, 50)
    y = x + rng.standard_cauchy(50)
    with pytest.raises(ConvergenceError) as info:
        robust_linear_fit(x, y, max_iter=1)
    assert info.value.result.iterations == 1


def _synthetic_log(model, noise, seed=0):
    """Constant-tension sweeps built straight from the forward model.

    Each block rests for 1 s, ramps the drive speed up over 0.5 s, holds
    it for 2 s and ramps down again.  Torque always follows the block's
    direction, so ``torque = slope * tension`` holds at every sample.
    """
    rng = np.random.default_rng(seed)
    fs = 200.0
    dt = 1 / fs
    ramp = 0.5 * (1 - np.cos(np.pi * np.arange(0, 0.5, dt) / 0.5))
    shape = np.concatenate([np.zeros(int(fs)), ramp, np.ones(int(2 * fs)), ramp[::-1]])
    chunks = []
    for direction in (1.0, -1.0):
        for t_out in np.linspace(10, 60, 11):
            n = shape.size
            t_in = t_out / model.gain(direction)
            speed = direction * 2.0 * shape
            chunks.append(np.column_stack([
                speed, np.gradient(speed, dt),
                np.full(n, model.pulley_radius * t_in), np.full(n, t_out),
                np.full(n, math.radians(45))]))
    d = np.vstack(chunks)
    t = np.arange(d.shape[0]) * dt
    return SampleLog(t, d[:, 0], d[:, 1], d[:, 2], d[:, 3] + noise * rng.normal(size=t.size),
                     d[:, 4], fs)


def test_identify_noiseless_synthetic(bench_model):
    res = identify_detailed(_synthetic_log(bench_model, 0.0))
    assert res.regression.r2_raising >= 0.9999
    assert res.regression.r2_lowering >= 0.9999


def test_identify_noisy_synthetic(bench_model):
    reg = identify(_synthetic_log(bench_model, 0.5, seed=2))
    assert reg.slope_raising == pytest.approx(0.035 / bench_model.raising_gain, rel=0.02)
    assert reg.slope_lowering == pytest.approx(0.035 / bench_model.lowering_gain, rel=0.02)
    assert min(reg.r2_raising, reg.r2_lowering) >= 0.99


def test_identify_names_missing_direction(bench_model):
    log = _synthetic_log(bench_model, 0.0)
    up_only = SampleLog(log.time, np.abs(log.tdu_speed), log.tdu_acceleration, log.tdu_torque,
                        log.load_cell_tension, log.elevation_angle, log.sample_rate)
    with pytest.raises(EmptySelectionError, match="lowering"):
        identify(up_only)


def test_protocol_round_trip_exact(bench_model):
    """No noise, no drive losses: the analytic slopes come back to 0.1 %."""
    run = run_identification_protocol(bench_model, ArmPlant(), IdentificationProtocol(),
                                      noise=0.0, tdu=TDUModel.ideal(), seed=0)
    reg = identify(run.log)
    assert reg.slope_raising == pytest.approx(0.035 / bench_model.raising_gain, rel=1e-3)
    assert reg.slope_lowering == pytest.approx(0.035 / bench_model.lowering_gain, rel=1e-3)
    assert abs(reg.intercept_raising) < 0.05 and abs(reg.intercept_lowering) < 0.05


@pytest.mark.parametrize("mu, phi", [(0.1, 1.0), (0.25, math.pi / 2), (0.4, 2.5)])
def test_protocol_round_trip_noisy(mu, phi):
    model = BowdenModel(mu, phi, 0.035)
    run = run_identification_protocol(model, ArmPlant(), IdentificationProtocol(repetitions=2),
                                      noise=0.5, tdu=TDUModel.ideal(), seed=11)
    reg = identify(run.log)
    assert reg.slope_raising == pytest.approx(0.035 / model.raising_gain, rel=0.02)
    assert reg.slope_lowering == pytest.approx(0.035 / model.lowering_gain, rel=0.02)
    assert abs(reg.intercept_raising) < 0.05 and abs(reg.intercept_lowering) < 0.05
    assert reg.slope_raising > reg.slope_lowering


def test_protocol_round_trip_with_drive_losses(bench_model):
    run = run_identification_protocol(bench_model, ArmPlant(), IdentificationProtocol(),
                                      noise=0.5, tdu=TDUModel(), seed=5)
    reg = identify(run.log)
    assert reg.slope_raising == pytest.approx(0.035 / bench_model.raising_gain, rel=0.02)
    assert reg.slope_lowering == pytest.approx(0.035 / bench_model.lowering_gain, rel=0.02)
    assert min(reg.r2_raising, reg.r2_lowering) >= 0.99


def test_frictionless_lines_coincide(caplog):
    model = BowdenModel(0.0, math.pi / 2, 0.035)
    run = run_identification_protocol(model, ArmPlant(), IdentificationProtocol(repetitions=1),
                                      noise=0.5, tdu=TDUModel.ideal(), seed=1)
    reg = identify(run.log)
    assert reg.slope_raising == pytest.approx(reg.slope_lowering, rel=0.01)
    assert "coincide" in caplog.text
