import csv
import json
import math

import numpy as np
import pytest

from exotension import records
from exotension.cli import METRIC_COLUMNS, main
from exotension.config import ConfigError, default_config, load, validate
from exotension.controller import DirectionalRegression
from exotension.identification import SampleLog
from exotension.metrics import trial_metrics
from exotension.plantsim import raise_lower_cycles

SMALL_ID = {"spool_velocities_rad_s": [1.0, 3.0, 5.0], "mannequin_loads_nm": [1.0, 3.0],
            "repetitions": 2}


def _table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _write(tmp_path, doc, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


# -- config validation -----------------------------------------------------------

def test_defaults_validate():
    cfg = default_config()
    assert cfg.transmission().mu == 0.25
    assert cfg.trial_protocol().repetitions == 10
    assert cfg.regression() is None


@pytest.mark.parametrize("doc, path", [
    ({"transmission": {"mu": -0.1}}, "transmission.mu"),
    ({"plant": {"tdu": {"max_torque_nm": "big"}}}, "plant.tdu.max_torque_nm"),
    ({"controller": {"moment_arm_m": 0.12}}, "controller.moment_arm_m"),
    ({"controller": {"v001_rad_s": 1.0, "v099_rad_s": -1.0}}, "controller.v099_rad_s"),
    ({"protocol": {"identification": {"filter_cutoff_hz": 150.0}}},
     "protocol.identification.filter_cutoff_hz"),
    ({"metrics": {"envelope": {"bandpass_low_hz": 500.0}}}, "metrics.envelope.bandpass_high_hz"),
    ({"protocol": {"trial": {"supports": [{"name": "a", "support_fraction": 1.5}]}}},
     "protocol.trial.supports[0].support_fraction"),
    ({"plant": {"unknown_key": 1}}, "plant"),
    ({"schema_version": 99}, "schema_version"),
    ({"protocol": {"trial": {"log_rate_hz": 300.0}}}, "protocol.trial"),
])
def test_validation_reports_field_path(doc, path):
    with pytest.raises(ConfigError) as info:
        validate(doc)
    assert info.value.path == path
    assert str(info.value).startswith(path)


def test_incomplete_regression_rejected():
    with pytest.raises(ConfigError, match="controller"):
        validate({"controller": {"m_raise": 0.05}})


def test_load_reports_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"rng_seed": 1,,}')
    with pytest.raises(ConfigError, match="line 1"):
        load(p)


def test_with_seed_overrides():
    assert default_config().with_seed(42).rng_seed == 42


# -- CLI exit codes --------------------------------------------------------------

def test_missing_config_exits_2(tmp_path, capsys):
    code = main(["identify", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == 2
    assert "nope.json" in capsys.readouterr().err


def test_invalid_config_exits_2_with_path(tmp_path, capsys):
    cfg = _write(tmp_path, {"controller": {"moment_arm_m": 0.2}})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "controller.moment_arm_m" in capsys.readouterr().err


def test_simulate_without_regression_exits_2(tmp_path):
    cfg = _write(tmp_path, {})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_bad_regression_file_exits_2(tmp_path):
    cfg = _write(tmp_path, {})
    reg = tmp_path / "reg.json"
    reg.write_text('{"m_raise": 1}')
    assert main(["simulate", "--config", str(cfg), "--regression", str(reg),
                 "--out", str(tmp_path)]) == 2


def test_runtime_failure_exits_3(tmp_path, capsys):
    # every spool speed stays below the 15 deg/s selection threshold
    doc = {"protocol": {"identification": {**SMALL_ID, "spool_velocities_rad_s": [0.05]}}}
    cfg = _write(tmp_path, doc)
    assert main(["identify", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    assert "steady-state" in capsys.readouterr().err


# -- identify --------------------------------------------------------------------

def test_identify_default_config(tmp_path):
    cfg = _write(tmp_path, {"rng_seed": 3})
    out = tmp_path / "id"
    assert main(["identify", "--config", str(cfg), "--out", str(out)]) == 0
    reg = DirectionalRegression.from_dict(records.read_json(out / "regression.json"))
    assert reg.slope_raising > reg.slope_lowering
    summary = records.read_json(out / "regression_summary.json")
    assert summary["blocks"] == 7 * 2 * 5 * 5
    assert summary["raising"]["sample_count"] > 100
    assert abs(summary["slope_error_raising"]) < 0.02
    assert abs(summary["slope_error_lowering"]) < 0.02
    scatter = _table(out / "scatter.csv")
    assert len(scatter) == (summary["raising"]["sample_count"]
                                         + summary["lowering"]["sample_count"])
    log = records.load_sample_log(out / "sample_log.csv")
    assert isinstance(log, SampleLog) and log.sample_rate == pytest.approx(200.0)


def test_identify_frictionless_lines_coincide(tmp_path):
    cfg = _write(tmp_path, {"transmission": {"mu": 0.0},
                            "protocol": {"identification": SMALL_ID},
                            "plant": {"tdu": {"stiction": None, "rotor_inertia_kgm2": 0.0,
                                              "viscous_friction_nms": 0.0}}})
    assert main(["identify", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    reg = records.read_json(tmp_path / "regression.json")
    assert reg["m_raise"] == pytest.approx(reg["m_lower"], rel=0.01)


def test_identify_is_deterministic(tmp_path):
    cfg = _write(tmp_path, {"protocol": {"identification": SMALL_ID}})
    for name in ("a", "b"):
        assert main(["identify", "--config", str(cfg), "--out", str(tmp_path / name),
                     "--seed", "9"]) == 0
    for f in ("sample_log.csv", "regression.json", "scatter.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


# -- simulate --------------------------------------------------------------------

@pytest.fixture(scope="module")
def simulated(tmp_path_factory, request):
    root = tmp_path_factory.mktemp("sim")
    model_reg = DirectionalRegression(0.0500316, 0.0, 0.0244845, 0.0).to_dict()
    (root / "reg.json").write_text(json.dumps(model_reg))
    cfg = _write(root, {"protocol": {"trial": {"repetitions": 3}}, "rng_seed": 5})
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        assert main(["simulate", "--config", str(cfg), "--regression", str(root / "reg.json"),
                     "--out", str(root / name), "--jobs", jobs]) == 0
    return root


def test_simulate_table_layout(simulated):
    rows = _table(simulated / "a" / "metrics_table.csv")
    assert len(rows) == 9
    assert {(r["support"], float(r["peak_speed_deg_s"])) for r in rows} == {
        (s, v) for s in ("pre", "25%", "50%") for v in (60.0, 120.0, 180.0)}
    for col in METRIC_COLUMNS:
        assert col in rows[0]
    assert len(list((simulated / "a" / "trials").glob("trial_*.csv"))) == 9


def test_simulate_is_byte_identical(simulated):
    a = (simulated / "a" / "metrics_table.csv").read_bytes()
    assert a == (simulated / "b" / "metrics_table.csv").read_bytes()
    assert a == (simulated / "c" / "metrics_table.csv").read_bytes()
    for f in (simulated / "a" / "trials").iterdir():
        assert f.read_bytes() == (simulated / "c" / "trials" / f.name).read_bytes()


def test_trial_csv_round_trip_reproduces_metrics(simulated):
    rows = [r for r in _table(simulated / "a" / "metrics_table.csv") if r["support"] == "50%"]
    row_csv = rows[-1]
    speed = int(float(row_csv["peak_speed_deg_s"]))
    log = records.load_trial_log(simulated / "a" / "trials" / f"trial_50pct_{speed}.csv",
                                 sample_rate=100.0)
    row = trial_metrics(log)
    for col in METRIC_COLUMNS:
        assert row[col] == float(row_csv[col]), col


def test_perfect_model_run_has_small_errors(tmp_path, bench_model):
    reg = DirectionalRegression.from_model(bench_model)
    (tmp_path / "reg.json").write_text(json.dumps(reg.to_dict()))
    cfg = _write(tmp_path, {
        "controller": {"v001_rad_s": -0.05, "v099_rad_s": 0.05},
        "plant": {"tdu": {"stiction": None, "rotor_inertia_kgm2": 0.0,
                          "viscous_friction_nms": 0.0, "sheath_deadband_m_s": 1e-4},
                  "human": {"bandwidth_hz": 4.0, "torque_noise_nm": 0.0}},
        "protocol": {"trial": {"repetitions": 3, "peak_speeds_deg_s": [60.0]}}})
    assert main(["simulate", "--config", str(cfg), "--regression", str(tmp_path / "reg.json"),
                 "--out", str(tmp_path)]) == 0
    assert len(_table(tmp_path / "metrics_table.csv")) == 3
    # the whole-trial columns include the friction lock at each reversal, so
    # the near-zero check is made away from them, on the written trial logs
    for f in sorted((tmp_path / "trials").glob("*.csv")):
        log = records.load_trial_log(f, sample_rate=100.0)
        log = log.select(log.repetition > 0)
        nt = log.normalized_time
        away = (np.abs(nt - 0.5) > 0.05) & (nt >= 0.05) & (nt <= 0.95)
        assert np.sqrt(np.mean(log.tension_error[away] ** 2)) < 1e-3


# -- metrics command -------------------------------------------------------------

def _recording(path, fs=2000.0, reps=3):
    ref = raise_lower_cycles(math.radians(20), math.radians(100), math.radians(120), reps, fs)
    t = ref.time
    emg_a = 0.8 * np.sin(2 * np.pi * 100.0 * t)
    emg_b = np.where(ref.raising, 1.0, 0.2) * np.sin(2 * np.pi * 150.0 * t)
    cols = {"t_s": t, "emg_a": emg_a, "emg_b": emg_b, "repetition": ref.repetition,
            "raising": ref.raising.astype(float), "elevation_speed_rad_s": ref.velocity}
    records.write_columns(path, cols)
    return ref


def test_metrics_command(tmp_path):
    rec = tmp_path / "rec.csv"
    _recording(rec)
    cfg = _write(tmp_path, {})
    out = tmp_path / "m"
    assert main(["metrics", "--config", str(cfg), "--recordings", str(rec),
                 "--out", str(out)]) == 0
    env = records.read_columns(out / "envelopes.csv")
    assert set(env) == {"t_s", "emg_a", "emg_b"}
    summary = records.read_json(out / "metrics_summary.json")
    assert summary["repetitions_used"] == [1, 2]
    # steady tone: envelope is the constant A / sqrt(2) and so is every iEMG
    c = 0.8 / math.sqrt(2)
    for phase in ("entire", "raising", "lowering"):
        assert summary["iemg"]["emg_a"][phase] == pytest.approx(c, rel=0.01)
    b = summary["iemg"]["emg_b"]
    assert b["raising"] > 3 * b["lowering"]
    assert -3.5 <= summary["sparc"] <= -2.0
    sp = records.read_columns(out / "sparc.csv", ("repetition", "sparc"))
    assert sp["sparc"].size == 2


def test_metrics_normalization(tmp_path):
    rec = tmp_path / "rec.csv"
    _recording(rec)
    cfg = _write(tmp_path, {})
    assert main(["metrics", "--config", str(cfg), "--recordings", str(rec),
                 "--normalize-by", str(rec), "--out", str(tmp_path / "n")]) == 0
    env = records.read_columns(tmp_path / "n" / "envelopes.csv")
    assert np.max(env["emg_a"]) == pytest.approx(1.0, rel=0.02)


def test_metrics_schema_errors(tmp_path, capsys):
    cfg = _write(tmp_path, {})
    bad = tmp_path / "bad.csv"
    bad.write_text("t_s,emg\n0.0,1.0\n0.001,oops\n")
    assert main(["metrics", "--config", str(cfg), "--recordings", str(bad),
                 "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "row 3" in err and "emg" in err
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("t_s,emg\n0.0,1.0\n0.001\n")
    assert main(["metrics", "--config", str(cfg), "--recordings", str(ragged),
                 "--out", str(tmp_path)]) == 2


# -- round trips -----------------------------------------------------------------

def test_csv_floats_round_trip_exactly(tmp_path):
    rng = np.random.default_rng(0)
    cols = {"a": rng.normal(size=50) * 1e-7, "b": rng.normal(size=50) * 1e9}
    records.write_columns(tmp_path / "x.csv", cols)
    back = records.read_columns(tmp_path / "x.csv")
    assert all(np.array_equal(back[k], cols[k]) for k in cols)


def test_regression_json_round_trip(tmp_path):
    reg = DirectionalRegression(0.05003, 0.01, 0.02449, -0.02, 0.998, 0.995)
    records.write_json(tmp_path / "r.json", reg.to_dict())
    assert DirectionalRegression.from_dict(records.read_json(tmp_path / "r.json")) == reg
