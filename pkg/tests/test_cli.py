import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from darsim.cli import EXIT_CONFIG, EXIT_DOMAIN, main
from darsim.resonator import REGION_A, REGION_B, REGION_C
from darsim.stats import bootstrap_cohens_d_paired, permutation_ttest_paired


def write_config(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def invoke(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 else None), err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


LCD_SIM = {
    "element": {"kind": "lcd", "u_th": 0.5, "tau": 0.001},
    "signal": {"f_s": 2.0, "u_high": 0.2},
    "carrier": {"kind": "triangle", "amplitude": 0.45, "f_t": 80},
    "duration": 2.0,
    "sample_rate_hz": 40000,
}


# -- predict -------------------------------------------------------------------


def test_predict_lcd(tmp_path, capsys):
    code, out, _ = invoke(capsys, "predict", write_config(tmp_path, {"kind": "lcd", "f_t": 80, "tau": 0.001}))
    assert code == 0
    assert out["level"] == pytest.approx(0.08)


def test_predict_comparator(tmp_path, capsys):
    cfg = {"kind": "comparator", "f_t": 80, "u_s": 0.2, "u_t": 1, "u_th": 0.5, "u_h": 1}
    code, out, _ = invoke(capsys, "predict", write_config(tmp_path, cfg))
    assert code == 0
    assert out["level"] == pytest.approx(0.7)
    assert out["t_h"] == pytest.approx(0.00875)
    assert out["region"] == REGION_B
    assert out["config"]["tau"] == 0.001


def test_predict_region_a_exits_3(tmp_path, capsys):
    cfg = {"kind": "comparator", "f_t": 80, "u_s": 0.2, "u_t": 0.2, "u_th": 0.5}
    code, _, err = invoke(capsys, "predict", write_config(tmp_path, cfg))
    assert code == EXIT_DOMAIN
    assert "U_s + U_t < U_th" in err


def test_unknown_key_and_bad_json_exit_2(tmp_path, capsys):
    code, _, _ = invoke(capsys, "predict", write_config(tmp_path, {"kind": "lcd", "f_t": 80, "bogus": 1}))
    assert code == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert invoke(capsys, "predict", str(bad))[0] == EXIT_CONFIG
    assert invoke(capsys, "predict", str(tmp_path / "missing.json"))[0] == EXIT_CONFIG


# -- simulate ------------------------------------------------------------------


def test_simulate_lcd_matches_prediction(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, _ = invoke(capsys, "simulate", write_config(tmp_path, LCD_SIM), "--out", str(out_dir))
    assert code == 0
    assert out["region"] == REGION_B
    assert out["relative_error"] <= 0.01
    rows = read_csv(out_dir / "trace.csv")
    assert list(rows[0]) == ["time", "input", "te_output", "smoothed"]
    assert len(rows) == out["n_samples"] == 80000
    echoed = json.loads((out_dir / "simulate_config.json").read_text())
    assert echoed["lowpass"] == {"carrier_periods": 4, "seconds": None}


def test_simulate_zero_carrier_is_silent(tmp_path, capsys):
    cfg = dict(LCD_SIM, carrier={"kind": "triangle", "amplitude": 0.0, "f_t": 80})
    code, _, _ = invoke(capsys, "simulate", write_config(tmp_path, cfg), "--out", str(tmp_path / "o"))
    assert code == 0
    rows = read_csv(tmp_path / "o" / "trace.csv")
    assert all(float(r["te_output"]) == 0 and float(r["smoothed"]) == 0 for r in rows)


def test_simulate_json_format_and_env_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DARSIM_OUTPUT_DIR", str(tmp_path / "env"))
    cfg = dict(LCD_SIM, duration=0.5)
    code, _, _ = invoke(capsys, "simulate", write_config(tmp_path, cfg), "--format", "json")
    assert code == 0
    table = json.loads((tmp_path / "env" / "trace.json").read_text())
    assert set(table[0]) == {"time", "input", "te_output", "smoothed"}


def test_simulate_byte_identical_and_echo_reproduces(tmp_path, capsys):
    cfg = dict(LCD_SIM, carrier={"kind": "gaussian_noise", "amplitude": 0.3}, duration=1.0)
    path = write_config(tmp_path, cfg)
    for d in ("a", "b"):
        assert invoke(capsys, "simulate", path, "--seed", "11", "--out", str(tmp_path / d))[0] == 0
    echoed = str(tmp_path / "a" / "simulate_config.json")
    assert invoke(capsys, "simulate", echoed, "--out", str(tmp_path / "c"))[0] == 0
    for name in ("trace.csv", "simulate_summary.json", "simulate_config.json"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
        assert a == (tmp_path / "c" / name).read_bytes()


# -- sweep ---------------------------------------------------------------------


def test_sweep_region_column(tmp_path, capsys):
    grid = [0.1, 0.2, 0.4, 0.5, 0.8, 1.2]
    cfg = dict(LCD_SIM, duration=10.0, signal={"f_s": 1.0, "u_high": 0.2}, sample_rate_hz=20000,
               sweep={"carrier_kind": "triangle", "u_t_grid": grid})
    code, out, _ = invoke(capsys, "sweep", write_config(tmp_path, cfg), "--out", str(tmp_path / "o"))
    assert code == 0
    rows = read_csv(tmp_path / "o" / "sweep.csv")
    assert [r["region"] for r in rows] == [REGION_A, REGION_A, REGION_B, REGION_B, REGION_C, REGION_C]
    assert [float(r["u_t"]) for r in rows] == grid


def test_noise_sweep_snr_finite(tmp_path, capsys):
    cfg = {
        "element": {"kind": "comparator", "u_th": 0.5},
        "signal": {"f_s": 1.0, "u_high": 0.2},
        "carrier": {"kind": "gaussian_noise", "f_t": 80},
        "duration": 10.0,
        "sweep": {"carrier_kind": "gaussian_noise", "u_t_grid": [0.2, 0.5, 1.0], "repeats": 10, "seeds": [3]},
    }
    code, _, _ = invoke(capsys, "sweep", write_config(tmp_path, cfg), "--out", str(tmp_path / "o"))
    assert code == 0
    snr = [float(r["snr_db"]) for r in read_csv(tmp_path / "o" / "sweep.csv")]
    assert all(np.isfinite(snr)) and max(snr) < 150


def test_sweep_empty_grid_exits_2(tmp_path, capsys):
    cfg = dict(LCD_SIM, sweep={"u_t_grid": []})
    assert invoke(capsys, "sweep", write_config(tmp_path, cfg), "--out", str(tmp_path / "o"))[0] == EXIT_CONFIG


# -- quest ---------------------------------------------------------------------


def test_quest_default_design_has_320_rows(tmp_path, capsys):
    code, out, _ = invoke(capsys, "quest", write_config(tmp_path, {"observer": {"kind": "resonator"}}),
                          "--out", str(tmp_path / "o"))
    assert code == 0
    rows = read_csv(tmp_path / "o" / "trials.csv")
    assert len(rows) == 320 == out["n_trials"]
    assert out["config"]["design"]["conditions"] == [0.0, 0.375, 0.5, 0.75]
    assert out["mean_modulation_percent"][0] == 0.0


def test_quest_weibull_recovers_threshold(tmp_path, capsys):
    cfg = {"observer": {"kind": "weibull", "true_threshold": 0.3}, "n_sessions": 30, "seed": 1}
    code, out, _ = invoke(capsys, "quest", write_config(tmp_path, cfg), "--out", str(tmp_path / "o"))
    assert code == 0
    assert np.mean(out["mean_vct"]) == pytest.approx(0.3, abs=0.05)


def test_quest_missing_observer_exits_2(tmp_path, capsys):
    assert invoke(capsys, "quest", write_config(tmp_path, {"n_sessions": 2}))[0] == EXIT_CONFIG


# -- analyze -------------------------------------------------------------------


def write_pairs(tmp_path, c, t, name="pairs.csv"):
    path = tmp_path / name
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["control", "test"])
        w.writerows(zip(c, t))
    return path


def test_analyze_identical_columns(tmp_path, capsys):
    x = np.random.default_rng(0).normal(size=20)
    write_pairs(tmp_path, x, x)
    cfg = {"input": "pairs.csv", "control": "control", "test": "test", "n_reshuffles": 2000, "n_bootstrap": 500}
    code, out, _ = invoke(capsys, "analyze", write_config(tmp_path, cfg))
    assert code == 0
    assert out["p_value"] >= 0.99
    assert out["cohens_d"] == 0


def test_analyze_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(1)
    c = rng.normal(size=30)
    t = c + 0.7 + rng.normal(size=30)
    write_pairs(tmp_path, c, t)
    cfg = {"input": "pairs.csv", "control": "control", "test": "test",
           "n_reshuffles": 3000, "n_bootstrap": 1000, "seed": 4}
    code, out, _ = invoke(capsys, "analyze", write_config(tmp_path, cfg))
    assert code == 0
    perm = permutation_ttest_paired(c, t, 3000, seed=4)
    eff = bootstrap_cohens_d_paired(c, t, 1000, seed=4)
    assert out["p_value"] == perm.p_value
    assert out["cohens_d"] == pytest.approx(eff.cohens_d, rel=1e-12)
    assert out["ci_low"] == pytest.approx(eff.ci_low, rel=1e-12)
    assert out["ci_high"] == pytest.approx(eff.ci_high, rel=1e-12)


def test_analyze_malformed_csv(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("control,test\n1,2\n3,oops\n4,5\n")
    cfg = {"input": "bad.csv", "control": "control", "test": "test"}
    code, _, err = invoke(capsys, "analyze", write_config(tmp_path, cfg))
    assert code == EXIT_CONFIG
    assert "row 3" in err and "'test'" in err
    cfg["test"] = "missing"
    code, _, err = invoke(capsys, "analyze", write_config(tmp_path, cfg))
    assert code == EXIT_CONFIG and "missing" in err


def test_analyze_constant_shift_is_domain_error(tmp_path, capsys):
    x = np.arange(10.0)
    write_pairs(tmp_path, x, x + 1)
    cfg = {"input": "pairs.csv", "control": "control", "test": "test", "n_reshuffles": 100, "n_bootstrap": 100}
    assert invoke(capsys, "analyze", write_config(tmp_path, cfg))[0] == EXIT_DOMAIN


def test_console_entry_point(tmp_path):
    path = write_config(tmp_path, {"kind": "lcd", "f_t": 80, "tau": 0.001})
    res = subprocess.run([sys.executable, "-m", "darsim.cli", "predict", path], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["level"] == pytest.approx(0.08)
