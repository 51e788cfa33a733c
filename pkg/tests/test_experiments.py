import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from toricquant import ConfigError
from toricquant.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from toricquant.experiments import COMMANDS, RUNNERS, ExperimentConfig, fit_rate, run_study

BASE = {"u0": "fubini_study", "g": [0.0, 0.0, 0.5], "flavor": "adjoint", "k_list": [4, 8, 16],
        "t_grid": [0.0, 0.5, 1.0], "symbols": ["x", "sin_pi_x"], "limit_grid": 20000}


def _cfg(**kw):
    raw = dict(BASE)
    raw.update(kw)
    return ExperimentConfig.from_dict(raw)


def _write(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return p


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("patch", [
    {"k_list": []},
    {"k_list": [8, 4]},
    {"k_list": [1, 2]},
    {"k_list": [4.5]},
    {"flavor": "both"},
    {"t_grid": [1.5]},
    {"symbols": ["nope"]},
    {"u1": "fubini_study"},
    {"bogus": 1},
    {"g": [0.0, 0.0, -9.0]},
    {"workers": 0},
    {"bridge": {"enabled": True, "x": 1}},
    {"quadrature": {"nodes": 5}},
])
def test_config_errors(patch):
    with pytest.raises(ConfigError):
        _cfg(**patch)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)


def test_hash_ignores_workers():
    a, b = _cfg(), _cfg(workers=3)
    assert a.config_hash == b.config_hash and len(a.config_hash) == 16
    assert _cfg(k_list=[4, 8]).config_hash != a.config_hash


def test_fit_rate_examples():
    ks = [8, 16, 32, 64, 128, 256]
    slope, intercept, res = fit_rate([(k, 3.0 / k) for k in ks])
    assert slope == pytest.approx(-1.0, abs=1e-12) and intercept == pytest.approx(math.log(3.0))
    assert res <= 1e-12
    slope, _, _ = fit_rate([(k, 2.0 * math.log(k) / k) for k in ks])
    assert -1.0 < slope < -0.7
    assert fit_rate([(k, 0.4) for k in ks])[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_rate([(8, 1.0), (16, 0.0), (32, 1.0)])
    with pytest.raises(ValueError):
        fit_rate([(8, 1.0), (16, 0.5)])


def test_translation_study(tmp_path):
    cfg = _cfg(g=[0.7], flavor="hilb", k_list=[4, 8, 16])
    res = run_study(cfg, tmp_path, plots=False)
    assert res.errors == 0
    for row in _read_csv(res.out_dir / "results.csv"):
        assert float(row["w1"]) <= 1e-10
        assert float(row["geodesic_distance"]) == pytest.approx(0.7, abs=1e-10)
        assert float(row["z_over_kd"]) == pytest.approx(0.7, abs=1e-10)


def test_still_study(tmp_path):
    cfg = _cfg(g=[0.0], k_list=[4, 8, 16])
    rows = _read_csv(run_study(cfg, tmp_path, plots=False).out_dir / "results.csv")
    for row in rows:
        for key in ("w1", "geodesic_distance", "z_over_kd", "nu_m1", "nu_m2", "pinch_min", "pinch_max"):
            assert float(row[key]) == 0.0


def test_nonlinear_study(tmp_path):
    cfg = _cfg(k_list=[8, 16, 32, 64, 128], t_grid=[0.5], symbols=["x"], limit_grid=100000)
    res = run_study(cfg, tmp_path, plots=True)
    rows = _read_csv(res.out_dir / "results.csv")
    w1 = [float(r["w1"]) for r in rows]
    assert np.all(np.diff(w1) < 0)
    rates = {r["quantity"]: float(r["slope"]) for r in _read_csv(res.out_dir / "rates.csv")}
    assert rates["w1"] < -0.8
    assert "w1_vs_k.svg" in res.files and (res.out_dir / "w1_vs_k.svg").exists()


def test_cache_and_force(tmp_path):
    cfg = _cfg(k_list=[4, 8])
    first = RUNNERS["geodesic"](cfg, tmp_path)
    assert not first.cached
    stamp = (first.out_dir / "spectra.csv").stat().st_mtime_ns
    again = RUNNERS["geodesic"](cfg, tmp_path)
    assert again.cached and (first.out_dir / "spectra.csv").stat().st_mtime_ns == stamp
    forced = RUNNERS["geodesic"](cfg, tmp_path, force=True)
    assert not forced.cached


def test_deterministic_outputs(tmp_path):
    cfg = _cfg(k_list=[4, 8, 16])
    a = run_study(cfg, tmp_path / "a")
    b = run_study(cfg, tmp_path / "b")
    for name in a.files:
        assert (a.out_dir / name).read_bytes() == (b.out_dir / name).read_bytes(), name


def test_workers_match_serial(tmp_path):
    serial = run_study(_cfg(k_list=[4, 8, 16]), tmp_path / "s", plots=False)
    pooled = run_study(_cfg(k_list=[4, 8, 16], workers=2), tmp_path / "p", plots=False)
    assert (serial.out_dir / "results.csv").read_bytes() == (pooled.out_dir / "results.csv").read_bytes()


@pytest.mark.parametrize("command", COMMANDS)
def test_cli_commands(tmp_path, command, capsys):
    cfg = _write(tmp_path, dict(BASE, k_list=[4, 8], t_grid=[0.0, 0.5]))
    assert main([command, "--config", str(cfg), "--out", str(tmp_path / "out")]) == EXIT_OK
    assert main([command, "--config", str(cfg), "--out", str(tmp_path / "out")]) == EXIT_OK
    assert "cached" in capsys.readouterr().out
    assert main([command, "--config", str(cfg), "--out", str(tmp_path / "out"), "--force"]) == EXIT_OK


def test_cli_exit_codes(tmp_path):
    bad = _write(tmp_path, dict(BASE, flavor="nope"), "bad.json")
    assert main(["study", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["study", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    # a bridge with c = 0 fails its convexity certificate, so every row errors
    broken = _write(tmp_path, dict(BASE, flavor="hilb", k_list=[4], bridge={"enabled": True, "a": 0.5, "c": 0.0}),
                    "broken.json")
    assert main(["study", "--config", str(broken), "--out", str(tmp_path)]) == EXIT_NUMERICAL
    rows = _read_csv(next(tmp_path.glob("*/study/results.csv")))
    assert rows[0]["status"] == "error" and "PositivityError" in rows[0]["error"]


def test_shipped_configs_parse():
    root = Path(__file__).resolve().parent.parent / "configs"
    paths = sorted(root.glob("*.json"))
    assert paths
    for p in paths:
        ExperimentConfig.load(p)
