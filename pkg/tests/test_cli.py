import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from demon_fridge import cli
from demon_fridge.config import ConfigError, ExperimentConfig, load_config, parse_overrides

FT_THERMAL = {"mode": "thermal", "beta1": 5.0, "beta2": 1.2, "n_max": 4, "dt": 0.05,
              "tau": 0.15, "ensemble_size": 20000, "master_seed": 1}
FT_SQUEEZED = dict(FT_THERMAL, mode="squeezed", r1=0.3, r2=0.5, theta=np.pi / 3, n_max=6, tau=0.1,
                   ensemble_size=50000)


def _config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_overrides_parse_json_values():
    assert parse_overrides(["beta1=3", "mode=squeezed", "initial_state=gibbs:1.0"]) == {
        "beta1": 3, "mode": "squeezed", "initial_state": "gibbs:1.0"}
    with pytest.raises(ConfigError):
        parse_overrides(["beta1"])


def test_config_validation(tmp_path):
    cfg = load_config(_config(tmp_path, {"beta1": 4.0}), ["n_max=8"])
    assert cfg.beta1 == 4.0 and cfg.n_max == 8 and cfg.n_steps == 200
    for bad in (["tau=0.105", "dt=0.01"], ["mode=hot"], ["ensemble_size=0"], ["nope=1"],
                ["initial_state=thermal"], ["n_max=2.5"], ["steps=7"]):
        with pytest.raises(ConfigError):
            load_config(None, bad)
    with pytest.raises(ConfigError):
        ExperimentConfig(beta1=1.0, beta2=2.0).reservoir()


def test_steady_thermal(tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["steady", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert abs(rep["mu"] - 3.8) < 1e-15
    assert abs(rep["mean_number"] - 0.02288267495708944) < 1e-12
    assert rep["fixed_point_residual"] < 1e-10


def test_steady_single_squeezed_reservoir_is_diagonal(tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["steady", "--set", "mode=squeezed", "--set", "r2=0.5", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["r"] == 0.0
    assert rep["max_offdiagonal"] == 0.0


def test_steady_degenerate_and_domain_errors(tmp_path, capsys):
    out = str(tmp_path / "s.json")
    assert cli.main(["steady", "--set", "beta1=1.2", "--out", out]) == 2
    assert "DegenerateError" in capsys.readouterr().err
    assert cli.main(["steady", "--set", "mode=squeezed", "--set", "r1=0.95", "--set", "r2=0.5",
                     "--out", out]) == 2
    assert "DomainError" in capsys.readouterr().err
    assert cli.main(["steady", "--config", str(tmp_path / "missing.json"), "--out", out]) == 2


def test_missing_output_path():
    assert cli.main(["steady"]) == 2


def test_ft_check_thermal(tmp_path):
    out = tmp_path / "ft.json"
    assert cli.main(["ft-check", "--config", _config(tmp_path, FT_THERMAL), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"]
    assert rep["oracle"]["detailed_residual"] < 1e-10
    assert rep["split"]["max_abs_s_ad"] == 0.0


def test_ft_check_squeezed(tmp_path):
    out = tmp_path / "ft.json"
    assert cli.main(["ft-check", "--config", _config(tmp_path, FT_SQUEEZED), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["oracle"]["detailed_residual"] < 1e-8


def test_ft_check_fault_injection(tmp_path):
    out = tmp_path / "ft.json"
    cfg = _config(tmp_path, dict(FT_THERMAL, ensemble_size=1000))
    assert cli.main(["ft-check", "--config", cfg, "--inject-fault", "--out", str(out)]) == 3
    rep = json.loads(out.read_text())
    assert not rep["passed"] and rep["fault_injected"]


def test_ft_check_scale_error(tmp_path):
    out = str(tmp_path / "ft.json")
    assert cli.main(["ft-check", "--set", "n_max=20", "--set", "dt=0.01", "--set", "tau=0.12",
                     "--out", out]) == 2


def test_sweep_preset_a(tmp_path):
    out = tmp_path / "a.csv"
    assert cli.main(["sweep", "--preset", "a", "--out", str(out)]) == 0
    rows = _rows(out)
    assert list(rows[0]) == list(cli.SWEEP_COLUMNS)
    first = rows[0]
    assert abs(float(first["mu_star"]) - 3.8) < 1e-12
    for col in ("delta_S_sq", "delta_E_sq", "delta_A_M", "e_max_star"):
        assert abs(float(first[col])) < 1e-12
    minus_ds = [-float(r["delta_S_sq"]) for r in rows]
    assert min(minus_ds) >= -1e-15
    assert np.all(np.diff(minus_ds) >= -1e-15)


def test_sweep_preset_b_flags_invalid_rows(tmp_path):
    out = tmp_path / "b.csv"
    assert cli.main(["sweep", "--preset", "b", "--out", str(out)]) == 0
    rows = _rows(out)
    valid = [r for r in rows if r["domain_valid"] == "true"]
    invalid = [r for r in rows if r["domain_valid"] == "false"]
    assert valid and invalid
    assert all(r["mu_star"] == "" for r in invalid)
    assert all(float(r["delta_E_sq"]) <= float(r["e_max_star"]) for r in valid)


def test_sweep_explicit_grid(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["sweep", "--param", "beta1", "--grid", "1,2,3", "--out", str(out)]) == 0
    rows = _rows(out)
    assert [r["domain_valid"] for r in rows] == ["false", "true", "true"]
    assert cli.main(["sweep", "--param", "r1", "--out", str(out)]) == 2
    assert cli.main(["sweep", "--preset", "a", "--param", "r1", "--out", str(out)]) == 2


def test_csv_float_format():
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert cli.fmt(np.int64(3)) == "3"
    assert cli.fmt(True) == "true"
    x = np.random.default_rng(0).normal()
    assert float(cli.fmt(x)) == x


def test_trajectories_outputs(tmp_path):
    out = tmp_path / "t.csv"
    args = ["trajectories", "--set", "ensemble_size=2000", "--set", "n_max=20", "--out", str(out)]
    assert cli.main(args) == 0
    rows = _rows(out)
    assert list(rows[0]) == list(cli.TRAJECTORY_COLUMNS)
    assert len(rows) == 2000
    assert all(float(r["s_ad"]) == 0.0 for r in rows)
    summary = json.loads((tmp_path / "t.json").read_text())
    assert summary["size"] == 2000
    assert abs(summary["ift_tot"] - 1) <= max(3 * summary["ift_tot_se"], 1e-12)


def test_trajectories_deterministic_across_workers(tmp_path, monkeypatch):
    outs = []
    for workers in ("1", "2"):
        monkeypatch.setenv("DEMON_FRIDGE_WORKERS", workers)
        out = tmp_path / f"t{workers}.csv"
        assert cli.main(["trajectories", "--set", "ensemble_size=2100", "--set", "n_max=12",
                         "--set", "initial_state=gibbs:1.0", "--set", "master_seed=5",
                         "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.json"
    proc = subprocess.run([sys.executable, "-m", "demon_fridge", "steady", "--set", "n_max=10",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["n_max"] == 10
