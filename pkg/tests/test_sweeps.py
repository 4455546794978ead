"""Scenario runner: determinism, resume, workers, exports, CLI exit codes."""

import json
import math
import os

import numpy as np
import pytest

from cavitychain import parse_config_text, run_scenario, export_dataset
from cavitychain.cli import main as cli_main
from cavitychain.fluctuations import GeneralizedModes
from cavitychain.sweeps import match_rates

SMALL = """
kappa = 0.2 MHz
wavelength = 369 nm
ion_mass = 174 u
trap_freq = 100 kHz
cavity_detuning = -8.5 kappa
dispersive_shift = 0.5 kappa
pump_strength = 100 kappa
n_ions = 5
sweep_min = 1 kappa
sweep_max = 300 kappa
sweep_count = 12
spectrum_count = 40
"""

KINK_SMALL = SMALL + """
scenario = kink
trap_freq = 700 kHz
cavity_detuning = -1.8 kappa
pump_strength = 200 kappa
kink_eta = 200 kappa
scan_delta_min = -1.2 kappa
scan_delta_max = -4.2 kappa
scan_count = 16
"""


def _cfg(text, **over):
    return parse_config_text(text, over)


def test_equilibrium_scenario_tables():
    ds = run_scenario(_cfg(SMALL, scenario="equilibrium"))
    t = ds.tables["equilibrium_branch"]
    assert t["columns"][:4] == ["delta_c", "eta", "j", "theta_j"]
    assert len(t["rows"]) == 12 * 5
    assert len(ds.tables["transition"]["rows"]) == 1
    assert ds.tables["modes"]["rows"], "modes table should be present"
    assert ds.metadata["n_failed"] == 0


def test_resonance_scenario_tables_and_spectrum():
    ds = run_scenario(_cfg(SMALL))
    assert ds.metadata["resonance_found"] is True
    assert len(ds.tables["steady_state"]["rows"]) == 12 * 5
    res = ds.tables["resonance"]["rows"][0]
    assert res[2] == "ok"
    spec = ds.tables["spectrum"]
    nus = [float(r[2]) for r in spec["rows"]]
    assert all(abs(v) > 1e-12 for v in nus), "zero-frequency line excluded"
    svals = [float(r[3]) for r in spec["rows"]]
    assert all(v >= 0 for v in svals)
    gam = ds.tables["steady_state"]["columns"].index("gamma_rate")
    assert any(math.isnan(row[gam]) for row in ds.tables["steady_state"]["rows"]), \
        "decoupled modes should carry nan damping rates"


def test_map_scenario_with_workers_matches_serial(tmp_path):
    cfg = _cfg(SMALL, scenario="map", sweep_count=6, map_delta_count=3)
    a = run_scenario(cfg, workers=1)
    b = run_scenario(cfg, workers=2)
    assert a.tables["cooling_map"]["rows"] == b.tables["cooling_map"]["rows"]
    cols = a.tables["cooling_map"]["columns"]
    assert cols == ["delta_c", "eta", "mean_n", "n_coupled_modes", "phase",
                    "eta_critical_row", "status"]


def test_map_resume_uses_cache(tmp_path):
    cfg = _cfg(SMALL, scenario="map", sweep_count=6, map_delta_count=3)
    cache = str(tmp_path / "cache")
    a = run_scenario(cfg, cache_dir=cache)
    row_files = []
    for root, _, files in os.walk(cache):
        row_files += [os.path.join(root, f) for f in files]
    assert len(row_files) == 3
    # poison one cached row; the rerun must trust the cache, not recompute
    with open(row_files[0]) as fh:
        row = json.load(fh)
    row["eta_critical"] = 123.456
    with open(row_files[0], "w") as fh:
        json.dump(row, fh)
    b = run_scenario(cfg, cache_dir=cache)
    cols = b.tables["cooling_map"]["columns"].index("eta_critical_row")
    assert any(r[cols] == 123.456 for r in b.tables["cooling_map"]["rows"])


def test_csv_export_deterministic(tmp_path):
    cfg = _cfg(SMALL, scenario="equilibrium", sweep_count=8)
    d1, d2 = tmp_path / "a", tmp_path / "b"
    export_dataset(run_scenario(cfg), d1)
    export_dataset(run_scenario(cfg), d2)
    for name in ("equilibrium_branch", "transition", "modes"):
        b1 = (d1 / f"{name}.csv").read_bytes()
        b2 = (d2 / f"{name}.csv").read_bytes()
        assert b1 == b2
    meta = json.loads((d1 / "metadata.json").read_text())
    assert meta["config_hash"] == cfg.config_hash()
    assert "finished_at" in meta and "code_version" in meta


def test_json_export_round_trips(tmp_path):
    cfg = _cfg(SMALL, scenario="equilibrium", sweep_count=6)
    paths = export_dataset(run_scenario(cfg), tmp_path, fmt="json")
    data = json.loads((tmp_path / "equilibrium_branch.json").read_text())
    assert data["columns"][0] == "delta_c"
    assert float(data["rows"][0][0]) == -8.5
    assert any(str(p).endswith("metadata.json") for p in paths)


def test_seventeen_digit_round_trip(tmp_path):
    cfg = _cfg(SMALL, scenario="equilibrium", sweep_count=6)
    ds = run_scenario(cfg)
    export_dataset(ds, tmp_path)
    lines = (tmp_path / "equilibrium_branch.csv").read_text().splitlines()
    cols = lines[0].split(",")
    ti = cols.index("theta_j")
    written = [float(ln.split(",")[ti]) for ln in lines[1:]]
    original = [row[ti] for row in ds.tables["equilibrium_branch"]["rows"]]
    assert written == original, "formatted floats must round-trip exactly"


def test_scaling_scenario_small_sizes():
    cfg = _cfg(SMALL, scenario="scaling", scaling_sizes="3,5")
    ds = run_scenario(cfg)
    rows = ds.tables["scaling"]["rows"]
    assert [r[0] for r in rows] == [3, 5]
    assert all(r[-1] == "ok" for r in rows)
    # softened trap: omega_t scales as sqrt(ln N)/N relative to N = 11
    t3 = rows[0][1]
    expect = 0.5 * (math.sqrt(math.log(3)) / 3) / (math.sqrt(math.log(11)) / 11)
    assert t3 == pytest.approx(expect, rel=1e-9)


def test_kink_scenario_tables():
    ds = run_scenario(_cfg(KINK_SMALL))
    assert set(ds.tables) >= {"kink_branch", "kink_scan", "modes", "spectrum"}
    scan = ds.tables["kink_scan"]
    pi = scan["columns"].index("phase")
    ki = scan["columns"].index("n_kink")
    si = scan["columns"].index("status")
    for r in scan["rows"]:
        assert r[si] in ("ok", "decoupled-modes-excluded", "branch-jump-flagged")
        if r[pi] == "Pinned" and r[si] == "ok":
            assert math.isfinite(r[ki])
    branch = ds.tables["kink_branch"]
    eni = branch["columns"].index("en_all")
    assert all(r[eni] >= 0 for r in branch["rows"] if not math.isnan(r[eni]))


def test_match_rates_greedy_bijection():
    char = np.array([[0.9, 0.05, 0.05],
                     [0.1, 0.8, 0.1],
                     [0.2, 0.1, 0.7]])
    gen = GeneralizedModes(eigenvalues=np.zeros(6), pairs=((0, 1), (2, 3), (4, 5)),
                           rates=np.array([1.8, 0.15, 0.05]),
                           freqs=np.array([8.0, 2.0, 3.0]),
                           eigenvector_matrix=np.eye(6), character=char)
    out = match_rates(gen, kept=[0, 2], n_modes=4)
    assert out[0] == pytest.approx(0.15)
    assert out[2] == pytest.approx(0.05)
    assert math.isnan(out[1]) and math.isnan(out[3])


def test_cli_exit_codes(tmp_path):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text(SMALL + "scenario = equilibrium\nsweep_count = 6\n")
    out = tmp_path / "out"
    assert cli_main(["equilibrium", "--config", str(cfg_path),
                     "--out", str(out)]) == 0
    assert (out / "equilibrium_branch.csv").exists()
    assert cli_main(["validate-config", "--config", str(cfg_path)]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 12 furlong\n")
    assert cli_main(["equilibrium", "--config", str(bad),
                     "--out", str(out)]) == 2
    assert cli_main(["equilibrium", "--config", str(tmp_path / "missing.cfg"),
                     "--out", str(out)]) == 2


def test_cli_partial_failure_exit_code(tmp_path, monkeypatch):
    import cavitychain.sweeps as sweeps

    def failing(params, init):
        raise sweeps.ConvergenceError("forced")
    monkeypatch.setattr(sweeps, "solve_equilibrium", failing)
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text(SMALL + "scenario = equilibrium\nsweep_count = 6\n")
    code = cli_main(["equilibrium", "--config", str(cfg_path),
                     "--out", str(tmp_path / "o")])
    assert code == 3


def test_cli_preset_with_config_overlay(tmp_path):
    over = tmp_path / "over.cfg"
    over.write_text("sweep_count = 6\nn_ions = 3\nscenario = equilibrium\n")
    out = tmp_path / "out"
    assert cli_main(["equilibrium", "--preset", "cooling", "--config", str(over),
                     "--out", str(out)]) == 0
    lines = (out / "equilibrium_branch.csv").read_text().splitlines()
    assert len(lines) == 1 + 6 * 3
