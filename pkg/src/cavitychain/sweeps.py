"""Parameter-sweep scenarios, dataset assembly, caching, and export.

A scenario run produces a SweepDataset: named tables of plain records
plus run metadata.  Tables export deterministically (17 significant
digits, fixed row order) so repeated runs of one config are
byte-identical; volatile context (timestamps, code version, config
hash) lives in a JSON sidecar instead.

Grid points chain by continuation, so the parallel unit is a whole
row task (one cooling-map row, one chain size), farmed out over a
process pool; the parent process stays the single writer.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ModelParams, nondimensionalize, mean_photon_number
from .config import ScenarioConfig
from .equilibrium import (ConvergenceError, EquilibriumState, bare_chain_equilibrium,
                          find_transition, solve_equilibrium)
from .modes import UnstableEquilibriumError, mode_decomposition
from .fluctuations import (COUPLING_THRESHOLD, InstabilityError, build_drift_system,
                           eigen_rates, restrict_to_coupled, steady_state)
from .rates import resonance_finder, sideband_rates

__version__ = "0.1.0"

STATUS_OK = "ok"
STATUS_UNSTABLE = "unstable"
STATUS_EXCLUDED = "decoupled-modes-excluded"
STATUS_JUMP = "branch-jump-flagged"


@dataclass
class SweepDataset:
    config: ScenarioConfig
    tables: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def n_failed(self) -> int:
        count = 0
        for table in self.tables.values():
            try:
                si = table["columns"].index("status")
            except ValueError:
                continue
            count += sum(1 for row in table["rows"] if row[si] == STATUS_UNSTABLE)
        return count


def _table(columns):
    return {"columns": list(columns), "rows": []}


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


# ---------------------------------------------------------------- point solves

def _walk_branch(base: ModelParams, var: str, values):
    """Warm-started continuation along one parameter axis.

    Returns (states, statuses): a failed solve leaves None at that point
    and re-seeds the next one from the last good configuration.
    """
    th = None
    states, statuses = [], []
    for v in values:
        p = base.with_eta(float(v)) if var == "eta" else base.with_delta_c(float(v))
        seed = th if th is not None else bare_chain_equilibrium(p)
        try:
            st = solve_equilibrium(p, seed)
        except ConvergenceError:
            states.append(None)
            statuses.append(STATUS_UNSTABLE)
            continue
        th = st.phases
        states.append(st)
        statuses.append(STATUS_OK)
    return states, statuses


def _jump_flags(states) -> list:
    """Flag branch points whose potential jumps >10x the local trend."""
    flags = [False] * len(states)
    idx = [i for i, s in enumerate(states) if s is not None]
    if len(idx) < 3:
        return flags
    v = np.array([states[i].potential for i in idx])
    dv = np.abs(np.diff(v))
    for k in range(1, len(dv)):
        trend = np.median(dv[max(0, k - 3):k]) + 1e-30
        if dv[k] > 10 * trend and dv[k] > 1e-6 * abs(v[k + 1]):
            flags[idx[k + 1]] = True
    return flags


def match_rates(gen, kept, n_modes: int) -> np.ndarray:
    """Assign generalized damping rates to bare modes by eigenvector character.

    Greedy bijection on descending character weight; the leftover pair is
    the photon-like one.  Excluded and unmatched modes get nan.
    """
    out = np.full(n_modes, np.nan)
    if gen is None or len(kept) == 0:
        return out
    weights = []
    for p in range(gen.character.shape[0]):
        for i in range(len(kept)):
            weights.append((float(gen.character[p, 1 + i]), p, i))
    weights.sort(key=lambda t: -t[0])
    used_p, used_i = set(), set()
    for w, p, i in weights:
        if p in used_p or i in used_i:
            continue
        used_p.add(p)
        used_i.add(i)
        out[int(kept[i])] = float(gen.rates[p])
    return out


def _photon_pair_index(gen) -> int:
    return int(np.argmax(gen.character[:, 0]))


def _steady_point(params: ModelParams, state: EquilibriumState, nu_grid=None):
    """Mode structure + steady statistics at one branch point.

    Returns a record dict; record['status'] distinguishes drift
    instability from mere decoupled-mode exclusion.
    """
    n = params.n_ions
    rec = {"status": STATUS_OK, "mean_n": math.nan, "n_photon": math.nan,
           "n_coupled": 0, "occupations": [math.nan] * n,
           "freqs": [math.nan] * n, "chi_abs": [math.nan] * n,
           "gamma": [math.nan] * n, "en": {}, "rate_sum": math.nan,
           "mean_rate": math.nan, "delta_eff": state.delta_eff,
           "spectrum": None, "nu": None}
    try:
        dec = mode_decomposition(params, state)
        ss = steady_state(params, state, dec, nu_grid=nu_grid)
        full = build_drift_system(params, state, dec)
        sub, kept = restrict_to_coupled(full)
        gen = eigen_rates(sub)
    except (UnstableEquilibriumError, InstabilityError):
        rec["status"] = STATUS_UNSTABLE
        return rec
    kept = np.asarray(kept, dtype=int)
    occ = np.asarray(ss.occupations, dtype=float)
    rec["occupations"] = [float(x) for x in occ]
    rec["freqs"] = [float(x) for x in dec.freqs]
    rec["chi_abs"] = [float(abs(c)) for c in dec.couplings]
    rec["gamma"] = [float(g) for g in match_rates(gen, kept, n)]
    rec["n_photon"] = float(ss.photon_fluctuation_number)
    rec["n_coupled"] = int(kept.size)
    rec["mean_n"] = float(np.mean(occ[kept])) if kept.size else math.nan
    rec["en"] = {k: float(v) for k, v in ss.log_negativity.items()}
    rec["kept"] = [int(k) for k in kept]
    rec["rate_sum"] = float(gen.rate_sum())
    rates = np.delete(gen.rates, _photon_pair_index(gen))
    rec["mean_rate"] = float(np.mean(rates)) if rates.size else math.nan
    if nu_grid is not None and ss.spectrum is not None:
        rec["spectrum"] = [float(s) for s in ss.spectrum]
        rec["nu"] = [float(v) for v in ss.spectrum_grid]
    if kept.size < n:
        rec["status"] = STATUS_EXCLUDED
    return rec


def _merge_status(point_status: str, jump: bool) -> str:
    if point_status == STATUS_UNSTABLE:
        return STATUS_UNSTABLE
    if jump:
        return STATUS_JUMP
    return point_status


def _sweep_values(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.sweep_scale == "log":
        return np.geomspace(cfg.sweep_min, cfg.sweep_max, cfg.sweep_count)
    return np.linspace(cfg.sweep_min, cfg.sweep_max, cfg.sweep_count)


def _spectrum_grid(cfg: ScenarioConfig) -> np.ndarray:
    nu = np.linspace(-cfg.spectrum_max, cfg.spectrum_max, cfg.spectrum_count)
    return nu[np.abs(nu) > 1e-12]


def _continue_to_eta(base: ModelParams, eta: float, n_steps: int = 40):
    grid = np.geomspace(1.0, eta, n_steps) if eta > 1 else [eta]
    states, statuses = _walk_branch(base, "eta", grid)
    if states[-1] is None:
        raise ConvergenceError(f"continuation to eta={eta:g} failed")
    return states[-1]


def _modes_table(params: ModelParams, state: EquilibriumState):
    dec = mode_decomposition(params, state)
    t = _table(("alpha", "j", "M_jalpha", "omega_alpha"))
    n = params.n_ions
    for a in range(n):
        for j in range(n):
            t["rows"].append([a, j, float(dec.mode_matrix[j, a]),
                              float(dec.freqs[a])])
    return t


# ------------------------------------------------------------------ scenarios

def _run_equilibrium(cfg: ScenarioConfig) -> SweepDataset:
    base = nondimensionalize(cfg.physical)
    values = _sweep_values(cfg)
    states, statuses = _walk_branch(base, cfg.sweep_var, values)
    jumps = _jump_flags(states)
    branch = _table(("delta_c", "eta", "j", "theta_j", "phase", "status"))
    for v, st, s0, jp in zip(values, states, statuses, jumps):
        dc = base.delta_c if cfg.sweep_var == "eta" else float(v)
        eta = float(v) if cfg.sweep_var == "eta" else base.eta
        status = _merge_status(s0, jp)
        if st is None:
            branch["rows"].append([dc, eta, -1, math.nan, "", status])
            continue
        for j, th in enumerate(st.phases):
            branch["rows"].append([dc, eta, j, float(th),
                                   st.phase_label.value, status])
    tables = {"equilibrium_branch": branch}
    tr_tab = _table(("delta_c", "eta_critical", "lowest_mode_freq"))
    if cfg.sweep_var == "eta":
        tr = find_transition(base, eta_lo=float(values[0]), eta_hi=float(values[-1]))
        if tr is not None:
            tr_tab["rows"].append([base.delta_c, tr.eta_critical,
                                   tr.lowest_mode_freq_at_transition])
    tables["transition"] = tr_tab
    last = next((s for s in reversed(states) if s is not None), None)
    if last is not None:
        p_last = (base.with_eta(float(values[-1])) if cfg.sweep_var == "eta"
                  else base.with_delta_c(float(values[-1])))
        try:
            tables["modes"] = _modes_table(p_last, last)
        except UnstableEquilibriumError:
            pass
    return SweepDataset(config=cfg, tables=tables)


def _map_row_task(args):
    cfg, i = args
    base = nondimensionalize(cfg.physical)
    deltas = np.linspace(cfg.map_delta_min, cfg.map_delta_max, cfg.map_delta_count)
    p_row = base.with_delta_c(float(deltas[i]))
    etas = _sweep_values(cfg)
    states, statuses = _walk_branch(p_row, "eta", etas)
    jumps = _jump_flags(states)
    try:
        tr = find_transition(p_row, eta_lo=float(etas[0]), eta_hi=float(etas[-1]))
    except ConvergenceError:
        tr = None
    eta_c = tr.eta_critical if tr is not None else math.nan
    points = []
    for eta, st, s0, jp in zip(etas, states, statuses, jumps):
        if st is None:
            points.append({"eta": float(eta), "status": STATUS_UNSTABLE,
                           "mean_n": math.nan, "n_coupled": 0, "phase": ""})
            continue
        rec = _steady_point(p_row.with_eta(float(eta)), st)
        points.append({"eta": float(eta),
                       "status": _merge_status(rec["status"], jp),
                       "mean_n": rec["mean_n"], "n_coupled": rec["n_coupled"],
                       "phase": st.phase_label.value})
    return {"delta_c": float(deltas[i]), "eta_critical": float(eta_c),
            "points": points}


def _run_map(cfg: ScenarioConfig, workers: int, cache_dir) -> SweepDataset:
    rows = _run_row_tasks(cfg, _map_row_task, cfg.map_delta_count,
                          "map_row", workers, cache_dir)
    t = _table(("delta_c", "eta", "mean_n", "n_coupled_modes", "phase",
                "eta_critical_row", "status"))
    for row in rows:
        for pt in row["points"]:
            t["rows"].append([row["delta_c"], pt["eta"], pt["mean_n"],
                              pt["n_coupled"], pt["phase"],
                              row["eta_critical"], pt["status"]])
    return SweepDataset(config=cfg, tables={"cooling_map": t})


def _run_resonance(cfg: ScenarioConfig) -> SweepDataset:
    base = nondimensionalize(cfg.physical)
    values = _sweep_values(cfg)
    states, statuses = _walk_branch(base, cfg.sweep_var, values)
    jumps = _jump_flags(states)
    steady = _table(("delta_c", "eta", "alpha", "omega_alpha", "chi_abs",
                     "n_steady", "gamma_rate", "status"))
    analytic = _table(("delta_c", "eta", "alpha", "omega_alpha", "a_minus",
                       "a_plus", "w_cool", "n_analytic", "valid", "status"))
    for v, st, s0, jp in zip(values, states, statuses, jumps):
        dc = base.delta_c if cfg.sweep_var == "eta" else float(v)
        eta = float(v) if cfg.sweep_var == "eta" else base.eta
        if st is None:
            steady["rows"].append([dc, eta, -1, math.nan, math.nan, math.nan,
                                   math.nan, STATUS_UNSTABLE])
            continue
        p = base.with_eta(eta) if cfg.sweep_var == "eta" else base.with_delta_c(dc)
        rec = _steady_point(p, st)
        status = _merge_status(rec["status"], jp)
        for a in range(p.n_ions):
            steady["rows"].append([dc, eta, a, rec["freqs"][a], rec["chi_abs"][a],
                                   rec["occupations"][a], rec["gamma"][a], status])
            if rec["status"] == STATUS_UNSTABLE or rec["freqs"][a] != rec["freqs"][a]:
                continue
            sr = sideband_rates(rec["chi_abs"][a], rec["freqs"][a], rec["delta_eff"])
            analytic["rows"].append([dc, eta, a, rec["freqs"][a], sr.a_minus,
                                     sr.a_plus, sr.w_cool, sr.n_analytic,
                                     int(sr.valid), status])
    tables = {"steady_state": steady, "analytic_rates": analytic}

    res_tab = _table(("delta_c", "eta_resonance", "status"))
    v_res = resonance_finder(base, target_mode="band-mean",
                             sweep_var=cfg.sweep_var,
                             lo=float(values[0]), hi=float(values[-1]))
    found = v_res is not None
    if found:
        dc = base.delta_c if cfg.sweep_var == "eta" else float(v_res)
        eta = float(v_res) if cfg.sweep_var == "eta" else base.eta
        res_tab["rows"].append([dc, eta, STATUS_OK])
        p_res = base.with_eta(eta) if cfg.sweep_var == "eta" else base.with_delta_c(dc)
        if cfg.sweep_var == "eta":
            st_res = _continue_to_eta(p_res, eta)
        else:
            solved = [(abs(float(v) - dc), s) for v, s in zip(values, states)
                      if s is not None]
            seed = min(solved, key=lambda t: t[0])[1]
            st_res = solve_equilibrium(p_res, seed.phases)
        rec = _steady_point(p_res, st_res, nu_grid=_spectrum_grid(cfg))
        if rec["spectrum"] is not None:
            spec = _table(("delta_c", "eta", "nu", "S_nu"))
            for nu, s in zip(rec["nu"], rec["spectrum"]):
                spec["rows"].append([dc, eta, nu, s])
            tables["spectrum"] = spec
        tables["modes"] = _modes_table(p_res, st_res)
    else:
        res_tab["rows"].append([base.delta_c, math.nan, "not-found"])
    tables["resonance"] = res_tab
    ds = SweepDataset(config=cfg, tables=tables)
    ds.metadata["resonance_found"] = found
    return ds


def _scaled_physical(cfg: ScenarioConfig, n: int):
    """Trap frequency softened as sqrt(ln N)/N, anchored at N = 11."""
    ref = (math.sqrt(math.log(11.0)) / 11.0)
    scale = (math.sqrt(math.log(float(n))) / float(n)) / ref
    ph = cfg.physical
    return replace(ph, n_ions=n, trap_freq=ph.trap_freq * scale)


def _depth(params: ModelParams, state: EquilibriumState) -> float:
    return params.u0 * mean_photon_number(params, state.phases)


def _eta_for_depth(base: ModelParams, target: float, eta_hi: float = 400.0):
    """Pump strength whose pinned-branch well depth u0*nbar matches target."""
    grid = np.geomspace(1.0, eta_hi, 40)
    states, _ = _walk_branch(base, "eta", grid)
    depths = [math.nan if s is None else _depth(base.with_eta(float(g)), s)
              for g, s in zip(grid, states)]
    lo = hi = None
    for k in range(1, len(grid)):
        if (not math.isnan(depths[k - 1]) and not math.isnan(depths[k])
                and (depths[k - 1] - target) * (depths[k] - target) <= 0):
            lo, hi, st = grid[k - 1], grid[k], states[k - 1]
            break
    if lo is None:
        raise ConvergenceError("depth target outside the swept range")
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        pm = base.with_eta(mid)
        sm = solve_equilibrium(pm, st.phases)
        if (_depth(pm, sm) - target) * (depths[k] - target) <= 0:
            lo, st = mid, sm
        else:
            hi = mid
        if (hi - lo) / lo < 1e-3:
            break
    return 0.5 * (lo + hi)


def _scaling_task(args):
    cfg, i = args
    n = int(cfg.scaling_sizes[i])
    base = nondimensionalize(_scaled_physical(cfg, n))
    eta_target = base.eta
    if cfg.scaling_fixed == "depth":
        anchor = nondimensionalize(_scaled_physical(cfg, 11))
        st_a = _continue_to_eta(anchor, anchor.eta, n_steps=80)
        eta_target = _eta_for_depth(base, _depth(anchor, st_a))
    try:
        st = _continue_to_eta(base, eta_target, n_steps=80)
    except ConvergenceError:
        return {"n_ions": n, "trap_freq": base.omega_t, "delta_c": base.delta_c,
                "eta": float(eta_target), "mean_n": math.nan, "mean_rate": math.nan,
                "n_coupled": 0, "status": STATUS_UNSTABLE}
    rec = _steady_point(base.with_eta(eta_target), st)
    return {"n_ions": n, "trap_freq": base.omega_t, "delta_c": base.delta_c,
            "eta": float(eta_target), "mean_n": rec["mean_n"],
            "mean_rate": rec["mean_rate"], "n_coupled": rec["n_coupled"],
            "status": rec["status"]}


def _run_scaling(cfg: ScenarioConfig, workers: int, cache_dir) -> SweepDataset:
    rows = _run_row_tasks(cfg, _scaling_task, len(cfg.scaling_sizes),
                          "scaling", workers, cache_dir)
    t = _table(("n_ions", "trap_freq", "delta_c", "eta", "mean_n", "mean_rate",
                "n_coupled_modes", "status"))
    for r in rows:
        t["rows"].append([r["n_ions"], r["trap_freq"], r["delta_c"], r["eta"],
                          r["mean_n"], r["mean_rate"], r["n_coupled"], r["status"]])
    return SweepDataset(config=cfg, tables={"scaling": t})


def _run_kink(cfg: ScenarioConfig) -> SweepDataset:
    base = nondimensionalize(cfg.physical)
    etas = _sweep_values(cfg)
    states, statuses = _walk_branch(base, "eta", etas)
    jumps = _jump_flags(states)
    branch = _table(("delta_c", "eta", "n_kink", "n_min_index", "en_kink",
                     "en_all", "phase", "status"))
    for eta, st, s0, jp in zip(etas, states, statuses, jumps):
        if st is None:
            branch["rows"].append([base.delta_c, float(eta), math.nan, -1,
                                   math.nan, math.nan, "", STATUS_UNSTABLE])
            continue
        rec = _steady_point(base.with_eta(float(eta)), st)
        status = _merge_status(rec["status"], jp)
        if rec["status"] == STATUS_UNSTABLE or not rec.get("kept"):
            branch["rows"].append([base.delta_c, float(eta), math.nan, -1,
                                   math.nan, math.nan, st.phase_label.value, status])
            continue
        kink = rec["kept"][0]
        occ_kept = [rec["occupations"][k] for k in rec["kept"]]
        n_min_index = rec["kept"][int(np.argmin(occ_kept))]
        branch["rows"].append([base.delta_c, float(eta),
                               rec["occupations"][kink], n_min_index,
                               rec["en"].get(f"cavity-vs-mode-{kink}", math.nan),
                               rec["en"].get("cavity-vs-all", math.nan),
                               st.phase_label.value, status])
    tables = {"kink_branch": branch}

    st200 = _continue_to_eta(base, cfg.kink_eta)
    tables["modes"] = _modes_table(base.with_eta(cfg.kink_eta), st200)

    deltas = np.linspace(cfg.scan_delta_min, cfg.scan_delta_max, cfg.scan_count)
    p_scan = base.with_eta(cfg.kink_eta)
    start = _continue_to_eta(base.with_delta_c(float(deltas[0])), cfg.kink_eta)
    scan_states, scan_statuses = [], []
    th = start.phases
    for dc in deltas:
        p = p_scan.with_delta_c(float(dc))
        try:
            st = solve_equilibrium(p, th)
        except ConvergenceError:
            scan_states.append(None)
            scan_statuses.append(STATUS_UNSTABLE)
            continue
        th = st.phases
        scan_states.append(st)
        scan_statuses.append(STATUS_OK)
    scan_jumps = _jump_flags(scan_states)
    scan = _table(("delta_c", "eta", "n_photon", "n_kink", "mean_n",
                   "n_coupled_modes", "phase", "status"))
    best = None
    for dc, st, s0, jp in zip(deltas, scan_states, scan_statuses, scan_jumps):
        if st is None:
            scan["rows"].append([float(dc), cfg.kink_eta, math.nan, math.nan,
                                 math.nan, 0, "", STATUS_UNSTABLE])
            continue
        rec = _steady_point(p_scan.with_delta_c(float(dc)), st)
        status = _merge_status(rec["status"], jp)
        if rec["status"] == STATUS_UNSTABLE or not rec.get("kept"):
            scan["rows"].append([float(dc), cfg.kink_eta, math.nan, math.nan,
                                 math.nan, rec["n_coupled"],
                                 st.phase_label.value, status])
            continue
        kink = rec["kept"][0]
        n_kink = rec["occupations"][kink]
        scan["rows"].append([float(dc), cfg.kink_eta, rec["n_photon"], n_kink,
                             rec["mean_n"], rec["n_coupled"],
                             st.phase_label.value, status])
        if st.phase_label.value == "Pinned" and (best is None or n_kink < best[1]):
            best = (float(dc), n_kink, st)
    tables["kink_scan"] = scan

    if best is not None:
        dc, _, st = best
        rec = _steady_point(p_scan.with_delta_c(dc), st, nu_grid=_spectrum_grid(cfg))
        if rec["spectrum"] is not None:
            spec = _table(("delta_c", "eta", "nu", "S_nu"))
            for nu, s in zip(rec["nu"], rec["spectrum"]):
                spec["rows"].append([dc, cfg.kink_eta, nu, s])
            tables["spectrum"] = spec
    return SweepDataset(config=cfg, tables=tables)


# --------------------------------------------------------- caching and runner

def _cache_path(cache_dir, cfg: ScenarioConfig, kind: str, idx: int) -> str:
    return os.path.join(cache_dir, cfg.config_hash(), f"{kind}_{idx}.json")


def _run_row_tasks(cfg, task_fn, n_tasks, kind, workers, cache_dir):
    """Run independent row tasks, resuming finished rows from the cache."""
    results = [None] * n_tasks
    pending = []
    for i in range(n_tasks):
        if cache_dir is not None:
            path = _cache_path(cache_dir, cfg, kind, i)
            if os.path.exists(path):
                with open(path) as fh:
                    results[i] = json.load(fh)
                continue
        pending.append(i)
    if pending:
        if workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for i, res in zip(pending, pool.map(
                        task_fn, [(cfg, i) for i in pending])):
                    results[i] = res
        else:
            for i in pending:
                results[i] = task_fn((cfg, i))
        if cache_dir is not None:
            for i in pending:
                path = _cache_path(cache_dir, cfg, kind, i)
                os.makedirs(os.path.dirname(path), exist_ok=True)
                tmp = path + ".tmp"
                with open(tmp, "w") as fh:
                    json.dump(results[i], fh)
                os.replace(tmp, path)
    return results


def run_scenario(cfg: ScenarioConfig, workers: int = 1,
                 cache_dir=None) -> SweepDataset:
    """Execute one scenario; returns the assembled dataset."""
    t0 = time.time()
    if cfg.scenario == "equilibrium":
        ds = _run_equilibrium(cfg)
    elif cfg.scenario == "map":
        ds = _run_map(cfg, workers, cache_dir)
    elif cfg.scenario == "resonance":
        ds = _run_resonance(cfg)
    elif cfg.scenario == "scaling":
        ds = _run_scaling(cfg, workers, cache_dir)
    elif cfg.scenario == "kink":
        ds = _run_kink(cfg)
    else:
        raise ValueError(f"unknown scenario {cfg.scenario!r}")
    ds.metadata.update({
        "scenario": cfg.scenario,
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "coupling_threshold": COUPLING_THRESHOLD,
        "seed": cfg.seed,
        "started_at": t0,
        "finished_at": time.time(),
        "n_failed": ds.n_failed(),
    })
    return ds


# --------------------------------------------------------------------- export

def export_dataset(ds: SweepDataset, out_dir, fmt: str = "csv") -> list:
    """Write tables plus the metadata sidecar; returns the written paths.

    Table files are deterministic for a given config; only the sidecar
    carries timestamps and environment facts.
    """
    if fmt not in ("csv", "json"):
        raise ValueError("format must be 'csv' or 'json'")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in sorted(ds.tables):
        table = ds.tables[name]
        path = os.path.join(out_dir, f"{name}.{fmt}")
        if fmt == "csv":
            lines = [",".join(table["columns"])]
            lines += [",".join(_fmt(v) for v in row) for row in table["rows"]]
            body = "\n".join(lines) + "\n"
        else:
            body = json.dumps(
                {"columns": table["columns"],
                 "rows": [[_fmt(v) for v in row] for row in table["rows"]]},
                separators=(",", ":")) + "\n"
        with open(path, "w", newline="") as fh:
            fh.write(body)
        paths.append(path)
    meta_path = os.path.join(out_dir, "metadata.json")
    with open(meta_path, "w") as fh:
        json.dump(ds.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(meta_path)
    return paths
