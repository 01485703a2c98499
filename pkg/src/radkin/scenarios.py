"""Runners for the canonical experiments.

Every run writes into one directory: ``config.toml`` (the fully defaulted
scenario), ``diagnostics.jsonl`` (one JSON object per line), CSV artifacts and
``summary.json``.  Runs are deterministic: there is no randomness anywhere.
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from . import dispersion as disp
from .config import Scenario, serialize
from .entropy import entropy_report
from .errors import RadkinError
from .fields import model_from_config, ZERO_FIELD
from .kinematics import ReducedState
from .pushers import PusherConfig, fit_exponential_rate, push, push_lorentz_dirac
from .submanifold import PhaseGrid
from .vlasov import PlasmaParams, cold_oscillation_state, diagnostics, peak_envelope_rate, step


class NumericalFailure(RadkinError):
    """A run produced non-finite or otherwise unusable numbers."""


class DiagnosticsWriter:
    """Sole owner of the JSON-lines stream of a run."""

    def __init__(self, path):
        self.fh = open(path, "w", encoding="utf-8")

    def write(self, record):
        for v in record.values():
            if isinstance(v, float) and not math.isfinite(v):
                raise NumericalFailure(f"non-finite diagnostic in record {record}")
        self.fh.write(json.dumps(record) + "\n")

    def close(self):
        self.fh.close()


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _finish(out: Path, summary: dict, headline: str):
    summary = dict(summary, headline=headline)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# ---------------------------------------------------------------------------

def run_runaway(s: Scenario, out: Path, log):
    p = s.params
    tau = p["physics"]["tau"]
    init = ReducedState(np.zeros(4), p["initial"]["v"], p["initial"]["a"])
    cfg = PusherConfig("lorentz-dirac", step=tau / p["numerics"]["steps_per_tau"])
    traj = push_lorentz_dirac(init, ZERO_FIELD, cfg, p["numerics"]["span"] * tau,
                              tau=tau, q_over_m=p["physics"]["q_over_m"])
    traj.to_csv(out / "trajectory.csv")
    acc = traj.proper_acceleration()
    for lam, a in zip(traj.lam, acc):
        log.write({"lambda": float(lam), "proper_acceleration": float(a)})
    rate = fit_exponential_rate(traj.lam, acc)
    return _finish(out, {"fitted_rate": rate, "expected_rate": 1.0 / tau, "ratio": rate * tau,
                         "max_constraint_residual": traj.max_residual()},
                   f"runaway: fitted rate {rate:.6g} vs 1/tau = {1.0 / tau:.6g} (ratio {rate * tau:.6f})")


def run_pusher_compare(s: Scenario, out: Path, log):
    p = s.params
    tau, qm = p["physics"]["tau"], p["physics"]["q_over_m"]
    fspec = dict(p["field"])
    model = model_from_config(fspec)
    num = p["numerics"]
    init = (np.array(p["initial"]["x"]), np.array(p["initial"]["v"]))
    trajs = {}
    for method in num["methods"]:
        cfg = PusherConfig(method, step=num["step"], order=num["order"], quadrature=num["quadrature"])
        traj = push(init, model, cfg, num["lambda_end"], tau=tau, q_over_m=qm)
        traj.to_csv(out / f"trajectory_{method}.csv")
        trajs[method] = traj
        log.write({"method": method, "samples": len(traj), "max_constraint_residual": traj.max_residual(),
                   "final_v": [float(x) for x in traj.v[-1]]})
    summary = {"methods": list(trajs)}
    ref = trajs.get("landau-lifshitz")
    parts = []
    if ref is not None:
        for m, t in trajs.items():
            if m == "landau-lifshitz":
                continue
            # compare at the reference samples (grids coincide when lambda_end/step is integral)
            n = min(len(t), len(ref))
            d = float(np.max(np.abs(t.v[:n] - ref.v[:n])))
            summary[f"sup_dv_{m}_vs_landau-lifshitz"] = d
            parts.append(f"{m} {d:.3e}")
    headline = "pusher-compare: sup|v - v_LL| " + (", ".join(parts) if parts else "(no reference run)")
    return _finish(out, summary, headline)


def _plasma_state(p):
    g = p["grid"]
    ph = p["physics"]
    num = p["numerics"]
    grid = PhaseGrid.uniform(g["nz"], g["length"], g["nv"], g["v_max"])
    params = PlasmaParams(tau=ph["tau"], order=ph["order"], scheme=num["scheme"], splitting=num["splitting"])
    return cold_oscillation_state(grid, params, amplitude=ph["amplitude"], mode=ph["mode"])


def run_cold_oscillation(s: Scenario, out: Path, log):
    p = s.params
    num = p["numerics"]
    state = _plasma_state(p)
    mode = p["physics"]["mode"]
    n_steps = int(round(num["periods"] * 2 * math.pi / state.params.omega_p / num["dt"]))
    rows = []

    def record(st):
        d = diagnostics(st, mode)
        log.write(d)
        rows.append([d["t"], d["field_energy"], d["kinetic_energy"], d["total_energy"], d["N_tot"],
                     d["J1_mode_amplitude"], d["entropy"]])

    record(state)
    for i in range(1, n_steps + 1):
        state = step(state, num["dt"])
        if i % num["diag_every"] == 0 or i == n_steps:
            record(state)
    _write_csv(out / "timeseries.csv",
               ["t", "field_energy", "kinetic_energy", "total_energy", "N_tot", "J1_mode_amplitude", "entropy"], rows)
    if p["output"]["snapshot"]:
        write_snapshot(out / "distribution.csv", state)
    arr = np.array(rows)
    T = arr[:, 3]
    drift = float(np.max(np.abs(T - T[0])) / T[0])
    tau = state.params.tau
    try:
        rate, tp, yp = peak_envelope_rate(arr[:, 0], arr[:, 1])
    except ValueError:
        rate = float("nan")
    expected = state.params.omega_p**2 * tau
    summary = {"fitted_envelope_rate": rate, "expected_rate": expected, "energy_drift_relative": drift,
               "steps": n_steps, "N_tot_change": float(arr[-1, 4] - arr[0, 4])}
    headline = f"cold-oscillation: envelope rate {rate:.6g} vs omega_p^2 tau = {expected:.6g}; energy drift {drift:.3e}"
    return _finish(out, summary, headline)


def write_snapshot(path, state):
    grid = state.grid
    rows = []
    for i, z in enumerate(grid.z):
        for j, v in enumerate(grid.v3):
            rows.append([float(z), float(v), float(state.g.values[i, j])])
    _write_csv(path, ["z", "v", "g"], rows)


def run_dispersion_scan(s: Scenario, out: Path, log):
    p = s.params
    bgp = p["background"]
    classify = p["numerics"]["classify"]
    if bgp["kind"] == "cold":
        bg = disp.Background.cold()
    else:
        bg = disp.Background.maxwellian(bgp["v_th"], nodes=bgp["nodes"])
    roots = []
    for tau in p["physics"]["taus"]:
        for k in p["physics"]["ks"]:
            if bg.kind == "cold":
                found = disp.cold_dispersion_roots(1.0, tau, k)
                for r in found:
                    if classify:
                        disp.classify_root(r, k, bg, tau)
            else:
                found = disp.find_roots(k, bg, tau, classify=classify)
            for r in found:
                log.write({"k": r.k, "tau": r.tau, "re_omega": r.omega.real, "im_omega": r.omega.imag,
                           "classification": r.classification, "residual": float(r.residual)})
            roots.extend(found)
    disp.write_scan_csv(out / "roots.csv", roots)
    counts = {}
    for r in roots:
        counts[r.classification] = counts.get(r.classification, 0) + 1
    headline = "dispersion-scan: " + ", ".join(f"{v} {k}" for k, v in sorted(counts.items())) + \
        f" roots over {len(p['physics']['taus'])} tau x {len(p['physics']['ks'])} k"
    return _finish(out, {"roots": len(roots), "classifications": counts}, headline)


def run_entropy_budget(s: Scenario, out: Path, log):
    p = s.params
    num = p["numerics"]
    state = _plasma_state(p)
    n_steps = int(round(num["periods"] * 2 * math.pi / state.params.omega_p / num["dt"]))
    rows = []

    def record(st):
        rep = entropy_report(st)
        d = {"t": st.t, **rep.as_dict()}
        log.write(d)
        rows.append([d["t"], d["S_total"], d["dS_dt_exact"], d["dS_dt_first_order"], d["self_term"],
                     d["ext_term"], d["field_term"]])

    record(state)
    for i in range(1, n_steps + 1):
        state = step(state, num["dt"])
        if i % num["diag_every"] == 0 or i == n_steps:
            record(state)
    _write_csv(out / "entropy.csv", ["t", "S_total", "dS_dt_exact", "dS_dt_first_order", "self_term",
                                     "ext_term", "field_term"], rows)
    arr = np.array(rows)
    tau = state.params.tau
    ratio = float(np.mean(arr[:, 2] / (tau * arr[:, 3]))) if tau > 0 else float("nan")
    headline = f"entropy-budget: mean exact / (tau * first-order) = {ratio:.6g} over {len(rows)} records"
    return _finish(out, {"mean_ratio_exact_to_first_order": ratio, "records": len(rows)}, headline)


RUNNERS = {
    "runaway": run_runaway,
    "pusher-compare": run_pusher_compare,
    "cold-oscillation": run_cold_oscillation,
    "dispersion-scan": run_dispersion_scan,
    "entropy-budget": run_entropy_budget,
}


def run_scenario(s: Scenario, out_dir=None):
    """Run a validated scenario into ``out_dir`` (default ``runs/<name>``); returns the summary dict."""
    out = Path(out_dir if out_dir is not None else os.path.join("runs", s.name))
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(serialize(s), encoding="utf-8")
    log = DiagnosticsWriter(out / "diagnostics.jsonl")
    try:
        return RUNNERS[s.name](s, out, log)
    finally:
        log.close()
