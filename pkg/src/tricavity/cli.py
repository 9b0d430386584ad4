"""Photon-transfer simulations of a three-cavity array with a qubit in the middle cavity.

Every subcommand resolves a ScenarioConfig (config file, then flag
overrides), runs it, writes CSV/JSON artifacts into ``--out`` and finishes
with ``manifest.json``: resolved config, versions, kernel backend,
convergence diagnostics and the SHA-256 of every output. Passing a manifest
back as ``--config`` reruns the same scenario.

Exit codes: 0 success, 2 configuration error, 3 convergence failure, 4 I/O error.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys

import numpy as np
import scipy

from . import __version__, kernels
from .analysis import (amplitude_scan, estimate_gc, fit_dimension, box_count, fit_gc_law,
                       inversion_time, scan_inversion_vs_g)
from .analytic import degenerate_delta_n, rwa_amplitude, rwa_inversion_time
from .config import ScenarioConfig, default_n_max, load_config, with_changes
from .errors import ConfigError, ConvergenceError, GridBoundaryError, TricavityError
from .fock import build_space, coherent_min_cutoff
from .model import SystemParams, Variant
from .observe import fidelity_observables, reduced_cavity_state
from .propagate import (Scenario, Trajectory, _jsonable, converge_cutoff, initial_state,
                        simulate)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4
MANIFEST_VERSION = 1
DEFAULT_T_END = {"transfer": 1000.0, "boxcount": 1000.0, "sweep-g": 3000.0,
                 "sweep-j2": 3000.0, "degenerate": 200.0}
FIDELITY_PERIODS = 20
AUTO_START_OFFSET = 4


class ArtifactWriter:
    """Single writer for a run directory; remembers what it wrote and its hash."""

    def __init__(self, directory):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        self.outputs = {}

    def path(self, name):
        return os.path.join(self.directory, name)

    def _record(self, name):
        with open(self.path(name), "rb") as fh:
            self.outputs[name] = hashlib.sha256(fh.read()).hexdigest()

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        self._record(name)

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self._record(name)

    def text(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text)
        self._record(name)

    def trajectory(self, stem, traj):
        traj.to_csv(self.path(stem + ".csv"))
        self._record(stem + ".csv")
        self.json(stem + ".json", traj.meta)

    def subdir(self, name):
        return ArtifactWriter(self.path(name))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def versions():
    return {"tricavity": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(writer, cfg, resolved, diagnostics, summary):
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "scenario": cfg.scenario,
        "config": cfg.to_dict(),
        "resolved": resolved,
        "versions": versions(),
        "backend": kernels.BACKEND,
        "diagnostics": diagnostics,
        "summary": summary,
        "outputs": dict(sorted(writer.outputs.items())),
    }
    path = writer.path("manifest.json")
    with open(path, "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ---------------------------------------------------------------- scenario runners

def _params(cfg, variant=None):
    return SystemParams(omega_q=cfg.omega_q, g=cfg.g, j1=cfg.j1, j2=cfg.j2,
                        variant=variant or cfg.variant)


def _lambda(cfg):
    return math.sqrt(cfg.g ** 2 + cfg.j1 ** 2 + cfg.j2 ** 2)


def _t_end(cfg):
    if cfg.t_end is not None:
        return cfg.t_end
    if cfg.scenario == "fidelity":
        lam = _lambda(cfg)
        if lam == 0:
            raise ConfigError("fidelity needs a nonzero coupling to set the default t_end")
        periods = FIDELITY_PERIODS * 2 * math.pi / lam
        return math.ceil(periods / cfg.dt_sample) * cfg.dt_sample
    return DEFAULT_T_END[cfg.scenario]


def _initial(cfg):
    """Initial-state settings; superposition p and theta default to seeded draws."""
    p, theta = cfg.p, cfg.theta
    if cfg.state == "superposition" and (p is None or theta is None):
        rng = np.random.default_rng(cfg.seed)
        draw_p, draw_theta = rng.uniform(0.0, 1.0), rng.uniform(0.0, 2 * math.pi)
        p = draw_p if p is None else p
        theta = draw_theta if theta is None else theta
    return {"initial": cfg.state, "alpha": cfg.alpha, "p": p or 0.0, "theta": theta or 0.0}


def _scenario(cfg, t_end=None):
    return Scenario(t_end=_t_end(cfg) if t_end is None else t_end, dt=cfg.dt,
                    dt_sample=cfg.dt_sample, method=cfg.method, **_initial(cfg))


def resolve_n_max(cfg, params, scenario):
    """``(n_max, diagnostics)`` for a single trajectory."""
    if isinstance(cfg.n_max, int):
        return cfg.n_max, {"policy": "fixed", "n_max": cfg.n_max}
    default = default_n_max(params.g)
    if scenario.initial == "coherent":
        default = max(default, coherent_min_cutoff(scenario.alpha))
    if cfg.n_max is None:
        return default, {"policy": "default", "n_max": default}
    start = max(2, default - AUTO_START_OFFSET)
    n, diag = converge_cutoff(params, scenario, start, cfg.tol)
    diag["policy"] = "auto"
    return n, diag


def _traj_summary(traj):
    inv = inversion_time(traj)
    return {"t_inv": inv.t_inv, "max_n3": float(np.max(traj["n3"])),
            "max_leakage": float(np.max(traj["leakage"])),
            "norm_drift": float(np.max(np.abs(traj["norm"] - 1.0))),
            "samples": len(traj.times), "stopped_early": traj.stopped_early}


def run_transfer(cfg, writer):
    params = _params(cfg)
    scenario = _scenario(cfg)
    n_max, diag = resolve_n_max(cfg, params, scenario)
    traj = simulate(params, scenario, n_max)
    writer.trajectory("trajectory", traj)
    return {"n_max": n_max, "t_end": scenario.t_end}, diag, _traj_summary(traj)


def _with_delta(traj):
    traj.records["delta_n"] = traj["n1"] - traj["n3"]
    return traj


def _fit_summary(fit):
    return {"dimension": fit.dimension, "fit_window": list(fit.fit_window),
            "r_squared": fit.r_squared, "n_points": fit.n_points}


def run_boxcount(cfg, writer):
    resolved, diag = {}, {"policy": "input"}
    if cfg.input is not None:
        traj = Trajectory.read_csv(cfg.input)
        dt_sample = traj.dt_sample
        resolved["input"] = cfg.input
    else:
        params = _params(cfg)
        scenario = _scenario(cfg)
        n_max, diag = resolve_n_max(cfg, params, scenario)
        traj = simulate(params, scenario, n_max)
        writer.trajectory("trajectory", traj)
        dt_sample = cfg.dt_sample
        resolved.update(n_max=n_max, t_end=scenario.t_end)
    if cfg.series == "delta_n" and "delta_n" not in traj.records:
        _with_delta(traj)
    if cfg.series not in traj.records:
        raise ConfigError(f"series {cfg.series!r} not present in the trajectory")
    table = box_count(traj[cfg.series], dt_sample, meta={"series": cfg.series})
    fit = fit_dimension(table, cfg.window)
    writer.csv("boxcount.csv", ["tau", "M", "local_slope"], table.rows(fit.local_slopes))
    summary = dict(_fit_summary(fit), series=cfg.series)
    writer.json("fit.json", summary)
    return resolved, diag, summary


def run_degenerate(cfg, writer):
    params = _params(cfg, Variant.DEGENERATE)
    scenario = _scenario(cfg)
    n_max, diag = resolve_n_max(cfg, params, scenario)
    traj = _with_delta(simulate(params, scenario, n_max))
    summary = _traj_summary(traj)
    if cfg.j1 == cfg.j2:
        closed = degenerate_delta_n(cfg.j1, traj.times)
        traj.records["delta_n_closed_form"] = closed
        summary["max_deviation_from_closed_form"] = float(np.max(np.abs(traj["delta_n"] - closed)))
    writer.trajectory("trajectory", traj)
    return {"n_max": n_max, "t_end": scenario.t_end}, diag, summary


def run_fidelity(cfg, writer):
    params = _params(cfg)
    scenario = _scenario(cfg)
    n_max, diag = resolve_n_max(cfg, params, scenario)
    space = build_space(n_max)
    rho0 = reduced_cavity_state(initial_state(space, scenario), 1)
    traj = simulate(params, scenario, n_max,
                    extra_observables=lambda sp_: fidelity_observables(sp_, rho0))
    writer.trajectory("trajectory", traj)
    f = traj["fidelity"]
    k = int(np.argmax(f))
    summary = dict(_traj_summary(traj), fidelity_t0=float(f[0]), max_fidelity=float(f[k]),
                   t_max_fidelity=float(traj.times[k]), purity_at_max=float(traj["purity"][k]))
    resolved = {"n_max": n_max, "t_end": scenario.t_end, "p": scenario.p,
                "theta": scenario.theta}
    return resolved, diag, summary


def _grid(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 12)


def _sweep_n_max(cfg, g_max):
    if cfg.n_max == "auto":
        raise ConfigError("n_max: auto is only available for single trajectories; "
                          "give an integer cutoff for sweeps")
    if isinstance(cfg.n_max, int):
        return cfg.n_max, {"policy": "fixed", "n_max": cfg.n_max}
    n = default_n_max(g_max)
    return n, {"policy": "default", "n_max": n}


def _scan_rows(curve, with_rwa=True):
    rows = []
    for pt in curve.points:
        rwa = rwa_inversion_time(pt.g, curve.params.j1, curve.params.j2) if with_rwa else None
        rows.append((pt.g, pt.t_inv, pt.censored, rwa, pt.error))
    return rows


SCAN_HEADER = ["g", "t_inv", "censored", "t_inv_rwa", "error"]


def _gc_summary(curve):
    try:
        g_c, t_max = estimate_gc(curve)
    except GridBoundaryError as exc:
        return {"g_c": None, "t_inv_max": None, "warning": str(exc)}
    return {"g_c": g_c, "t_inv_max": t_max}


def run_sweep_g(cfg, writer):
    grid = _grid(cfg.g_min, cfg.g_max, cfg.step)
    n_max, diag = _sweep_n_max(cfg, float(grid.max()))
    t_end = _t_end(cfg)
    curve = scan_inversion_vs_g(_params(cfg), grid, t_end, n_max, dt=cfg.dt,
                                dt_sample=cfg.dt_sample, method=cfg.method, workers=cfg.workers)
    writer.csv("scan.csv", SCAN_HEADER, _scan_rows(curve))
    summary = {"points": len(grid), "censored": int(curve.censored.sum()),
               "failed": sum(p.error is not None for p in curve.points)}
    if len(grid) >= 2 and cfg.step <= 0.01 + 1e-12:
        summary.update(_gc_summary(curve))
    return {"n_max": n_max, "t_end": t_end, "grid_points": len(grid)}, diag, summary


def run_sweep_j2(cfg, writer):
    if cfg.quantity == "amplitude":
        grid = _grid(cfg.j2_min, cfg.j2_max, cfg.j2_step)
        n_max = cfg.n_max if isinstance(cfg.n_max, int) else 2
        curve = amplitude_scan(cfg.g, cfg.j1, grid, numeric=True, n_max=n_max, dt=cfg.dt,
                               dt_sample=cfg.dt_sample, workers=cfg.workers)
        diff = np.abs(curve.numeric - curve.analytic)
        writer.csv("amplitude.csv", ["j2", "T_closed_form", "T_numeric", "abs_diff"],
                   zip(grid, curve.analytic, curve.numeric, diff))
        k = int(np.argmax(curve.analytic))
        summary = {"max_abs_diff": float(diff.max()), "peak_j2": float(grid[k]),
                   "peak_T": float(curve.analytic[k])}
        return {"n_max": n_max, "variant": "rwa"}, {"policy": "rwa-sector"}, summary

    grid = _grid(cfg.gc_g_min, cfg.gc_g_max, cfg.step)
    n_max, diag = _sweep_n_max(cfg, float(grid.max()))
    t_end = _t_end(cfg)
    law_rows, gcs = [], []
    for j2 in cfg.j2_values:
        curve = scan_inversion_vs_g(_params(cfg).with_(j2=j2), grid, t_end, n_max, dt=cfg.dt,
                                    dt_sample=cfg.dt_sample, method=cfg.method,
                                    workers=cfg.workers)
        writer.csv(f"scan_j2_{j2:g}.csv", SCAN_HEADER, _scan_rows(curve, with_rwa=False))
        res = _gc_summary(curve)
        law_rows.append((j2, res["g_c"], res["t_inv_max"]))
        gcs.append(res["g_c"])
    writer.csv("gc_law.csv", ["j2", "g_c", "t_inv_max"], law_rows)
    summary = {"g_c": dict(zip(map(str, cfg.j2_values), gcs))}
    ok = [(j2, g) for j2, g in zip(cfg.j2_values, gcs) if g is not None]
    if len(ok) >= 2:
        slope, intercept = fit_gc_law(*zip(*ok))
        summary.update(slope=slope, intercept=intercept)
    return {"n_max": n_max, "t_end": t_end, "grid_points": len(grid)}, diag, summary


RUNNERS = {"transfer": run_transfer, "boxcount": run_boxcount, "degenerate": run_degenerate,
           "fidelity": run_fidelity, "sweep-g": run_sweep_g, "sweep-j2": run_sweep_j2}


def run(cfg, out=None):
    """Execute ``cfg``; returns the manifest dict. Artifacts go to ``out`` (or cfg.out)."""
    writer = ArtifactWriter(out or cfg.out)
    resolved, diag, summary = RUNNERS[cfg.scenario](cfg, writer)
    return write_manifest(writer, cfg, resolved, diag, summary)


# ---------------------------------------------------------------- figure presets

def _preset_amplitude(g_j1_pairs, overrides):
    cases = []
    for g, j1 in g_j1_pairs:
        cfg = ScenarioConfig(scenario="sweep-j2", quantity="amplitude", g=g, j1=j1,
                             j2_min=0.0, j2_max=0.02, j2_step=0.0005, dt=0.1, dt_sample=0.5,
                             variant="rwa")
        cases.append((f"g{g:g}_j1{j1:g}", with_changes(cfg, **overrides)))
    return cases


def _check_amplitude(name, cfg, manifest):
    s = manifest["summary"]
    argmax = math.hypot(cfg.g, cfg.j1)
    peak = rwa_amplitude(cfg.g, cfg.j1, argmax)
    return [
        (f"{name}: max |sqrt(max N3) - T|", s["max_abs_diff"], "< 1e-3", s["max_abs_diff"] < 1e-3),
        (f"{name}: grid peak at J2", s["peak_j2"], f"~ {argmax:.5g} (grid step {cfg.j2_step:g})",
         abs(s["peak_j2"] - argmax) <= cfg.j2_step),
        (f"{name}: peak T", s["peak_T"], f"<= {peak:.5g}", s["peak_T"] <= peak + 1e-12),
    ]


def _preset_cases(figure, overrides):
    """``[(name, cfg)]`` for a figure preset."""
    if figure == "fig2a":
        return _preset_amplitude([(0.0, 0.001), (0.0, 0.005), (0.0, 0.01)], overrides)
    if figure == "fig2b":
        return _preset_amplitude([(0.0, 0.001), (0.002, 0.001), (0.01, 0.001)], overrides)
    if figure in ("fig3a", "fig3b"):
        g = 0.9 if figure == "fig3a" else 0.85
        cfg = ScenarioConfig(scenario="boxcount", g=g, j1=0.1, j2=0.1, omega_q=1.0,
                             t_end=1000.0, series="n1")
        return [(f"g{g:g}", with_changes(cfg, **overrides))]
    if figure == "fig4":
        base = dict(g=0.0, j1=0.1, j2=0.1, dt=0.05, t_end=3000.0, step=0.005, n_max=12)
        main = ScenarioConfig(scenario="sweep-g", g_min=0.0, g_max=1.0, **base)
        law = ScenarioConfig(scenario="sweep-j2", quantity="gc", **base)
        return [("scan", with_changes(main, **overrides)),
                ("gc_law", with_changes(law, **overrides))]
    if figure == "fig5":
        cases = []
        for j2 in (0.05, 0.10, 0.15):
            cfg = ScenarioConfig(scenario="sweep-g", g_min=0.0, g_max=0.3, step=0.005, j1=0.1,
                                 j2=j2, dt=0.05, t_end=3000.0, n_max=8)
            cases.append((f"j2_{j2:g}", with_changes(cfg, **overrides)))
        return cases
    if figure == "s1":
        cases = []
        for g, j in ((0.01, 0.01), (0.01, 0.1), (0.2, 0.01), (0.2, 0.1)):
            cfg = ScenarioConfig(scenario="fidelity", state="superposition", p=0.2, theta=0.63,
                                 g=g, j1=j, j2=j)
            cases.append((f"g{g:g}_j{j:g}", with_changes(cfg, **overrides)))
        return cases
    if figure in ("s2", "s3"):
        pairs = ((0.0, 0.1),) if figure == "s2" else ((0.02, 0.01), (0.2, 0.1))
        cases = []
        for g, j in pairs:
            cfg = ScenarioConfig(scenario="fidelity", state="coherent", alpha=1.0, g=g,
                                 j1=j, j2=j)
            cases.append((f"g{g:g}_j{j:g}", with_changes(cfg, **overrides)))
        return cases
    raise ConfigError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")


FIGURES = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4", "fig5", "s1", "s2", "s3")


def _checks(figure, name, cfg, manifest):
    """Comparison rows ``(quantity, value, expectation, ok)``; ok None means informational."""
    s = manifest["summary"]
    if figure in ("fig2a", "fig2b"):
        return _check_amplitude(name, cfg, manifest)
    if figure == "fig3a":
        d = s["dimension"]
        return [(f"{name}: box-counting dimension of N1", d, "1.66 +/- 0.20", abs(d - 1.66) <= 0.2)]
    if figure == "fig3b":
        return [(f"{name}: box-counting dimension of N1", s["dimension"], "reported", None)]
    if figure == "fig4" and name == "scan":
        g_c = s.get("g_c")
        return [(f"{name}: g_c at J2=0.1", g_c, "in [0.80, 0.90]",
                 g_c is not None and 0.80 <= g_c <= 0.90)]
    if figure == "fig4":
        rows = [(f"{name}: g_c at J2={k}", v, "reported", None) for k, v in s["g_c"].items()]
        if "slope" in s:
            rows += [(f"{name}: slope of g_c(J2)", s["slope"], "-0.97 +/- 0.15",
                      abs(s["slope"] + 0.97) <= 0.15),
                     (f"{name}: intercept of g_c(J2)", s["intercept"], "0.94 +/- 0.05",
                      abs(s["intercept"] - 0.94) <= 0.05)]
        return rows
    if figure == "fig5":
        return [(f"{name}: full vs RWA T_inv", "see scan.csv", "columns t_inv, t_inv_rwa", None)]
    if figure == "s2" or (figure == "s3" and cfg.g == 0):
        return [(f"{name}: F(0)", s["fidelity_t0"], "exp(-1) +/- 0.01",
                 abs(s["fidelity_t0"] - math.exp(-1)) <= 0.01),
                (f"{name}: max F", s["max_fidelity"], "> 0.95", s["max_fidelity"] > 0.95)]
    return [(f"{name}: F(0)", s["fidelity_t0"], "reported", None),
            (f"{name}: max F", s["max_fidelity"], "reported", None)]


def _fig5_rows(cases, writer):
    """Relative full-vs-RWA agreement below g = 0.07 for the homogeneous case."""
    rows = []
    for name, cfg in cases:
        with open(writer.path(os.path.join(name, "scan.csv"))) as fh:
            data = list(csv.DictReader(fh))
        if cfg.j1 != cfg.j2:
            continue
        worst = 0.0
        departs = None
        for r in data:
            g = float(r["g"])
            full = float(r["t_inv"]) if r["t_inv"] else None
            rwa = float(r["t_inv_rwa"]) if r["t_inv_rwa"] else None
            if g <= 0.07 and full and rwa:
                worst = max(worst, abs(full - rwa) / rwa)
            if departs is None and rwa is None and full is not None:
                departs = g
        rows.append((f"{name}: max relative T_inv difference for g <= 0.07", worst, "< 0.05",
                     worst < 0.05))
        rows.append((f"{name}: first g with RWA no-inversion but full inversion", departs,
                     "> 0.1414", departs is not None and departs > math.hypot(cfg.j1, cfg.j2)))
    return rows


def reproduce(figure, out, overrides=None):
    """Run a figure preset into ``out``; returns the list of comparison rows."""
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    writer = ArtifactWriter(out)
    cases = _preset_cases(figure, overrides or {})
    rows = []
    for name, cfg in cases:
        manifest = run(cfg, writer.path(name))
        rows += _checks(figure, name, cfg, manifest)
    if figure == "fig5":
        rows += _fig5_rows(cases, writer)
    report = [{"quantity": q, "value": v, "expected": e,
               "status": "info" if ok is None else ("pass" if ok else "fail")}
              for q, v, e, ok in rows]
    writer.json("report.json", {"figure": figure, "checks": report})
    lines = [f"# {figure} comparison", ""]
    for r in report:
        lines.append(f"- [{r['status']}] {r['quantity']}: {r['value']} (expected {r['expected']})")
    writer.text("report.md", "\n".join(lines) + "\n")
    return report


# ---------------------------------------------------------------- argument parsing

def _add_common(p):
    p.add_argument("--config", help="YAML config or a manifest.json from an earlier run")
    p.add_argument("--g", type=float, help="qubit-cavity coupling")
    p.add_argument("--j1", type=float, help="hopping between cavities 1 and 2")
    p.add_argument("--j2", type=float, help="hopping between cavities 2 and 3")
    p.add_argument("--wq", dest="omega_q", type=float, help="qubit frequency")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    cut = p.add_mutually_exclusive_group()
    cut.add_argument("--nmax", dest="n_max", type=int, help="photon cutoff per cavity")
    cut.add_argument("--auto-nmax", dest="n_max", action="store_const", const="auto",
                     help="raise the cutoff until photon numbers converge to --tol")
    p.add_argument("--tol", type=float, help="convergence tolerance for --auto-nmax")
    p.add_argument("--dt", type=float)
    p.add_argument("--dt-sample", dest="dt_sample", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--method", choices=["trotter4", "exact"])
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="sweep worker processes (default: all CPUs)")
    p.add_argument("--seed", type=int)


def _add_initial(p):
    p.add_argument("--initial", dest="state", choices=["single_photon", "coherent",
                                                       "superposition"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--theta", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="tricavity", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transfer", help="single trajectory of photon numbers")
    _add_common(p)
    _add_initial(p)

    p = sub.add_parser("fidelity", help="transfer fidelity of a cavity-1 state to cavity 3")
    _add_common(p)
    _add_initial(p)

    p = sub.add_parser("degenerate", help="degenerate-qubit effective model")
    _add_common(p)
    p.add_argument("--j", type=float, help="homogeneous hopping J1 = J2")

    p = sub.add_parser("boxcount", help="box-counting dimension of a trajectory column")
    _add_common(p)
    _add_initial(p)
    p.add_argument("--series", choices=["n1", "n2", "n3", "qubit_excitation", "delta_n"])
    p.add_argument("--input", help="existing trajectory CSV instead of a new run")
    p.add_argument("--window", nargs=2, type=float, metavar=("TAU_MIN", "TAU_MAX"))

    p = sub.add_parser("sweep-g", help="inversion time versus g")
    _add_common(p)
    p.add_argument("--g-min", dest="g_min", type=float)
    p.add_argument("--g-max", dest="g_max", type=float)
    p.add_argument("--step", type=float)

    p = sub.add_parser("sweep-j2", help="transfer amplitude or critical coupling versus J2")
    _add_common(p)
    p.add_argument("--quantity", choices=["amplitude", "gc"])
    p.add_argument("--j2-min", dest="j2_min", type=float)
    p.add_argument("--j2-max", dest="j2_max", type=float)
    p.add_argument("--j2-step", dest="j2_step", type=float)
    p.add_argument("--j2-values", dest="j2_values", type=float, nargs="+")
    p.add_argument("--gc-g-min", dest="gc_g_min", type=float)
    p.add_argument("--gc-g-max", dest="gc_g_max", type=float)
    p.add_argument("--step", type=float, help="g step of the critical-coupling scans")

    p = sub.add_parser("reproduce", help="run a figure preset and write a comparison report")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--out", help="output directory (default: results/FIGURE)")
    p.add_argument("--nmax", dest="n_max", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--workers", type=int)
    return parser


_NOT_CONFIG = {"command", "config", "j", "figure"}


def config_from_args(args):
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    if getattr(args, "j", None) is not None:
        overrides["j1"] = overrides["j2"] = args.j
    if overrides.get("window") is not None:
        overrides["window"] = tuple(overrides["window"])
    if overrides.get("j2_values") is not None:
        overrides["j2_values"] = tuple(overrides["j2_values"])
    if args.config is None or "scenario" not in _config_keys(args.config):
        overrides["scenario"] = args.command
    cfg = load_config(args.config, overrides)
    if cfg.scenario != args.command:
        raise ConfigError(f"config describes scenario {cfg.scenario!r} but the "
                          f"{args.command!r} command was used")
    if cfg.scenario == "degenerate":
        cfg = with_changes(cfg, variant="degenerate")
    return cfg


def _config_keys(path):
    from .config import parse_config_text

    with open(path) as fh:
        values, _ = parse_config_text(fh.read(), path)
    return values


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reproduce":
            overrides = {k: getattr(args, k) for k in ("n_max", "dt", "t_end", "step", "workers")
                         if getattr(args, k) is not None}
            report = reproduce(args.figure, args.out or os.path.join("results", args.figure),
                               overrides)
            for r in report:
                print(f"[{r['status']}] {r['quantity']}: {r['value']} (expected {r['expected']})")
            return EXIT_OK
        cfg = config_from_args(args)
        manifest = run(cfg)
        print(json.dumps(manifest["summary"], sort_keys=True, default=str))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        print(json.dumps(_jsonable(exc.diagnostics), indent=2), file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TricavityError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
