"""Command line entry point: ``laseremit run | scan-omega | omega-c``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .dlt import period_samples, singularity_probe
from .field import reconstruct
from .floquet import FloquetError, MarginalResonanceError, compare_asymptotic, omega_critical, solve_floquet
from .params import FIELD_AU_VNM, HARTREE_EV, ConfigError, RunConfig, load_config, plane_wave_ic
from .sources import source_trace, time_grid
from .volterra import SolverSettings, solve_psi0

AVERAGE_PERIODS = 4
STENCIL_H = 0.02  # bohr, auxiliary spacing for currents away from x = 0
FLOQUET_N = 16
_D5 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0  # offsets -2, -1, 1, 2


@dataclass
class RunOutput:
    out_dir: Path
    manifest: dict
    files: list[Path] = field(default_factory=list)
    # name -> (x label, x values, {column label: values})
    series: dict = field(default_factory=dict)


# ------------------------------------------------------------------ csv
def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> Path:
    """Comma separated, one header row, 17 significant digits."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    rows = np.column_stack(cols) if cols else np.empty((0, 0))
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(format(v, ".17g") for v in r) + "\n")
    return path


def export_plot_data(run: RunOutput) -> list[Path]:
    """One ``plot_<name>.csv`` per series: x column first, then y columns."""
    out = []
    for name, (xlab, xs, ys) in run.series.items():
        path = run.out_dir / f"plot_{name}.csv"
        out.append(write_csv(path, [xlab, *ys.keys()], [xs, *ys.values()]))
    run.files.extend(out)
    return out


def _versions() -> dict:
    return {"laseremit": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _config_echo(cfg: RunConfig) -> dict:
    return {
        **cfg.params.to_lab(),
        "ic": cfg.ic_kind if cfg.ic_kind == "plane_wave" else cfg.ic_desc,
        "t_periods": cfg.t_periods,
        "steps_per_period": cfg.steps_per_period,
        "x_grid": list(cfg.x_grid),
        "tol_resid": cfg.tol_resid,
        "out_dir": str(cfg.out_dir),
        "defaults_used": list(cfg.defaults_used),
    }


def _currents(trace, ic, F, k: float) -> dict[str, np.ndarray]:
    cols = {}
    for c, x in enumerate(F.x_grid):
        if x == 0:
            j = trace.current
        else:
            pts = x + STENCIL_H * np.array([-2.0, -1.0, 1.0, 2.0])
            if np.any(np.sign(pts) != np.sign(x)):
                raise ValueError(f"x = {x} is closer than {2 * STENCIL_H} bohr to the step")
            d = reconstruct(trace, ic, pts).psi @ _D5 / STENCIL_H
            j = np.imag(np.conj(F.psi[:, c]) * d)
        cols[f"j/k@x={x:g} (1)"] = j / k
    return cols


def run(cfg: RunConfig, floquet: bool = True, probe: bool = True) -> RunOutput:
    p = cfg.params
    ic = cfg.initial_condition()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    grid = time_grid(p, cfg.t_periods, cfg.steps_per_period)
    src = source_trace(grid, p, ic, cfg.steps_per_period, with_total=False)
    trace = solve_psi0(src, p, SolverSettings(tol_resid=cfg.tol_resid))
    timings["volterra_s"] = time.perf_counter() - t0
    manifest = {
        "config": _config_echo(cfg),
        "versions": _versions(),
        "solver": {"tol_resid": cfg.tol_resid, "residual_norm": trace.residual_norm,
                   "weighted_sup": trace.weighted_sup, "nu": trace.nu, "carrier": trace.carrier,
                   "dt_au": trace.dt},
        "averaging": {"window_periods": AVERAGE_PERIODS, "kind": "boxcar over the last periods"},
        "units": {"t": "a.u. (1 a.u. = 2.4188843e-17 s)", "x": "bohr", "energy_eV_per_hartree": HARTREE_EV,
                  "field_Vnm_per_au": FIELD_AU_VNM},
    }
    res = RunOutput(out, manifest)

    exact = np.full(len(grid), np.nan)
    if cfg.ic_kind == "plane_wave" and p.E == 0:
        exact = np.abs(trace.psi0 - ic.T0 * np.exp(-0.5j * p.k**2 * grid))
    res.files.append(write_csv(out / "trace.csv",
                               ["t (a.u.)", "Re psi0 (1)", "Im psi0 (1)", "Re psi_x0 (1/bohr)", "Im psi_x0 (1/bohr)",
                                "abs err vs exact (1)"],
                               [grid, trace.psi0.real, trace.psi0.imag, trace.psi_x0.real, trace.psi_x0.imag, exact]))

    t0 = time.perf_counter()
    xs = np.asarray(cfg.x_grid, dtype=float)
    F = reconstruct(trace, ic, xs)
    kref = p.k if cfg.ic_kind == "plane_wave" else 1.0
    cur = _currents(trace, ic, F, kref)
    timings["field_s"] = time.perf_counter() - t0
    res.files.append(write_csv(out / "current.csv", ["t (a.u.)", *cur.keys()], [grid, *cur.values()]))
    tt, xx = np.meshgrid(grid, xs, indexing="ij")
    res.files.append(write_csv(out / "field.csv", ["t (a.u.)", "x (bohr)", "Re psi (1)", "Im psi (1)", "|psi|^2 (1)"],
                               [tt.ravel(), xx.ravel(), F.psi.real.ravel(), F.psi.imag.ravel(),
                                (np.abs(F.psi) ** 2).ravel()]))
    manifest["current_normalisation"] = "j/k" if cfg.ic_kind == "plane_wave" else "j (k = 1)"

    P = cfg.steps_per_period
    navg = min(AVERAGE_PERIODS, cfg.t_periods)
    j0 = trace.current[-navg * P - 1:-1] / kref
    manifest["averaged_current_x0"] = float(j0.mean())
    res.series["current"] = ("t (periods)", grid / p.period, cur)

    if floquet and cfg.ic_kind == "plane_wave":
        t0 = time.perf_counter()
        try:
            sol = solve_floquet(p, FLOQUET_N)
            fl = {"N": sol.N, "flux_balance": sol.flux, "truncation_change": sol.truncation_change,
                  "cond": sol.cond, "transmitted_j/k": sol.transmitted_current() / p.k,
                  "open_left": list(sol.open_left), "open_right": list(sol.open_right),
                  "R": {str(n): [c.real, c.imag] for n, c in sol.C.items()},
                  "D": {str(n): [c.real, c.imag] for n, c in sol.D.items()}}
            if cfg.t_periods >= 16:
                rep = compare_asymptotic(trace, sol)
                fl["distance_per_period"] = rep.relative.tolist()
                fl["distance_slope"] = rep.slope
        except FloquetError as exc:
            fl = {"error": str(exc)}
        manifest["floquet"] = fl
        timings["floquet_s"] = time.perf_counter() - t0

    if probe and cfg.t_periods >= 13:
        rows, _ = period_samples(trace.psi0, P, np.arange(0, P, max(P // 8, 1)))
        rep = singularity_probe(rows, p.period, branch_sigmas=(0.0, p.u_tilde % p.omega))
        manifest["dlt"] = {
            "convention": "P_z f = sum_k z^k f(tau + kT), z = exp(i sigma T), no 1/omega prefactor",
            "poles": [{"arg": c.arg, "sigma_au": c.sigma, "modulus": c.modulus, "strength": c.strength,
                       "slope": c.slope} for c in rep.poles],
            "sigma_p_au": (0.5 * p.k**2) % p.omega,
            "branch": {f"{s:.17g}": kind for s, kind in rep.branch.items()},
            "indeterminate": rep.indeterminate,
        }
    manifest["timings"] = timings
    export_plot_data(res)
    (out / "report.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    res.files.append(out / "report.json")
    return res


# ------------------------------------------------------------------ scan
def _scan_point(args):
    cfg, omega_eV, time_domain = args
    p = cfg.params.with_omega(omega_eV / HARTREE_EV)
    row = {"omega": omega_eV, "td": np.nan, "fl": np.nan, "flag": "ok"}
    try:
        row["fl"] = solve_floquet(p, FLOQUET_N).transmitted_current() / p.k
    except MarginalResonanceError:
        row["flag"] = "marginal"
        return row
    except FloquetError:
        row["flag"] = "floquet_failed"
    if time_domain:
        try:
            P = cfg.steps_per_period
            grid = time_grid(p, cfg.t_periods, P)
            src = source_trace(grid, p, plane_wave_ic(p), P, with_total=False)
            tr = solve_psi0(src, p, SolverSettings(tol_resid=cfg.tol_resid, check_residual=False))
            navg = min(AVERAGE_PERIODS, cfg.t_periods)
            row["td"] = float(tr.current[-navg * P - 1:-1].mean() / p.k)
        except (ArithmeticError, RuntimeError, ValueError):
            row["flag"] = "time_domain_failed" if row["flag"] == "ok" else row["flag"]
    return row


def scan_omega(cfg: RunConfig, lo_eV: float, hi_eV: float, count: int, time_domain: bool = True,
               jobs: int = 1) -> RunOutput:
    if cfg.ic_kind != "plane_wave":
        raise ConfigError("ic", "scan-omega needs the plane-wave initial condition")
    if count < 2 or not hi_eV > lo_eV:
        raise ConfigError("scan", "need --to > --from and --count >= 2")
    wc = omega_critical(cfg.params) * HARTREE_EV
    if not lo_eV < wc < hi_eV:
        print(f"warning: range [{lo_eV}, {hi_eV}] eV does not straddle omega_c = {wc:.6f} eV", file=sys.stderr)
    omegas = np.linspace(lo_eV, hi_eV, count)
    tasks = [(cfg, float(w), time_domain) for w in omegas]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_scan_point, tasks))
    else:
        rows = [_scan_point(t) for t in tasks]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    om = np.array([r["omega"] for r in rows])
    td = np.array([r["td"] for r in rows])
    fl = np.array([r["fl"] for r in rows])
    flags = [r["flag"] for r in rows]
    path = out / "scan.csv"
    with open(path, "w", newline="\n") as fh:
        fh.write("omega (eV),omega - omega_c (eV),j/k time-domain (1),j/k floquet (1),flag\n")
        for w, a, b, f in zip(om, td, fl, flags):
            fh.write(f"{w:.17g},{w - wc:.17g},{a:.17g},{b:.17g},{f}\n")
    manifest = {"config": _config_echo(cfg), "versions": _versions(), "omega_c_eV": wc,
                "averaging": {"window_periods": AVERAGE_PERIODS}, "floquet_N": FLOQUET_N,
                "time_domain": time_domain, "flags": dict(zip(map(str, om), flags))}
    res = RunOutput(out, manifest, [path])
    res.series["scan_time_domain"] = ("omega - omega_c (eV)", om - wc, {"j/k time-domain (1)": td})
    res.series["scan_floquet"] = ("omega - omega_c (eV)", om - wc, {"j/k floquet (1)": fl})
    export_plot_data(res)
    (out / "scan_report.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    res.files.append(out / "scan_report.json")
    return res


# ------------------------------------------------------------------ main
def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="laseremit", description="Laser-driven emission from a step potential.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="time-domain run from a config file")
    r.add_argument("config")
    r.add_argument("--no-floquet", action="store_true")
    r.add_argument("--no-probe", action="store_true")
    s = sub.add_parser("scan-omega", help="averaged current against photon energy")
    s.add_argument("config")
    s.add_argument("--from", dest="lo", type=float, required=True, help="eV")
    s.add_argument("--to", dest="hi", type=float, required=True, help="eV")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--no-time-domain", action="store_true")
    s.add_argument("--jobs", type=int, default=1)
    c = sub.add_parser("omega-c", help="critical frequency for the configured field")
    c.add_argument("config")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.verb == "omega-c":
            wc = omega_critical(cfg.params)
            print(f"omega_c = {wc * HARTREE_EV:.17g} eV = {wc:.17g} a.u.")
        elif args.verb == "run":
            res = run(cfg, floquet=not args.no_floquet, probe=not args.no_probe)
            for f in res.files:
                print(f)
        else:
            res = scan_omega(cfg, args.lo, args.hi, args.count, not args.no_time_domain, args.jobs)
            for f in res.files:
                print(f)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0
