"""Batch front-end: config-driven runs emitting CSV tables and JSON reports.

Exit codes: 0 success, 2 config error (also argparse usage errors),
3 solver/fit failure, 4 no trap minimum.  Every command writes
runreport_<command>.json with a determinism hash over its numerical
outputs, solver residuals, and a coarse-grid control delta.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np
from scipy.constants import pi

from . import constants
from .bpm import beat_length_from_phase, fit_beat_length, mode_beta_from_trace, \
    propagate
from .config import ConfigError, default_config_path, load_config
from .devices import coupler_matrix, mzi_apply, mzi_matrix, \
    supermode_coupling_estimate, transferred_fraction
from .fields import ModeExcitation, beat_period
from .geometry import SimulationGrid
from .modes import FitError, SolverError, decay_length, export_mode_csv, \
    mode_by_label, solve_modes
from .potential import SurfaceParams, TwoColorSetup, build_potential
from .trap import NoTrapMinimum, analyze_guide, guide_lattice_transition, \
    lattice_analysis, power_sweep, surface_sensitivity, trap_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_NOTRAP = 4


@lru_cache(maxsize=64)
def _modes_cached(geometry, grid, wavelength, polarization="TE", max_modes=6):
    return tuple(solve_modes(geometry, grid, wavelength,
                             polarization=polarization, max_modes=max_modes))


def _sanitize(obj):
    """JSON-safe copy: numpy scalars to python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": _sanitize(obj.real), "im": _sanitize(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


def _hash_outputs(outputs):
    blob = json.dumps(_sanitize(outputs), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_sanitize(obj), fh, indent=2)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wtr = csv.writer(fh)
        wtr.writerow(header)
        for row in rows:
            wtr.writerow(["" if v is None else v for v in row])


def _finish(outdir, command, cfg, outputs, diagnostics, files, t0):
    report = {
        "command": command,
        "config": cfg.raw,
        "timing_s": time.perf_counter() - t0,
        "outputs": outputs,
        "diagnostics": diagnostics,
        "files": sorted(files),
        "determinism_hash": _hash_outputs(outputs),
    }
    path = os.path.join(outdir, f"runreport_{command}.json")
    _write_json(path, report)
    print(f"[{command}] wrote {path} ({report['timing_s']:.1f} s)")
    return report


def _convergence(name, fine, coarse):
    delta = (abs(fine - coarse) / abs(fine)) if fine else float("nan")
    return {"quantity": name, "fine": fine, "coarse": coarse,
            "relative_delta": delta,
            "note": "control run on a 2x coarser grid"}


def _residuals(modes):
    return {f"{m.label}@{m.wavelength * 1e9:.0f}nm": m.residual for m in modes}


def _resolve(excitation_specs, modes):
    out = []
    for spec in excitation_specs:
        mode = mode_by_label(modes, spec["mode"])
        out.append(ModeExcitation(mode, spec["power"], spec.get("phase", 0.0)))
    return out


def _build_setup(cfg, grid=None, red_specs=None):
    grid = grid or cfg.grid
    red_modes = _modes_cached(cfg.geometry, grid, cfg.red_wavelength)
    blue_modes = _modes_cached(cfg.geometry, grid, cfg.blue_wavelength)
    red = _resolve(red_specs if red_specs is not None else cfg.red_excitations,
                   red_modes)
    blue = _resolve(cfg.blue_excitations, blue_modes)
    setup = TwoColorSetup(
        cfg.geometry, grid, cfg.atom, cfg.red_wavelength, cfg.blue_wavelength,
        red, blue,
        SurfaceParams(cfg.surface_permittivity,
                      cfg.surface_reference_wavelength),
        cfg.include_gravity)
    return setup, list(red_modes) + list(blue_modes)


def _slice_csv(path, pmap, z_index=None):
    """Potential slice dump: x, y[, z], totals and components in uK."""
    grid = pmap.grid
    if z_index is None:
        U = pmap.U
        comps = pmap.components
        zval = None
    else:
        U = pmap.U[z_index]
        comps = {k: (v[z_index] if v.ndim == 3 else v)
                 for k, v in pmap.components.items()}
        zval = float(np.asarray(pmap.z)[z_index])
    toK = constants.joule_to_uK
    header = ["x_um", "y_um"] + (["z_um"] if zval is not None else []) \
        + ["U_total_uK", "U_red_uK", "U_blue_uK", "U_sur_uK"]
    rows = []
    for iy in range(grid.ny):
        for ix in range(grid.nx):
            row = [f"{grid.x[ix] * 1e6:.4f}", f"{grid.y[iy] * 1e6:.4f}"]
            if zval is not None:
                row.append(f"{zval * 1e6:.4f}")
            for arr in (U, comps["red"], comps["blue"], comps["surface"]):
                v = arr[iy, ix]
                row.append("" if not np.isfinite(v) else f"{toK(v):.6g}")
            rows.append(row)
    _write_csv(path, header, rows)


def cmd_modes(cfg, outdir, threads=1):
    t0 = time.perf_counter()
    lam = cfg.modes.get("wavelength", cfg.red_wavelength)
    pol = cfg.modes.get("polarization", "TE")
    mm = cfg.modes.get("max_modes", 6)
    modes = _modes_cached(cfg.geometry, cfg.grid, lam, pol, mm)
    if not modes:
        print("warning: no guided modes at this wavelength")
    files = []
    table = []
    for m in modes:
        table.append({"label": m.label, "beta_per_m": m.beta,
                      "n_eff": m.n_eff, "residual": m.residual})
        fpath = os.path.join(outdir, f"mode_{m.label}_{lam * 1e9:.0f}nm.csv")
        jpath = fpath.replace(".csv", ".json")
        export_mode_csv(m, fpath, jpath)
        files += [fpath, jpath]
    tpath = os.path.join(outdir, "modes.csv")
    _write_csv(tpath, ["label", "beta_per_m", "n_eff", "residual"],
               [[r["label"], f"{r['beta_per_m']:.8e}", f"{r['n_eff']:.8f}",
                 f"{r['residual']:.3e}"] for r in table])
    files.append(tpath)

    coarse_modes = _modes_cached(cfg.geometry, cfg.grid.coarsened(), lam,
                                 pol, mm)
    conv = _convergence(
        "beta_fundamental",
        modes[0].beta if modes else float("nan"),
        coarse_modes[0].beta if coarse_modes else float("nan"))
    outputs = {"wavelength_m": lam, "polarization": pol, "modes": table}
    diagnostics = {"residuals": _residuals(modes), "grid_convergence": conv}
    _finish(outdir, "modes", cfg, outputs, diagnostics, files, t0)
    return EXIT_OK


_DEFAULT_DECAY_WAVELENGTHS = tuple((700 + 25 * i) * 1e-9 for i in range(9))


def cmd_decay(cfg, outdir, threads=1):
    t0 = time.perf_counter()
    lams = cfg.decay.get("wavelengths", list(_DEFAULT_DECAY_WAVELENGTHS))
    labels = cfg.decay.get("labels", ["TE00", "TE01", "TM00"])
    pols = sorted({lab[:2] for lab in labels})

    def one(lam):
        found = {}
        for pol in pols:
            for m in _modes_cached(cfg.geometry, cfg.grid, lam, pol):
                found[m.label] = m
        rows = []
        for lab in labels:
            m = found.get(lab)
            if m is None:
                rows.append((lam, lab, None, None))
                continue
            try:
                L = decay_length(m)
            except FitError:
                L = None
            rows.append((lam, lab, m.beta, L))
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            nested = list(pool.map(one, sorted(lams)))
    else:
        nested = [one(lam) for lam in sorted(lams)]
    rows = [r for batch in nested for r in batch]

    path = os.path.join(outdir, "decay.csv")
    _write_csv(path, ["wavelength_nm", "label", "beta_per_m", "L_um"],
               [[f"{lam * 1e9:.1f}", lab,
                 None if beta is None else f"{beta:.8e}",
                 None if L is None else f"{L * 1e6:.5f}"]
                for lam, lab, beta, L in rows])

    ref_lam = sorted(lams)[-1]
    fine = next((L for lam, lab, b, L in rows
                 if lam == ref_lam and L is not None), float("nan"))
    coarse_modes = _modes_cached(cfg.geometry, cfg.grid.coarsened(), ref_lam)
    try:
        coarse = decay_length(coarse_modes[0]) if coarse_modes else float("nan")
    except FitError:
        coarse = float("nan")
    outputs = {"rows": [[lam, lab, beta, L] for lam, lab, beta, L in rows]}
    diagnostics = {
        "residuals": {},
        "grid_convergence": _convergence("decay_length", fine, coarse),
    }
    _finish(outdir, "decay", cfg, outputs, diagnostics, [path], t0)
    return EXIT_OK


def cmd_guide(cfg, outdir, threads=1):
    t0 = time.perf_counter()
    setup, modes = _build_setup(cfg)
    pmap, report = analyze_guide(setup)
    sens = surface_sensitivity(setup)

    files = []
    spath = os.path.join(outdir, "potential_slice.csv")
    _slice_csv(spath, pmap)
    files.append(spath)
    rpath = os.path.join(outdir, "trap_report.json")
    _write_json(rpath, report.as_dict())
    files.append(rpath)

    coarse_setup, _ = _build_setup(cfg, grid=cfg.grid.coarsened())
    _, coarse_report = analyze_guide(coarse_setup)

    outputs = {"trap": report.as_dict(),
               "surface_sensitivity": sens,
               "lifetime_conventions": {
                   "tau_trap_s": report.tau_trap,
                   "with_factor_2_s": report.tau_trap_halved,
                   "ratio": report.tau_trap / report.tau_trap_halved}}
    diagnostics = {
        "residuals": _residuals(modes),
        "grid_convergence": _convergence("depth_uK", report.depth_uK,
                                         coarse_report.depth_uK),
    }
    print(f"  standoff {report.y_min * 1e6:.3f} um, depth {report.depth_uK:.1f} uK, "
          f"Gamma_sc {report.Gamma_sc:.2f} /s")
    print(f"  tau_trap {report.tau_trap:.1f} s (depth over recoil heating), "
          f"{report.tau_trap_halved:.1f} s (factor-2 variant)")
    print(f"  U_D across eps {sens['depth_uK']}")
    _finish(outdir, "guide", cfg, outputs, diagnostics, files, t0)
    return EXIT_OK


def cmd_sweep(cfg, outdir, threads=1):
    t0 = time.perf_counter()
    powers = cfg.sweep.get("red_powers",
                           [0.5e-3, 1.0e-3, 1.5e-3, 2.0e-3, 2.5e-3])
    setup, modes = _build_setup(cfg)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows, diag = power_sweep(setup, powers, map_fn=pool.map)
    else:
        rows, diag = power_sweep(setup, powers)

    table = [[P * 1e3, r.y_min * 1e6, r.depth_uK, r.Gamma_sc, r.tau_trap]
             for P, r in rows]
    cpath = os.path.join(outdir, "sweep_table.csv")
    _write_csv(cpath, ["P_red_mW", "y_min_um", "U_D_uK", "Gamma_sc_per_s",
                       "tau_trap_s"],
               [[f"{a:.3f}", f"{b:.4f}", f"{c:.3f}", f"{d:.3f}", f"{e:.2f}"]
                for a, b, c, d, e in table])
    tpath = os.path.join(outdir, "sweep_table.txt")
    with open(tpath, "w") as fh:
        fh.write(f"{'P_red (mW)':>10} {'y_min (um)':>11} {'U_D (uK)':>9} "
                 f"{'Gamma_sc (1/s)':>14} {'tau_trap (s)':>12}\n")
        for a, b, c, d, e in table:
            fh.write(f"{a:>10.2f} {b:>11.3f} {c:>9.2f} {d:>14.2f} {e:>12.1f}\n")

    coarse_setup, _ = _build_setup(cfg, grid=cfg.grid.coarsened())
    _, coarse_rep = analyze_guide(coarse_setup)
    fine_depth = dict((P, r.depth_uK) for P, r in rows).get(setup.red_power())
    if fine_depth is None:
        fine_depth = rows[0][1].depth_uK

    outputs = {"rows": table,
               "reports": [{**{"P_red_W": P}, **r.as_dict()} for P, r in rows]}
    diagnostics = {
        "residuals": _residuals(modes),
        "monotonicity": diag,
        "grid_convergence": _convergence("depth_uK", fine_depth,
                                         coarse_rep.depth_uK),
    }
    if diag:
        print("  monotonicity warnings:", "; ".join(diag))
    _finish(outdir, "sweep", cfg, outputs, diagnostics,
            [cpath, tpath], t0)
    return EXIT_OK


def _lattice_setup(cfg, grid=None):
    specs = cfg.lattice.get("excitations")
    if specs is None:
        total = sum(e["power"] for e in cfg.red_excitations) or 1.5e-3
        specs = [{"mode": "TE00", "power": total / 2, "phase": 0.0},
                 {"mode": "TE01", "power": total / 2, "phase": 0.0}]
    return _build_setup(cfg, grid=grid, red_specs=specs)


def cmd_lattice(cfg, outdir, threads=1):
    t0 = time.perf_counter()
    stations = cfg.lattice.get("z_stations", 50)
    setup, modes = _lattice_setup(cfg)
    pmap, report, info = lattice_analysis(setup, z_stations=stations)

    files = []
    if pmap.is_stack:
        zs = np.asarray(pmap.z)
        prof = []
        for k in range(len(zs)):
            Uk = pmap.U[k]
            idx = np.unravel_index(np.nanargmin(Uk), Uk.shape)
            prof.append([f"{zs[k] * 1e6:.4f}",
                         f"{constants.joule_to_uK(Uk[idx]):.4f}",
                         f"{pmap.grid.y[idx[0]] * 1e6:.4f}"])
        ppath = os.path.join(outdir, "z_profile.csv")
        _write_csv(ppath, ["z_um", "U_min_uK", "y_min_um"], prof)
        files.append(ppath)
        mid = len(zs) // 2
        for k, tag in ((mid, "bright"), ((mid + len(zs) // 4) % len(zs), "quarter"),
                       ((mid + len(zs) // 2) % len(zs), "dark")):
            spath = os.path.join(outdir, f"slice_{tag}.csv")
            _slice_csv(spath, pmap, z_index=k)
            files.append(spath)

    transition_rows = []
    if cfg.transition:
        thetas = cfg.transition.get("thetas", [pi / 2, 5 * pi / 6, pi])
        tz = cfg.transition.get("z_stations", stations)
        pairs = [mzi_apply(th, (1.0, 0.0)) for th in thetas]
        scan = guide_lattice_transition(setup, pairs,
                                        total_red_power=setup.red_power(),
                                        z_stations=tz)
        for th, (pair, rep, inf) in zip(thetas, scan):
            transition_rows.append({
                "theta_rad": th,
                "weights": [abs(pair[0]) ** 2, abs(pair[1]) ** 2],
                "kind": "guide" if rep.note.startswith("degenerate") else "lattice",
                "corrugation_uK": inf["corrugation_uK"],
                "depth_uK": rep.depth_uK,
                "y_min_um": rep.y_min * 1e6,
            })
        tpath = os.path.join(outdir, "transition.csv")
        _write_csv(tpath,
                   ["theta_deg", "w_TE00", "w_TE01", "kind",
                    "corrugation_uK", "depth_uK", "y_min_um"],
                   [[f"{r['theta_rad'] * 180 / pi:.1f}", f"{r['weights'][0]:.4f}",
                     f"{r['weights'][1]:.4f}", r["kind"],
                     f"{r['corrugation_uK']:.3f}", f"{r['depth_uK']:.3f}",
                     f"{r['y_min_um']:.4f}"] for r in transition_rows])
        files.append(tpath)

    rpath = os.path.join(outdir, "lattice_report.json")
    _write_json(rpath, {"trap": report.as_dict(), "lattice": info})
    files.append(rpath)

    coarse_setup, _ = _lattice_setup(cfg, grid=cfg.grid.coarsened())
    _, coarse_rep, _ = lattice_analysis(coarse_setup, z_stations=stations)

    outputs = {"trap": report.as_dict(), "lattice": info,
               "z_stations": stations, "transition": transition_rows}
    diagnostics = {
        "residuals": _residuals(modes),
        "grid_convergence": _convergence("depth_uK", report.depth_uK,
                                         coarse_rep.depth_uK),
    }
    if info["period"]:
        print(f"  period {info['period'] * 1e6:.3f} um, site depth "
              f"{report.depth_uK:.1f} uK, omega/2pi "
              f"{tuple(f'{f:.0f}' for f in report.frequencies_kHz)} kHz")
    _finish(outdir, "lattice", cfg, outputs, diagnostics, files, t0)
    return EXIT_OK


def _bpm_grid(cfg):
    sub = cfg.bpm.get("grid")
    if not sub:
        return cfg.grid
    base = {"step": cfg.grid.step, "x_min": cfg.grid.x_min,
            "x_max": cfg.grid.x_max, "y_min": cfg.grid.y_min,
            "y_max": cfg.grid.y_max}
    base.update(sub)
    return SimulationGrid(**base)


def cmd_bpm(cfg, outdir, threads=1):
    t0 = time.perf_counter()
    bgrid = _bpm_grid(cfg)
    lam = cfg.bpm.get("wavelength", cfg.red_wavelength)
    launch_specs = cfg.bpm.get("launch") or [
        {"mode": "TE00", "power": 0.75e-3, "phase": 0.0},
        {"mode": "TE01", "power": 0.75e-3, "phase": 0.0}]
    z_max = cfg.bpm.get("z_max", 3.0e-6)
    dz = cfg.bpm.get("dz", 10e-9)
    order = cfg.bpm.get("order", 2)
    absorber_cells = max(1, int(round(cfg.bpm.get("absorber_width", 60e-9)
                                      / bgrid.step)))
    kappa = cfg.bpm.get("absorber_kappa", 0.02)
    snap = cfg.bpm.get("snapshot_every", 100)

    modes = _modes_cached(cfg.geometry, bgrid, lam)
    launch = _resolve(launch_specs, modes)
    result = propagate(cfg.geometry, bgrid, lam, launch, z_max, dz=dz,
                       order=order, absorber_cells=absorber_cells,
                       absorber_kappa=kappa, snapshot_every=snap)

    labels = [e.mode.label for e in launch]
    betas_bpm = {lab: mode_beta_from_trace(result, lab) for lab in labels}
    betas_eig = {e.mode.label: e.mode.beta for e in launch}
    outputs = {"wavelength_m": lam, "kbar": result.kbar,
               "beta_bpm": betas_bpm, "beta_eigen": betas_eig,
               "power_final": float(result.power[-1])}
    if len(launch) >= 2:
        analytic = beat_period(launch[0].mode.beta, launch[1].mode.beta)
        phase_beat = beat_length_from_phase(result, labels[0], labels[1])
        fit_beat, fit_err = fit_beat_length(result, labels[0], labels[1],
                                            analytic)
        outputs["beat"] = {"analytic_m": analytic, "phase_m": phase_beat,
                           "fit_m": fit_beat, "fit_stderr_m": fit_err}
        print(f"  beat: analytic {analytic * 1e6:.4f} um, "
              f"phase-slope {phase_beat * 1e6:.4f} um, "
              f"cosine fit {fit_beat * 1e6:.4f} um")

    files = []
    ppath = os.path.join(outdir, "power_trace.csv")
    _write_csv(ppath, ["z_um", "relative_power"],
               [[f"{z * 1e6:.4f}", f"{p:.8f}"]
                for z, p in zip(result.z, result.power)])
    files.append(ppath)
    cpath = os.path.join(outdir, "correlations.csv")
    header = ["z_um"]
    for lab in labels:
        header += [f"abs_{lab}", f"arg_{lab}"]
    crows = []
    for i, z in enumerate(result.z):
        row = [f"{z * 1e6:.4f}"]
        for lab in labels:
            c = result.correlations[lab][i]
            row += [f"{abs(c):.6e}", f"{np.angle(c):.6f}"]
        crows.append(row)
    _write_csv(cpath, header, crows)
    files.append(cpath)

    if result.snapshots:
        ix0 = int(np.argmin(np.abs(bgrid.x)))
        srows = []
        for zv in sorted(result.snapshots):
            u = result.snapshots[zv]
            I = np.abs(u[:, ix0]) ** 2
            for iy in range(bgrid.ny):
                srows.append([f"{zv * 1e6:.4f}", f"{bgrid.y[iy] * 1e6:.4f}",
                              f"{I[iy]:.6e}"])
        spath = os.path.join(outdir, "snapshots_yz.csv")
        _write_csv(spath, ["z_um", "y_um", "intensity"], srows)
        files.append(spath)

    control = propagate(cfg.geometry, bgrid, lam, launch,
                        min(z_max, 40 * dz), dz=2 * dz, order=order,
                        absorber_cells=absorber_cells, absorber_kappa=kappa)
    if len(launch) >= 2:
        conv = _convergence(
            "beta_gap",
            betas_bpm[labels[0]] - betas_bpm[labels[1]],
            mode_beta_from_trace(control, labels[0])
            - mode_beta_from_trace(control, labels[1]))
        conv["note"] = "control run with doubled dz"
    else:
        conv = _convergence("beta_bpm", betas_bpm[labels[0]],
                            mode_beta_from_trace(control, labels[0]))
        conv["note"] = "control run with doubled dz"

    diagnostics = {"residuals": _residuals(modes), "grid_convergence": conv}
    _finish(outdir, "bpm", cfg, outputs, diagnostics, files, t0)
    return EXIT_OK


def _mzi_grid(cfg):
    sub = cfg.mzi.get("grid")
    if not sub:
        return cfg.grid
    base = {"step": cfg.grid.step, "x_min": cfg.grid.x_min,
            "x_max": cfg.grid.x_max, "y_min": cfg.grid.y_min,
            "y_max": cfg.grid.y_max}
    base.update(sub)
    return SimulationGrid(**base)


def _phase_exact(geometry, grid, wavelength, dn, length, label):
    base = _modes_cached(geometry, grid, wavelength)
    shifted = _modes_cached(
        dataclasses.replace(geometry, core_index=geometry.core_index + dn),
        grid, wavelength)
    return (mode_by_label(shifted, label).beta
            - mode_by_label(base, label).beta) * length


def cmd_mzi(cfg, outdir, threads=1):
    t0 = time.perf_counter()
    mgrid = _mzi_grid(cfg)
    lam = cfg.mzi.get("wavelength", 1.06e-6)
    arm = cfg.mzi.get("arm_length", 50e-6)
    dn = cfg.mzi.get("delta_n", 0.01012)
    label = cfg.mzi.get("label", "TE00")

    theta_full = _phase_exact(cfg.geometry, mgrid, lam, dn, arm, label)
    theta_half = _phase_exact(cfg.geometry, mgrid, lam, dn / 2, arm, label)
    slope = theta_full / dn

    thetas = np.linspace(0, 2 * pi, 97)
    unit_res = max(
        float(np.max(np.abs(mzi_matrix(th).conj().T @ mzi_matrix(th)
                            - np.eye(2)))) for th in thetas)

    dn_values = cfg.mzi.get("dn_values")
    if dn_values is None:
        dn_values = list(np.linspace(0, dn, 9))
    curve = []
    for d in dn_values:
        th = slope * d
        c0, c1 = mzi_apply(th, (1.0, 0.0))
        curve.append({"delta_n": d, "theta_rad": th,
                      "p0": abs(c0) ** 2, "p1": abs(c1) ** 2,
                      "power_sum": abs(c0) ** 2 + abs(c1) ** 2})
    cpath = os.path.join(outdir, "mzi_curve.csv")
    _write_csv(cpath, ["delta_n", "theta_rad", "p_TE00", "p_TE10", "sum"],
               [[f"{r['delta_n']:.6f}", f"{r['theta_rad']:.6f}",
                 f"{r['p0']:.8f}", f"{r['p1']:.8f}", f"{r['power_sum']:.10f}"]
                for r in curve])

    coup = cfg.mzi.get("coupler", {})
    Lc = coup.get("coupling_length", 24.38e-6)
    lengths = coup.get("lengths", [Lc / 2, Lc])
    gap = coup.get("gap", 42e-9)
    coupler_rows = [{"length_m": L,
                     "transferred": transferred_fraction(L, Lc)}
                    for L in lengths]
    kappa_cmt = pi / (2 * Lc)
    try:
        kappa_sm, pair = supermode_coupling_estimate(
            cfg.geometry, cfg.grid, cfg.red_wavelength, gap)
        supermode = {"kappa_per_m": kappa_sm,
                     "pair_betas": [m.beta for m in pair],
                     "ratio_to_cmt": kappa_sm / kappa_cmt}
    except (SolverError, ValueError, KeyError) as err:
        supermode = {"error": str(err)}

    outputs = {
        "wavelength_m": lam, "arm_length_m": arm,
        "theta": {"delta_n": dn, "theta_rad": theta_full,
                  "theta_over_pi": theta_full / pi,
                  "half_delta_n": dn / 2, "theta_half_rad": theta_half,
                  "theta_half_over_pi": theta_half / pi},
        "unitarity_residual": unit_res,
        "curve": curve,
        "coupler": {"coupling_length_m": Lc, "kappa_cmt_per_m": kappa_cmt,
                    "rows": coupler_rows, "gap_m": gap,
                    "supermode": supermode},
    }
    coarse_theta = _phase_exact(cfg.geometry, mgrid.coarsened(), lam, dn,
                                arm, label)
    diagnostics = {
        "residuals": _residuals(_modes_cached(cfg.geometry, mgrid, lam)),
        "grid_convergence": _convergence("theta_rad", theta_full,
                                         coarse_theta),
    }
    print(f"  theta(dn={dn}) = {theta_full / pi:.4f} pi, "
          f"theta(dn/2) = {theta_half / pi:.4f} pi")
    sm = supermode.get("kappa_per_m")
    if sm:
        print(f"  coupler kappa: CMT {kappa_cmt:.4g} /m, "
              f"supermode estimate {sm:.4g} /m")
    _finish(outdir, "mzi", cfg, outputs, diagnostics, [cpath], t0)
    return EXIT_OK


def cmd_reproduce(cfg, outdir, threads=1):
    """Run every command and collect the headline numbers in one summary."""
    t0 = time.perf_counter()
    for fn in (cmd_modes, cmd_decay, cmd_guide, cmd_sweep, cmd_lattice,
               cmd_bpm, cmd_mzi):
        fn(cfg, outdir, threads)

    summary = {}
    for name in ("modes", "decay", "guide", "sweep", "lattice", "bpm", "mzi"):
        with open(os.path.join(outdir, f"runreport_{name}.json")) as fh:
            summary[name] = json.load(fh)["outputs"]

    checks = _acceptance_checks(summary)
    spath = os.path.join(outdir, "acceptance_summary.json")
    _write_json(spath, {"checks": checks,
                        "elapsed_s": time.perf_counter() - t0})
    n_pass = sum(1 for c in checks if c["ok"])
    for c in checks:
        flag = "PASS" if c["ok"] else "FAIL"
        print(f"  [{flag}] {c['name']}: {c['value']:.6g} "
              f"(target {c['target']:.6g} +/- {c['tol_pct']:.0f}%)")
    print(f"[reproduce] {n_pass}/{len(checks)} headline checks in band; "
          f"summary in {spath}")
    return EXIT_OK


def _acceptance_checks(summary):
    """Headline value-vs-target comparisons assembled from command outputs."""
    checks = []

    def add(name, value, target, tol_pct):
        ok = (value is not None and np.isfinite(value)
              and abs(value - target) <= abs(target) * tol_pct / 100.0)
        checks.append({"name": name, "value": value, "target": target,
                       "tol_pct": tol_pct, "ok": bool(ok)})

    mode_rows = {r["label"]: r for r in summary["modes"]["modes"]}
    add("beta_TE00_865nm", mode_rows.get("TE00", {}).get("beta_per_m"),
        22.04e6, 2)
    add("beta_TE01_865nm", mode_rows.get("TE01", {}).get("beta_per_m"),
        17.23e6, 2)

    decay_rows = summary["decay"]["rows"]

    def L_of(lam_nm, label):
        for lam, lab, _, L in decay_rows:
            if abs(lam * 1e9 - lam_nm) < 0.5 and lab == label:
                return L
        return None

    L_red = L_of(865, "TE01")
    L_blue = L_of(700, "TE00")
    add("L_TE01_865nm_um", None if L_red is None else L_red * 1e6, 0.0617, 5)
    add("L_TE00_700nm_um", None if L_blue is None else L_blue * 1e6, 0.0375, 5)
    if L_red and L_blue:
        add("alpha_L", (L_red - L_blue) / L_blue, 0.65, 7.7)

    g = summary["guide"]["trap"]
    add("guide_standoff_um", g["y_min"] * 1e6, 0.092, 10)
    add("guide_depth_uK", g["depth_uK"], 114.6, 15)
    add("guide_Gamma_sc", g["Gamma_sc"], 8.8, 20)
    add("guide_tau_coh_ms", g["tau_coh"] * 1e3, 113.6, 20)
    add("guide_tau_trap_s", g["tau_trap"], 77.6, 20)
    add("guide_fx_kHz", g["frequencies_kHz"][0], 51, 15)
    add("guide_fy_kHz", g["frequencies_kHz"][1], 299, 15)
    add("guide_mode_spacing_uK", g["mode_spacing_uK"], 14.3, 15)

    lat = summary["lattice"]["trap"]
    lat_info = summary["lattice"]["lattice"]
    add("lattice_period_um", lat_info["period"] * 1e6, 1.31, 1)
    beat = summary["bpm"].get("beat")
    if beat:
        add("bpm_beat_fit_um", beat["fit_m"] * 1e6, 1.31, 3)
    add("lattice_standoff_um", lat["y_min"] * 1e6, 0.08, 10)
    add("lattice_depth_uK", lat["depth_uK"], 146, 15)
    add("lattice_fx_kHz", lat["frequencies_kHz"][0], 56, 20)
    add("lattice_fy_kHz", lat["frequencies_kHz"][1], 346, 20)
    add("lattice_fz_kHz", lat["frequencies_kHz"][2], 32, 20)
    add("lattice_Gamma_sc", lat["Gamma_sc"], 13.71, 20)
    add("lattice_tau_trap_s", lat["tau_trap"], 118.7, 20)

    th = summary["mzi"]["theta"]
    add("mzi_theta_over_pi", th["theta_over_pi"], 1.0, 10)
    add("mzi_theta_half_over_pi", th["theta_half_over_pi"], 0.5, 10)
    cp = {round(r["length_m"] * 1e6, 2): r["transferred"]
          for r in summary["mzi"]["coupler"]["rows"]}
    if 24.38 in cp:
        add("coupler_full_transfer", cp[24.38], 1.0, 1e-9)
    if 12.19 in cp:
        add("coupler_half_transfer", cp[12.19], 0.5, 1e-9)
    return checks


_COMMANDS = {
    "modes": cmd_modes,
    "decay": cmd_decay,
    "guide": cmd_guide,
    "sweep": cmd_sweep,
    "lattice": cmd_lattice,
    "bpm": cmd_bpm,
    "mzi": cmd_mzi,
    "reproduce": cmd_reproduce,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="evatrap",
        description="Two-color evanescent-field atom guide / lattice simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config path (default: bundled "
                                        "reference configuration)")
        p.add_argument("--out", help="output directory (default: $EVATRAP_OUT "
                                     "or ./evatrap_out)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for sweeps/scans")
        p.add_argument("--grid-step", type=float, default=None,
                       metavar="NM", help="override grid step in nm")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config \
            else load_config(default_config_path())
        if args.grid_step:
            if args.grid_step <= 0:
                raise ConfigError("--grid-step must be positive")
            cfg = cfg.with_grid_step(args.grid_step * 1e-9)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = args.out or os.environ.get("EVATRAP_OUT") or "evatrap_out"
    os.makedirs(outdir, exist_ok=True)

    try:
        return _COMMANDS[args.command](cfg, outdir, max(1, args.threads))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NoTrapMinimum as err:
        print(f"no trap minimum: {err}", file=sys.stderr)
        return EXIT_NOTRAP
    except (SolverError, FitError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except KeyError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
