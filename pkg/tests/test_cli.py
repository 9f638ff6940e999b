"""End-to-end runs of the batch front-end on a coarse configuration.

Every command is executed in-process through cli.main so exit codes and
output files can be checked without spawning subprocesses.  The config
uses a 10 nm grid and short scans to keep each command under a few
seconds.
"""

import json
import os

import pytest

from evatrap import cli
from evatrap.cli import EXIT_CONFIG, EXIT_NOTRAP, EXIT_OK, EXIT_SOLVER, main

REPORT_KEYS = {"command", "config", "timing_s", "outputs", "diagnostics",
               "files", "determinism_hash"}

COARSE_CONFIG = {
    "grid": {"step": "10 nm", "x_min": "-1.0 um", "x_max": "1.0 um",
             "y_min": "-1.4 um", "y_max": "1.0 um"},
    "light": {
        "red": {"wavelength": "865 nm",
                "excitations": [{"mode": "TE01", "power": "1.5 mW"}]},
        "blue": {"wavelength": "700 nm",
                 "excitations": [{"mode": "TE00", "power": "40 mW"}]},
    },
    "surface": {"permittivity": 2.1, "reference_wavelength": "780 nm"},
    "include_gravity": True,
    "decay": {"wavelengths": ["700 nm", "790 nm", "865 nm"],
              "labels": ["TE00", "TE01"]},
    "sweep": {"red_powers": ["1.0 mW", "2.0 mW"]},
    "lattice": {"z_stations": 12,
                "excitations": [{"mode": "TE00", "power": "0.75 mW"},
                                {"mode": "TE01", "power": "0.75 mW"}]},
    "transition": {"thetas": ["90 deg", "180 deg"], "z_stations": 8},
    "bpm": {"wavelength": "865 nm",
            "launch": [{"mode": "TE00", "power": "0.75 mW"},
                       {"mode": "TE01", "power": "0.75 mW"}],
            "z_max": "1.5 um", "dz": "20 nm", "order": 2,
            "absorber_width": "120 nm", "absorber_kappa": 0.02,
            "snapshot_every": 25,
            "grid": {"step": "20 nm", "x_min": "-0.8 um", "x_max": "0.8 um",
                     "y_min": "-0.8 um", "y_max": "0.8 um"}},
    "mzi": {"wavelength": "1.06 um", "arm_length": "50 um",
            "delta_n": 0.01012, "label": "TE00",
            "dn_values": [0.0, 0.00506, 0.01012],
            "coupler": {"coupling_length": "24.38 um", "gap": "42 nm",
                        "lengths": ["12.19 um", "24.38 um"]}},
}


@pytest.fixture(scope="module")
def cfg_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "coarse.json"
    path.write_text(json.dumps(COARSE_CONFIG))
    return str(path)


def run(command, cfg_path, outdir, *extra):
    rc = main([command, "--config", cfg_path, "--out", str(outdir)] + list(extra))
    report = None
    rpath = outdir / f"runreport_{command}.json"
    if rpath.exists():
        report = json.loads(rpath.read_text())
    return rc, report


def check_report(report, command):
    assert set(report) == REPORT_KEYS
    assert report["command"] == command
    assert len(report["determinism_hash"]) == 64
    assert "grid_convergence" in report["diagnostics"]
    for f in report["files"]:
        assert os.path.exists(f), f
    return report


def test_modes_command(cfg_path, tmp_path):
    rc, report = run("modes", cfg_path, tmp_path)
    assert rc == EXIT_OK
    check_report(report, "modes")
    labels = [m["label"] for m in report["outputs"]["modes"]]
    assert "TE00" in labels and "TE01" in labels
    header = (tmp_path / "modes.csv").read_text().splitlines()[0]
    assert header == "label,beta_per_m,n_eff,residual"
    conv = report["diagnostics"]["grid_convergence"]
    assert conv["relative_delta"] < 0.02


def test_decay_command_threaded(cfg_path, tmp_path):
    rc, report = run("decay", cfg_path, tmp_path, "--threads", "2")
    assert rc == EXIT_OK
    check_report(report, "decay")
    rows = report["outputs"]["rows"]
    # 3 wavelengths x 2 labels, sorted by wavelength
    assert len(rows) == 6
    assert rows[0][0] == pytest.approx(700e-9)
    assert rows[-1][0] == pytest.approx(865e-9)
    lines = (tmp_path / "decay.csv").read_text().splitlines()
    assert lines[0] == "wavelength_nm,label,beta_per_m,L_um"
    assert len(lines) == 7


def test_guide_command(cfg_path, tmp_path):
    rc, report = run("guide", cfg_path, tmp_path)
    assert rc == EXIT_OK
    check_report(report, "guide")
    trap = report["outputs"]["trap"]
    assert 60 < trap["depth_uK"] < 130
    conv = report["outputs"]["lifetime_conventions"]
    assert conv["ratio"] == pytest.approx(2.0)
    sens = report["outputs"]["surface_sensitivity"]
    assert set(sens["depth_uK"]) == {"2.1", "11.7"}
    slice_header = (tmp_path / "potential_slice.csv").read_text(
    ).splitlines()[0]
    assert slice_header == "x_um,y_um,U_total_uK,U_red_uK,U_blue_uK,U_sur_uK"
    assert (tmp_path / "trap_report.json").exists()


def test_sweep_command(cfg_path, tmp_path):
    rc, report = run("sweep", cfg_path, tmp_path)
    assert rc == EXIT_OK
    check_report(report, "sweep")
    rows = report["outputs"]["rows"]
    assert len(rows) == 2
    # depth grows and standoff shrinks with red power
    assert rows[1][2] > rows[0][2]
    assert rows[1][1] < rows[0][1]
    text = (tmp_path / "sweep_table.txt").read_text()
    assert "P_red (mW)" in text
    assert len(text.splitlines()) == 3


def test_lattice_command(cfg_path, tmp_path):
    rc, report = run("lattice", cfg_path, tmp_path)
    assert rc == EXIT_OK
    check_report(report, "lattice")
    info = report["outputs"]["lattice"]
    assert info["period"] == pytest.approx(1.346e-6, rel=1e-2)
    assert info["corrugation_uK"] > 50
    for name in ("z_profile.csv", "slice_bright.csv", "slice_quarter.csv",
                 "slice_dark.csv", "lattice_report.json", "transition.csv"):
        assert (tmp_path / name).exists()
    trans = report["outputs"]["transition"]
    assert [t["kind"] for t in trans] == ["lattice", "guide"]
    assert trans[0]["corrugation_uK"] > trans[1]["corrugation_uK"]


def test_bpm_command(cfg_path, tmp_path):
    rc, report = run("bpm", cfg_path, tmp_path)
    assert rc == EXIT_OK
    check_report(report, "bpm")
    out = report["outputs"]
    assert abs(out["power_final"] - 1.0) < 1e-3
    beat = out["beat"]
    assert beat["fit_m"] == pytest.approx(beat["analytic_m"], rel=0.01)
    for lab in ("TE00", "TE01"):
        # dz = 20 nm leaves a few-times-1e-4 Pade dispersion error
        assert out["beta_bpm"][lab] == pytest.approx(
            out["beta_eigen"][lab], rel=5e-4)
    for name in ("power_trace.csv", "correlations.csv", "snapshots_yz.csv"):
        assert (tmp_path / name).exists()


def test_mzi_command(cfg_path, tmp_path):
    rc, report = run("mzi", cfg_path, tmp_path)
    assert rc == EXIT_OK
    check_report(report, "mzi")
    th = report["outputs"]["theta"]
    assert th["theta_over_pi"] == pytest.approx(1.0, abs=0.05)
    assert th["theta_half_over_pi"] == pytest.approx(th["theta_over_pi"] / 2,
                                                     rel=1e-3)
    assert report["outputs"]["unitarity_residual"] < 1e-12
    coup = report["outputs"]["coupler"]
    frac = {round(r["length_m"] * 1e6, 2): r["transferred"]
            for r in coup["rows"]}
    assert frac[24.38] == pytest.approx(1.0)
    assert frac[12.19] == pytest.approx(0.5)
    assert 0.5 < coup["supermode"]["ratio_to_cmt"] < 2.0
    assert (tmp_path / "mzi_curve.csv").exists()


def test_reproduce_meta_command(cfg_path, tmp_path):
    rc = main(["reproduce", "--config", cfg_path, "--out", str(tmp_path)])
    # out-of-band headline numbers are reported, not turned into an error
    assert rc == EXIT_OK
    for name in ("modes", "decay", "guide", "sweep", "lattice", "bpm", "mzi"):
        assert (tmp_path / f"runreport_{name}.json").exists()
    summary = json.loads((tmp_path / "acceptance_summary.json").read_text())
    ok = {c["name"]: c["ok"] for c in summary["checks"]}
    assert len(ok) >= 20
    assert ok["beta_TE00_865nm"] and ok["beta_TE01_865nm"]
    assert all(set(c) == {"name", "value", "target", "tol_pct", "ok"}
               for c in summary["checks"])


def test_determinism_hash_is_stable(cfg_path, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    rc1, rep1 = run("modes", cfg_path, a)
    cli._modes_cached.cache_clear()
    rc2, rep2 = run("modes", cfg_path, b)
    assert rc1 == rc2 == EXIT_OK
    assert rep1["determinism_hash"] == rep2["determinism_hash"]


def test_out_env_var(cfg_path, tmp_path, monkeypatch):
    outdir = tmp_path / "envout"
    monkeypatch.setenv("EVATRAP_OUT", str(outdir))
    monkeypatch.chdir(tmp_path)
    rc = main(["modes", "--config", cfg_path])
    assert rc == EXIT_OK
    assert (outdir / "runreport_modes.json").exists()


def test_grid_step_override(cfg_path, tmp_path):
    rc, report = run("modes", cfg_path, tmp_path, "--grid-step", "20")
    assert rc == EXIT_OK
    # config on disk still says 10 nm; the run used 20 nm
    assert report["config"]["grid"]["step"] == "10 nm"
    beta = report["outputs"]["modes"][0]["beta_per_m"]
    assert beta == pytest.approx(22.05e6, rel=0.02)


def test_negative_grid_step_rejected(cfg_path, tmp_path):
    rc, _ = run("modes", cfg_path, tmp_path, "--grid-step", "-5")
    assert rc == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    rc = main(["modes", "--config", str(tmp_path / "nope.json"),
               "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_invalid_json_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json at all")
    rc = main(["modes", "--config", str(bad), "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_unknown_key_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": {},
                               "light": COARSE_CONFIG["light"]}))
    rc = main(["modes", "--config", str(bad), "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_no_trap_minimum_exit_code(tmp_path):
    cfg = json.loads(json.dumps(COARSE_CONFIG))
    cfg["light"]["red"]["excitations"][0]["power"] = 0.0
    cfg["surface"]["permittivity"] = 1.0
    path = tmp_path / "notrap.json"
    path.write_text(json.dumps(cfg))
    rc = main(["guide", "--config", str(path), "--out", str(tmp_path)])
    assert rc == EXIT_NOTRAP


def test_solver_failure_exit_code(tmp_path):
    cfg = json.loads(json.dumps(COARSE_CONFIG))
    # a negative absorber coefficient is gain: the power watchdog trips
    cfg["bpm"]["absorber_kappa"] = -5.0
    path = tmp_path / "gain.json"
    path.write_text(json.dumps(cfg))
    rc = main(["bpm", "--config", str(path), "--out", str(tmp_path)])
    assert rc == EXIT_SOLVER


def test_unknown_command_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["frobnicate", "--out", str(tmp_path)])
    assert err.value.code == 2
