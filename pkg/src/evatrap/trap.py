"""Trap minima, depths, and figures of merit on the assembled potential.

Depth convention: U_D is the flood-fill level at which the minimum's
sub-level set first connects to the domain boundary through open vacuum
(escape to free space), minus the refined minimum.  Escape paths may not
run along the near-surface skin, where U_sur diverges and would shortcut
any barrier; capture by the surface is instead quantified separately as
surface_barrier, the level at which the sub-level set first touches that
skin (the corner-leak loss channel).
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.constants import hbar, k as k_B, pi

from . import constants
from .fields import ModeExcitation, beat_period
from .potential import build_potential, dipole_potential, scattering_rate


class NoTrapMinimum(RuntimeError):
    """No interior local minimum above the core top."""


@dataclass
class TrapMinimum:
    index: tuple              # grid index of the minimum cell (iy, ix[, iz first])
    position: tuple           # refined (x, y[, z]) in m
    offsets: tuple            # sub-cell refinement offsets per axis (cells)
    U_grid: float             # J at the grid cell
    U_refined: float          # J after per-axis quadratic refinement


def _local_minima_2d(U, y, require_above=0.0):
    fin = np.isfinite(U)
    ok = np.zeros_like(fin)
    ok[1:-1, 1:-1] = (fin[1:-1, 1:-1] & fin[1:-1, :-2] & fin[1:-1, 2:]
                      & fin[:-2, 1:-1] & fin[2:, 1:-1])
    ok[y <= require_above, :] = False
    lower = np.zeros_like(ok)
    with np.errstate(invalid="ignore"):
        lower[1:-1, 1:-1] = ((U[1:-1, 1:-1] < U[1:-1, :-2])
                             & (U[1:-1, 1:-1] < U[1:-1, 2:])
                             & (U[1:-1, 1:-1] < U[:-2, 1:-1])
                             & (U[1:-1, 1:-1] < U[2:, 1:-1]))
    return [tuple(i) for i in np.argwhere(ok & lower)]


def _quad_refine(u_m, u_c, u_p):
    """Sub-cell offset and value drop of the parabola through three samples."""
    den = u_m - 2 * u_c + u_p
    if den <= 0:
        return 0.0, 0.0
    s = 0.5 * (u_m - u_p) / den
    s = float(np.clip(s, -0.5, 0.5))
    drop = -0.125 * (u_m - u_p) ** 2 / den
    return s, drop


def find_trap_minimum(pmap):
    """Deepest local minimum above the core top, quadratically refined."""
    grid = pmap.grid
    x, y = grid.x, grid.y
    if pmap.is_stack:
        nz = pmap.U.shape[0]
        best = None
        for iz in range(nz):
            for iy, ix in _local_minima_2d(pmap.U[iz], y):
                u = pmap.U[iz, iy, ix]
                if best is None or u < best[0]:
                    best = (u, iz, iy, ix)
        if best is None:
            raise NoTrapMinimum(_diagnose(pmap.U[pmap.U.shape[0] // 2], x, y))
        _, iz, iy, ix = best
        sx, dx_drop = _quad_refine(pmap.U[iz, iy, ix - 1], pmap.U[iz, iy, ix],
                                   pmap.U[iz, iy, ix + 1])
        sy, dy_drop = _quad_refine(pmap.U[iz, iy - 1, ix], pmap.U[iz, iy, ix],
                                   pmap.U[iz, iy + 1, ix])
        if 0 < iz < nz - 1:
            sz, dz_drop = _quad_refine(pmap.U[iz - 1, iy, ix], pmap.U[iz, iy, ix],
                                       pmap.U[iz + 1, iy, ix])
        else:
            sz, dz_drop = 0.0, 0.0
        zs = np.asarray(pmap.z)
        dzstep = zs[1] - zs[0] if len(zs) > 1 else 0.0
        pos = (x[ix] + sx * grid.step, y[iy] + sy * grid.step,
               zs[iz] + sz * dzstep)
        u_grid = pmap.U[iz, iy, ix]
        return TrapMinimum((iz, iy, ix), pos, (sx, sy, sz), u_grid,
                           u_grid + dx_drop + dy_drop + dz_drop)

    cand = _local_minima_2d(pmap.U, y)
    if not cand:
        raise NoTrapMinimum(_diagnose(pmap.U, x, y))
    iy, ix = min(cand, key=lambda c: pmap.U[c])
    sx, dx_drop = _quad_refine(pmap.U[iy, ix - 1], pmap.U[iy, ix],
                               pmap.U[iy, ix + 1])
    sy, dy_drop = _quad_refine(pmap.U[iy - 1, ix], pmap.U[iy, ix],
                               pmap.U[iy + 1, ix])
    pos = (x[ix] + sx * grid.step, y[iy] + sy * grid.step)
    u_grid = pmap.U[iy, ix]
    return TrapMinimum((iy, ix), pos, (sx, sy), u_grid,
                       u_grid + dx_drop + dy_drop)


def _diagnose(U2d, x, y):
    ix0 = int(np.argmin(np.abs(x)))
    col = U2d[:, ix0]
    above = col[(y > 0) & np.isfinite(col)]
    trend = "empty"
    if above.size > 1:
        d = np.diff(above)
        if np.all(d >= 0):
            trend = "monotonically increasing"
        elif np.all(d <= 0):
            trend = "monotonically decreasing"
        else:
            trend = "non-monotone but minimum-free"
    return (f"no local potential minimum above the core top "
            f"(center-column potential is {trend} with height)")


def _flood_threshold(U, seed, escape):
    """Lowest level t at which {U < t} connects seed to the escape set."""
    finite = np.isfinite(U)
    lo = U[seed]
    hi = float(np.nanmax(U[finite])) + abs(float(np.nanmax(U[finite]))) * 1e-6 + 1e-30
    mask = finite & (U < hi)
    lab, _ = ndimage.label(mask)
    if not (lab[seed] and np.any(lab[escape & mask] == lab[seed])):
        return hi  # never connects; depth limited by the global ceiling
    for _ in range(60):
        t = 0.5 * (lo + hi)
        mask = finite & (U < t)
        lab, _ = ndimage.label(mask)
        if lab[seed] and np.any(lab[escape & mask] == lab[seed]):
            hi = t
        else:
            lo = t
    return 0.5 * (lo + hi)


def _edge_escape_2d(pmap):
    esc = np.zeros_like(pmap.exterior)
    esc[0, :] = esc[-1, :] = esc[:, 0] = esc[:, -1] = True
    return esc & pmap.exterior


def _surface_escape_2d(pmap):
    dielectric = ~np.isfinite(
        pmap.U if not pmap.is_stack else pmap.U[pmap.U.shape[0] // 2])
    near = ndimage.binary_dilation(dielectric, iterations=2)
    return near & pmap.exterior


def _mask_sheath(U, sheath, seed):
    """Block the near-surface skin so escape paths run through open vacuum.

    The skin is an independent loss channel (quantified by surface_barrier);
    leaving it open would let every escape path shortcut along the divergent
    U_sur trough at the dielectric faces.
    """
    if sheath.ndim < U.ndim:
        sheath = np.broadcast_to(sheath, U.shape)
    if sheath[seed]:
        return U  # minimum sits inside the skin; no open-vacuum route exists
    return np.where(sheath, np.nan, U)


def trap_depth(pmap, minimum):
    """(U_D, escape_level, surface_barrier) in J for a 2D slice map."""
    esc_edge = _edge_escape_2d(pmap)
    esc_surf = _surface_escape_2d(pmap)
    U_open = _mask_sheath(pmap.U, esc_surf, minimum.index)
    t_edge = _flood_threshold(U_open, minimum.index, esc_edge)
    t_surf = _flood_threshold(pmap.U, minimum.index, esc_surf)
    return (t_edge - minimum.U_refined, t_edge,
            t_surf - minimum.U_refined)


def lattice_site_depth(pmap, minimum):
    """Per-site depth in a z stack: the lower of the transverse escape
    barrier in the site's own plane and the longitudinal hopping barrier
    along the minimum line (the stack spans exactly one period, so the
    line's maximum is the barrier to the neighboring site)."""
    iz, iy, ix = minimum.index
    U_slice = pmap.U[iz]
    seed2d = (iy, ix)
    esc_edge = _edge_escape_2d(pmap)
    sheath = _surface_escape_2d(pmap)
    U_open = _mask_sheath(U_slice, sheath, seed2d)
    t_edge = _flood_threshold(U_open, seed2d, esc_edge)
    t_surf = _flood_threshold(U_slice, seed2d, sheath)
    line = pmap.U[:, iy, ix]
    t_z = float(np.nanmax(line)) if np.any(np.isfinite(line)) else t_edge
    t = min(t_edge, t_z)
    return (t - minimum.U_refined, t, t_surf - minimum.U_refined)


def _hessian(pmap, minimum):
    """Symmetric Hessian of U at the minimum cell by central differences.

    Returns (H, steps) with H in J/m^2 per axis pair, axis order (x, y[, z]).
    """
    h = pmap.grid.step
    if pmap.is_stack:
        iz, iy, ix = minimum.index
        zs = np.asarray(pmap.z)
        dz = zs[1] - zs[0]
        U = pmap.U
        # wrap z indices: the stack spans exactly one beat period
        zm, zp = (iz - 1) % U.shape[0], (iz + 1) % U.shape[0]
        c = U[iz, iy, ix]
        H = np.empty((3, 3))
        H[0, 0] = (U[iz, iy, ix - 1] - 2 * c + U[iz, iy, ix + 1]) / h**2
        H[1, 1] = (U[iz, iy - 1, ix] - 2 * c + U[iz, iy + 1, ix]) / h**2
        H[2, 2] = (U[zm, iy, ix] - 2 * c + U[zp, iy, ix]) / dz**2
        H[0, 1] = H[1, 0] = (U[iz, iy + 1, ix + 1] - U[iz, iy + 1, ix - 1]
                             - U[iz, iy - 1, ix + 1] + U[iz, iy - 1, ix - 1]) / (4 * h * h)
        H[0, 2] = H[2, 0] = (U[zp, iy, ix + 1] - U[zp, iy, ix - 1]
                             - U[zm, iy, ix + 1] + U[zm, iy, ix - 1]) / (4 * h * dz)
        H[1, 2] = H[2, 1] = (U[zp, iy + 1, ix] - U[zp, iy - 1, ix]
                             - U[zm, iy + 1, ix] + U[zm, iy - 1, ix]) / (4 * h * dz)
        return H
    iy, ix = minimum.index
    U = pmap.U
    c = U[iy, ix]
    H = np.empty((2, 2))
    H[0, 0] = (U[iy, ix - 1] - 2 * c + U[iy, ix + 1]) / h**2
    H[1, 1] = (U[iy - 1, ix] - 2 * c + U[iy + 1, ix]) / h**2
    H[0, 1] = H[1, 0] = (U[iy + 1, ix + 1] - U[iy + 1, ix - 1]
                         - U[iy - 1, ix + 1] + U[iy - 1, ix - 1]) / (4 * h * h)
    return H


def _axis_frequencies(H, mass):
    """Eigen-frequencies assigned to the axis of their dominant eigenvector."""
    vals, vecs = np.linalg.eigh(H)
    n = H.shape[0]
    omega = [None] * n
    used = set()
    # visit strongest-aligned pairs first
    order = sorted(range(n), key=lambda i: -np.max(np.abs(vecs[:, i])))
    for i in order:
        axes = np.argsort(-np.abs(vecs[:, i]))
        axis = next(a for a in axes if a not in used)
        used.add(axis)
        omega[axis] = np.sqrt(vals[i] / mass) if vals[i] > 0 else float("nan")
    return tuple(omega), vals


def _log_interp_delta(values3, s):
    """ln-quadratic interpolation delta at sub-cell offset s (sign-safe)."""
    v = np.asarray(values3, dtype=float)
    if np.any(np.abs(v) < 1e-300) or len(set(np.sign(v))) != 1:
        return 0.0
    l0, l1, l2 = np.log(np.abs(v))
    return 0.5 * s * (l2 - l0) + 0.5 * s**2 * (l0 - 2 * l1 + l2)


def _component_at_minimum(comp, minimum):
    """Component value at the refined minimum via per-axis log interpolation."""
    if comp.ndim == 3:
        iz, iy, ix = minimum.index
        sx, sy, sz = minimum.offsets
        center = comp[iz, iy, ix]
        d = _log_interp_delta(comp[iz, iy, ix - 1:ix + 2], sx)
        d += _log_interp_delta(comp[iz, iy - 1:iy + 2, ix], sy)
        if 0 < iz < comp.shape[0] - 1:
            d += _log_interp_delta(comp[iz - 1:iz + 2, iy, ix], sz)
    else:
        iy, ix = minimum.index
        sx, sy = minimum.offsets
        center = comp[iy, ix]
        d = _log_interp_delta(comp[iy, ix - 1:ix + 2], sx)
        d += _log_interp_delta(comp[iy - 1:iy + 2, ix], sy)
    return center * np.exp(d)


@dataclass
class TrapReport:
    """All figures of merit of one trap (guide slice or lattice site)."""

    x: float
    y_min: float
    z: float
    U_min_uK: float
    depth_uK: float
    escape_level_uK: float
    surface_barrier_uK: float
    omega: tuple              # rad/s per axis (x, y[, z])
    frequencies_kHz: tuple    # omega/2pi in kHz
    localization_nm: tuple
    Gamma_red: float
    Gamma_blue: float
    Gamma_sc: float
    tau_coh: float
    tau_trap: float           # depth/(Er_r*G_r + Er_b*G_b)
    tau_trap_halved: float    # same with the extra factor 2 in the denominator
    recoil_red_uK: float
    recoil_blue_uK: float
    mode_spacing_uK: float
    valid: bool
    hessian_eigenvalues: tuple
    note: str = ""

    def as_dict(self):
        def clean(v):
            if isinstance(v, tuple):
                return [clean(u) for u in v]
            if isinstance(v, float) and not np.isfinite(v):
                return None
            return v
        return {k: clean(v) for k, v in self.__dict__.items()}


def trap_report(pmap, minimum=None, note=""):
    """Full TrapReport for a potential map (finds the minimum if not given)."""
    if minimum is None:
        minimum = find_trap_minimum(pmap)
    setup = pmap.setup
    atom = setup.atom
    if pmap.is_stack:
        depth_J, escape_J, surf_J = lattice_site_depth(pmap, minimum)
        xpos, ypos, zpos = minimum.position
    else:
        depth_J, escape_J, surf_J = trap_depth(pmap, minimum)
        xpos, ypos = minimum.position
        zpos = 0.0

    H = _hessian(pmap, minimum)
    omega, eigs = _axis_frequencies(H, atom.mass)
    valid = bool(np.all(np.asarray(eigs) > 0))

    # recover each color's intensity at the refined minimum from its
    # potential component (U = prefactor * factor * I)
    Ur = _component_at_minimum(pmap.components["red"], minimum)
    Ub = _component_at_minimum(pmap.components["blue"], minimum)
    fr = dipole_potential(1.0, atom, setup.red_wavelength)
    fb = dipole_potential(1.0, atom, setup.blue_wavelength)
    Ir = Ur / fr if fr else 0.0
    Ib = Ub / fb if fb else 0.0
    G_r = scattering_rate(Ir, atom, setup.red_wavelength)
    G_b = scattering_rate(Ib, atom, setup.blue_wavelength)
    G = G_r + G_b

    Er_r = constants.recoil_energy(atom, setup.red_wavelength)
    Er_b = constants.recoil_energy(atom, setup.blue_wavelength)
    heating = Er_r * G_r + Er_b * G_b
    tau = depth_J / heating if heating > 0 else float("inf")

    finite_omega = [w for w in omega if np.isfinite(w) and w > 0]
    spacing = hbar * max(finite_omega) / k_B * 1e6 if finite_omega else float("nan")
    # localization = harmonic oscillator length sqrt(hbar/(m*omega)) per axis
    loc = tuple(
        np.sqrt(hbar / (atom.mass * w)) * 1e9 if np.isfinite(w) and w > 0
        else float("inf") for w in omega)

    return TrapReport(
        x=xpos, y_min=ypos, z=zpos,
        U_min_uK=constants.joule_to_uK(minimum.U_refined),
        depth_uK=constants.joule_to_uK(depth_J),
        escape_level_uK=constants.joule_to_uK(escape_J),
        surface_barrier_uK=constants.joule_to_uK(surf_J),
        omega=omega,
        frequencies_kHz=tuple(w / (2 * pi) / 1e3 if np.isfinite(w) else w
                              for w in omega),
        localization_nm=loc,
        Gamma_red=G_r, Gamma_blue=G_b, Gamma_sc=G,
        tau_coh=1.0 / G if G > 0 else float("inf"),
        tau_trap=tau, tau_trap_halved=tau / 2,
        recoil_red_uK=constants.joule_to_uK(Er_r),
        recoil_blue_uK=constants.joule_to_uK(Er_b),
        mode_spacing_uK=spacing,
        valid=valid,
        hessian_eigenvalues=tuple(float(v) for v in eigs),
        note=note)


def analyze_guide(setup):
    """Potential slice at z=0, its minimum, and the TrapReport."""
    pmap = build_potential(setup)
    report = trap_report(pmap)
    return pmap, report


def power_sweep(setup, red_powers, map_fn=map):
    """Guide analysis per red power (blue fixed); rows ordered as given.

    Returns (rows, diagnostics): rows are (P_red, TrapReport); diagnostics
    flags broken monotonicity of standoff/depth across increasing power.
    map_fn may be a thread pool's map; rows are independent.
    """
    def one(P):
        scale = P / setup.red_power()
        red = [ModeExcitation(e.mode, e.power * scale, e.phase)
               for e in setup.red]
        _, rep = analyze_guide(setup.with_red(red))
        return (P, rep)

    rows = list(map_fn(one, red_powers))
    diagnostics = []
    ordered = sorted(rows, key=lambda r: r[0])
    for (p0, r0), (p1, r1) in zip(ordered, ordered[1:]):
        if not r1.y_min < r0.y_min:
            diagnostics.append(f"standoff not decreasing between {p0} and {p1} W")
        if not r1.depth_uK > r0.depth_uK:
            diagnostics.append(f"depth not increasing between {p0} and {p1} W")
    return rows, diagnostics


def lattice_analysis(setup, z_stations=50):
    """Per-site analysis of the two-mode beat lattice over one period.

    The z stack is centered on a bright fringe.  With fewer than two red
    excitations (or a vanishing amplitude) the potential is z-uniform and
    the guide analysis is returned instead, with omega_z = 0.
    """
    total = setup.red_power()
    live = [e for e in setup.red if e.power > 1e-12 * total]
    if len(live) < 2:
        pmap, report = analyze_guide(setup)
        report.note = "degenerate lattice: single-mode red light, no z-modulation"
        report.omega = report.omega + (0.0,)
        report.frequencies_kHz = report.frequencies_kHz + (0.0,)
        report.localization_nm = report.localization_nm + (float("inf"),)
        return pmap, report, {"period": None, "corrugation_uK": 0.0}
    if len(live) != 2:
        raise ValueError("lattice analysis expects exactly two red modes")
    e0, e1 = live
    dbeta = e0.mode.beta - e1.mode.beta
    period = beat_period(e0.mode.beta, e1.mode.beta)
    dtheta = e0.phase - e1.phase
    z_bright = -dtheta / dbeta  # cross term maximal (bright fringe)
    z = z_bright + (np.arange(z_stations) - z_stations // 2) / z_stations * period
    pmap = build_potential(setup, z_values=z)
    report = trap_report(pmap)
    iz, iy, ix = find_trap_minimum(pmap).index
    along_z = pmap.U[:, iy, ix]
    corrugation = float(np.nanmax(along_z) - np.nanmin(along_z))
    return pmap, report, {
        "period": period,
        "corrugation_uK": constants.joule_to_uK(corrugation),
        "z_stations": int(z_stations),
    }


def guide_lattice_transition(setup, amplitude_pairs, total_red_power=None,
                             z_stations=50):
    """Reports for a scan of red-light (C0, C1) amplitude pairs.

    Each pair is mapped to mode powers P_n = |C_n|^2 * P_total and phases
    arg(C_n); pure single-mode pairs fall back to the guide analysis.
    Returns a list of (pair, report, lattice_info).
    """
    if len(setup.red) != 2:
        raise ValueError("transition scan needs a two-mode red excitation template")
    P_total = (total_red_power if total_red_power is not None
               else setup.red_power())
    m0, m1 = setup.red[0].mode, setup.red[1].mode
    out = []
    for pair in amplitude_pairs:
        c0, c1 = complex(pair[0]), complex(pair[1])
        red = [ModeExcitation(m0, abs(c0) ** 2 * P_total, float(np.angle(c0))),
               ModeExcitation(m1, abs(c1) ** 2 * P_total, float(np.angle(c1)))]
        sub = setup.with_red(red)
        _, report, info = lattice_analysis(sub, z_stations=z_stations)
        out.append(((c0, c1), report, info))
    return out


def surface_sensitivity(setup, permittivities=(2.1, 11.7)):
    """Trap depth for each surface permittivity; quantifies the U_sur spread."""
    from .potential import SurfaceParams
    depths = {}
    for eps in permittivities:
        sub = setup.with_surface(
            SurfaceParams(eps, setup.surface.reference_wavelength))
        depths[eps] = trap_report(build_potential(sub)).depth_uK
    vals = list(depths.values())
    return {"depth_uK": depths, "spread_uK": max(vals) - min(vals)}
