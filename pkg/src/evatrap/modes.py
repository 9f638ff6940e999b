"""Transverse eigenmode solver for the channel waveguide.

Solves the scalar reduced wave equation (d2/dx2 + d2/dy2 + n^2 k0^2) E =
beta^2 E on the cell-centered grid with homogeneous Dirichlet walls, via
shift-invert ARPACK targeting the top of the guided window.  TE uses the
scalar operator as written; TM00 (only needed for the decay-length
comparison) uses the usual semivectorial 1/n^2 interface corrections on the
vertical stencil.

Modes are power-normalized: 0.5*eps0*c * integral(E^2) dA = 1 W, so a modal
amplitude sqrt(P) carries P watts.
"""

import csv
import json

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.constants import c, epsilon_0, pi

from .geometry import build_index_profile


class SolverError(RuntimeError):
    """Eigen-iteration failed or returned unusable modes."""


class FitError(RuntimeError):
    """Decay-length fit could not be performed on the requested line."""


class GuidedMode:
    """A guided eigenmode: label, propagation constant and normalized field.

    field is real, shape (ny, nx), sign-fixed so the peak is positive, and
    normalized to carry 1 W.
    """

    def __init__(self, label, beta, wavelength, polarization, field, grid,
                 residual):
        self.label = label
        self.beta = beta
        self.wavelength = wavelength
        self.polarization = polarization
        self.field = field
        self.grid = grid
        self.residual = residual

    @property
    def k0(self):
        return 2 * pi / self.wavelength

    @property
    def n_eff(self):
        return self.beta / self.k0

    def intensity(self, power=1.0):
        """I(x,y) in W/m^2 when the mode carries `power` watts."""
        return 0.5 * epsilon_0 * c * power * self.field**2

    def __repr__(self):
        return (f"GuidedMode({self.label}, beta={self.beta:.6g}, "
                f"lambda={self.wavelength*1e9:.0f} nm)")


def _count_nodes(values, threshold):
    v = values[np.abs(values) > threshold]
    if v.size < 2:
        return 0
    return int(np.sum(np.sign(v[1:]) != np.sign(v[:-1])))


def _label_mode(field, polarization):
    iy, ix = np.unravel_index(np.argmax(np.abs(field)), field.shape)
    thr = 1e-3 * np.abs(field).max()
    nodes_x = _count_nodes(field[iy, :], thr)
    nodes_y = _count_nodes(field[:, ix], thr)
    return f"{polarization}{nodes_x}{nodes_y}", (iy, ix)


def _te_operator(n_map, step, k0):
    ny, nx = n_map.shape
    N = nx * ny
    d2 = 1.0 / step**2
    main = -4.0 * d2 + (n_map.ravel() * k0) ** 2
    ex = np.full(N - 1, d2)
    ex[np.arange(1, N) % nx == 0] = 0.0  # no wrap across row ends
    ey = np.full(N - nx, d2)
    return sp.diags([main, ex, ex, ey, ey], [0, 1, -1, nx, -nx], format="csc")


def _tm_operator(n_map, step, k0):
    # Semivectorial H-field-style stencil: vertical neighbors weighted by
    # 2*n_nb^2/(n^2+n_nb^2) across horizontal interfaces; lateral part scalar.
    ny, nx = n_map.shape
    d2 = 1.0 / step**2
    n2 = n_map**2
    n2_n = np.vstack([n2[1:, :], n2[-1:, :]])
    n2_s = np.vstack([n2[:1, :], n2[:-1, :]])
    cN = 2 * d2 * n2_n / (n2 + n2_n)
    cS = 2 * d2 * n2_s / (n2 + n2_s)
    main = -2.0 * d2 - 2 * d2 * (n2 / (n2 + n2_n) + n2 / (n2 + n2_s)) + n2 * k0**2
    ex = np.full(nx * ny - 1, d2)
    ex[np.arange(1, nx * ny) % nx == 0] = 0.0
    up = cN.ravel()[:-nx]     # coupling from cell row iy to iy+1
    down = cS.ravel()[nx:]    # coupling from cell row iy to iy-1
    return sp.diags([main.ravel(), ex, ex, up, down],
                    [0, 1, -1, nx, -nx], format="csc")


def solve_modes(geometry, grid, wavelength, polarization="TE", max_modes=6,
                index_map=None):
    """All guided modes at one wavelength, sorted by descending beta.

    Returns an empty list when nothing is guided (no index contrast, all
    modes cut off); raises SolverError only on eigensolver failure.  An
    explicit index_map overrides the one built from `geometry` (used for
    perturbed-index and multi-core solves); the guided window still comes
    from the geometry's substrate/core indices.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    if polarization not in ("TE", "TM"):
        raise ValueError(f"unknown polarization {polarization!r}")
    n_map = build_index_profile(geometry, grid) if index_map is None else index_map
    k0 = 2 * pi / wavelength
    lo, hi = geometry.substrate_index * k0, geometry.core_index * k0
    if hi <= lo:
        return []
    N = grid.nx * grid.ny
    k = min(max_modes + 2, N - 2)
    sigma = hi**2
    v0 = np.ones(N)
    try:
        if polarization == "TE":
            A = _te_operator(n_map, grid.step, k0)
            vals, vecs = spla.eigsh(A, k=k, sigma=sigma, which="LM", v0=v0)
        else:
            A = _tm_operator(n_map, grid.step, k0)
            vals, vecs = spla.eigs(A, k=k, sigma=sigma, which="LM", v0=v0)
            if np.abs(vals.imag).max() > 1e-6 * np.abs(vals.real).max():
                raise SolverError("semivectorial eigenvalues not real")
            vals, vecs = vals.real, vecs.real
    except spla.ArpackNoConvergence as err:
        raise SolverError(f"ARPACK did not converge: {err}") from err

    order = np.argsort(-vals)
    modes = []
    for idx in order:
        lam2 = vals[idx]
        if lam2 <= lo**2 or lam2 >= hi**2:
            continue
        beta = np.sqrt(lam2)
        E = vecs[:, idx].reshape(grid.ny, grid.nx).copy()
        label, (iy, ix) = _label_mode(E, polarization)
        if E[iy, ix] < 0:
            E = -E  # node counts are sign-invariant, label stands
        power = 0.5 * epsilon_0 * c * np.sum(E**2) * grid.step**2
        E /= np.sqrt(power)
        resid = _residual(A, E.ravel(), lam2)
        modes.append(GuidedMode(label, beta, wavelength, polarization, E,
                                grid, resid))
        if len(modes) >= max_modes:
            break
    return modes


def _residual(A, v, lam):
    return np.linalg.norm(A @ v - lam * v) / (abs(lam) * np.linalg.norm(v))


def mode_by_label(modes, label):
    for m in modes:
        if m.label == label:
            return m
    raise KeyError(f"no guided mode labeled {label} "
                   f"(have {[m.label for m in modes]})")


def overlap(mode_a, mode_b):
    """Normalized field overlap integral; ~0 for distinct eigenmodes."""
    a, b = mode_a.field.ravel(), mode_b.field.ravel()
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def decay_length(mode, window=(None, 0.5e-6)):
    """Evanescent decay length above the core top from |E| ~ e^(-y/L).

    Least-squares log-linear fit along the vertical line through the field
    antinode at the surface, over [surface + 2 cells, surface + 0.5 um].
    """
    grid = mode.grid
    y = grid.y
    surface_rows = np.where(y > 0)[0]
    if surface_rows.size == 0:
        raise FitError("grid has no region above the core top")
    row0 = surface_rows[0]
    ix = int(np.argmax(np.abs(mode.field[row0, :])))
    lo = window[0] if window[0] is not None else y[row0] + 2 * grid.step
    hi = window[1]
    sel = (y >= lo) & (y <= hi)
    if np.count_nonzero(sel) < 4:
        raise FitError("fewer than 4 samples in the fit window")
    col = mode.field[sel, ix]
    sign = np.sign(mode.field[row0, ix])
    if np.any(sign * col <= 0):
        raise FitError("field changes sign along the probe line")
    amp = np.abs(col)
    if np.any(np.diff(amp) >= 0):
        raise FitError("field is not monotonically decaying in the window")
    slope, _ = np.polyfit(y[sel], np.log(amp), 1)
    if slope >= 0:
        raise FitError("fitted decay slope is non-negative")
    return -1.0 / slope


def decay_length_scalar_estimate(mode, clad_index=1.0):
    """Closed-form vacuum decay constant 1/sqrt(beta^2 - k0^2)."""
    k_clad = clad_index * mode.k0
    if mode.beta <= k_clad:
        raise ValueError("mode is radiative in the cladding (beta <= n_clad*k0)")
    return 1.0 / np.sqrt(mode.beta**2 - k_clad**2)


def relative_decay_difference(L_red, L_blue):
    """alpha_L = (L_red - L_blue)/L_blue."""
    if L_blue <= 0:
        raise ValueError("L_blue must be positive")
    return (L_red - L_blue) / L_blue


def dispersion_scan(geometry, grid, wavelengths, labels=("TE00", "TE01", "TM00")):
    """Rows of (wavelength, label, beta, L) across a wavelength scan.

    Cut-off modes yield rows with beta = L = None instead of failing the
    whole scan.
    """
    rows = []
    for lam in sorted(wavelengths):
        pols = sorted({lab[:2] for lab in labels})
        found = {}
        for pol in pols:
            for m in solve_modes(geometry, grid, lam, polarization=pol):
                found[m.label] = m
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


def export_mode_csv(mode, csv_path, json_path=None):
    """Field dump as (x, y, E) rows plus a JSON header."""
    grid = mode.grid
    x, y = grid.x, grid.y
    with open(csv_path, "w", newline="") as fh:
        wtr = csv.writer(fh)
        wtr.writerow(["x_m", "y_m", "E"])
        for iy in range(grid.ny):
            for ix in range(grid.nx):
                wtr.writerow([f"{x[ix]:.9e}", f"{y[iy]:.9e}",
                              f"{mode.field[iy, ix]:.9e}"])
    if json_path is not None:
        header = {"label": mode.label, "beta_per_m": mode.beta,
                  "wavelength_m": mode.wavelength, "n_eff": mode.n_eff,
                  "normalization": "0.5*eps0*c*integral(E^2) dA = 1 W",
                  "residual": mode.residual}
        with open(json_path, "w") as fh:
            json.dump(header, fh, indent=2)
