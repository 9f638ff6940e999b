"""Optical dipole + atom-surface potential assembly on the exterior region.

All potentials are in J on the grid; helpers quote uK.  Cells inside the
dielectric (and the half-cell skin on its faces) are masked to NaN - the
atom potential is only meaningful in vacuum.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c, g as g_earth, hbar, pi

from . import constants
from .fields import ModeExcitation, intensity, superpose
from .geometry import exterior_mask, surface_distance


def _prefactor(atom):
    return 3 * pi * c**2 / (2 * atom.omega_D2() ** 3)


def dipole_potential(I, atom, wavelength):
    """U_dip = (3*pi*c^2/2*omega0^3) * (Gamma/Delta)_eff * I, in J.

    Negative (attractive) for red detuning, positive for blue, following
    Delta = omega_light - omega_line.
    """
    factor = constants.fine_structure_detuning_factor(atom, wavelength)
    return _prefactor(atom) * factor * I


def scattering_rate(I, atom, wavelength):
    """Photon scattering rate (s^-1) of one far-detuned field at intensity I."""
    factor = constants.fine_structure_scattering_factor(atom, wavelength)
    return _prefactor(atom) / hbar * factor * I


def surface_potential(distance, permittivity, reference_wavelength,
                      gamma, c3_factor=0.113):
    """Attractive atom-surface potential (J) from the bridging formula.

    Uses the rescaled distance z = 2*pi*l/lambda_ref (dimensionless):
    U = -[(1+1.098 z)^-1 - 0.00493 z (1+0.00987 z^3 - 0.00064 z^4)^-1]
        * ((eps-1)/(eps+1)) * c3_factor*hbar*gamma / z^3
    which walks the van der Waals l^-3 regime into the Casimir l^-4 regime.
    """
    l = np.asarray(distance, dtype=float)
    if np.any(l <= 0):
        raise ValueError("surface distance must be positive")
    z = 2 * pi * l / reference_wavelength
    bracket = 1.0 / (1 + 1.098 * z) \
        - 0.00493 * z / (1 + 0.00987 * z**3 - 0.00064 * z**4)
    eps_term = (permittivity - 1) / (permittivity + 1)
    out = -bracket * eps_term * c3_factor * hbar * gamma / z**3
    return float(out) if np.isscalar(distance) else out


@dataclass(frozen=True)
class SurfaceParams:
    permittivity: float = 2.1
    reference_wavelength: float = 780e-9


@dataclass
class TwoColorSetup:
    """Everything needed to assemble U = U_opt + U_sur on a grid.

    red/blue excitation lists hold ModeExcitation entries whose modes were
    solved on `grid` for `geometry`.
    """

    geometry: object
    grid: object
    atom: object
    red_wavelength: float
    blue_wavelength: float
    red: list
    blue: list
    surface: SurfaceParams = field(default_factory=SurfaceParams)
    include_gravity: bool = False

    def red_power(self):
        return sum(e.power for e in self.red)

    def blue_power(self):
        return sum(e.power for e in self.blue)

    def with_red(self, excitations):
        return TwoColorSetup(self.geometry, self.grid, self.atom,
                             self.red_wavelength, self.blue_wavelength,
                             list(excitations), self.blue, self.surface,
                             self.include_gravity)

    def with_surface(self, surface):
        return TwoColorSetup(self.geometry, self.grid, self.atom,
                             self.red_wavelength, self.blue_wavelength,
                             self.red, self.blue, surface,
                             self.include_gravity)

    def validate(self):
        lines = (self.atom.line_D1_wavelength, self.atom.line_D2_wavelength)
        if not self.red_wavelength > max(lines):
            raise ValueError("red wavelength must lie above both atomic lines")
        if not self.blue_wavelength < min(lines):
            raise ValueError("blue wavelength must lie below both atomic lines")


@dataclass
class PotentialMap:
    """Total potential and its components on the exterior region.

    U arrays are (ny, nx) for a single z slice or (nz, ny, nx) for a stack;
    NaN marks dielectric/masked cells.  Components: 'red', 'blue',
    'surface' (and 'gravity' when enabled).
    """

    grid: object
    z: object                 # scalar or 1D array of z stations
    U: np.ndarray
    components: dict
    exterior: np.ndarray      # (ny, nx) bool
    setup: object = None

    @property
    def is_stack(self):
        return self.U.ndim == 3

    def in_uK(self):
        return constants.joule_to_uK(self.U)


def _color_intensity(excitations, z):
    return intensity(superpose(excitations, z))


def build_potential(setup, z_values=None):
    """Assemble the PotentialMap at z=0 (guide) or over a z stack (lattice)."""
    setup.validate()
    grid = setup.grid
    ext = exterior_mask(setup.geometry, grid)
    ldist = surface_distance(setup.geometry, grid)
    atom = setup.atom

    with np.errstate(divide="ignore", invalid="ignore"):
        U_sur = np.where(
            ext,
            surface_potential(np.maximum(ldist, 1e-15),
                              setup.surface.permittivity,
                              setup.surface.reference_wavelength,
                              atom.gamma_D2, atom.c3_factor),
            np.nan)

    comps = {"surface": U_sur}
    if setup.include_gravity:
        _, Y = grid.meshgrid()
        comps["gravity"] = np.where(ext, atom.mass * g_earth * Y, np.nan)

    zs = 0.0 if z_values is None else np.asarray(z_values, dtype=float)

    def optical(excitations, wavelength):
        if not excitations:
            shape = ((grid.ny, grid.nx) if z_values is None
                     else (len(zs), grid.ny, grid.nx))
            return np.where(ext, 0.0, np.nan) * np.ones(shape)
        if z_values is None:
            I = _color_intensity(excitations, 0.0)
            return np.where(ext, dipole_potential(I, atom, wavelength), np.nan)
        out = np.empty((len(zs), grid.ny, grid.nx))
        for k, zk in enumerate(zs):
            I = _color_intensity(excitations, zk)
            out[k] = np.where(ext, dipole_potential(I, atom, wavelength), np.nan)
        return out

    comps["red"] = optical(setup.red, setup.red_wavelength)
    comps["blue"] = optical(setup.blue, setup.blue_wavelength)

    if z_values is not None:
        base = U_sur[None, :, :]
        if "gravity" in comps:
            base = base + comps["gravity"][None, :, :]
        U = comps["red"] + comps["blue"] + base
    else:
        U = comps["red"] + comps["blue"] + U_sur
        if "gravity" in comps:
            U = U + comps["gravity"]
    return PotentialMap(grid, zs, U, comps, ext, setup)


def scattering_rates_at(setup, x, y, z=0.0):
    """(Gamma_red, Gamma_blue) at a physical point, from the live fields."""
    from .fields import intensity_at
    Ir = intensity_at(superpose(setup.red, z), setup.grid, x, y)
    Ib = intensity_at(superpose(setup.blue, z), setup.grid, x, y)
    return (scattering_rate(Ir, setup.atom, setup.red_wavelength),
            scattering_rate(Ib, setup.atom, setup.blue_wavelength))
