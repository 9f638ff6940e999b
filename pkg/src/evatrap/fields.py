"""Mode superposition, intensities, and the axial two-mode beat.

Complex amplitudes follow C_n = sqrt(P_n) * exp(i*theta_n) against the 1 W
mode normalization, so the transverse integral of intensity equals the total
launched power.
"""

from dataclasses import dataclass

import numpy as np
from scipy.constants import c, epsilon_0, pi


class CompositionError(ValueError):
    """Excitations cannot be combined (different grids or wavelengths)."""


@dataclass(frozen=True)
class ModeExcitation:
    mode: object          # GuidedMode
    power: float          # W
    phase: float = 0.0    # rad

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("power must be non-negative")

    @property
    def amplitude(self):
        return np.sqrt(self.power) * np.exp(1j * self.phase)


def _check_same_family(excitations):
    if not excitations:
        raise CompositionError("empty excitation list")
    lam0 = excitations[0].mode.wavelength
    grid0 = excitations[0].mode.grid
    for exc in excitations[1:]:
        if exc.mode.wavelength != lam0:
            raise CompositionError("cannot superpose modes of different wavelengths")
        if exc.mode.grid is not grid0 and (
                exc.mode.grid.nx != grid0.nx or exc.mode.grid.ny != grid0.ny):
            raise CompositionError("cannot superpose modes on different grids")


def superpose(excitations, z=0.0):
    """Complex field sum C_n E_n(x,y) exp(i(beta_n z + theta_n)) at one z."""
    _check_same_family(excitations)
    out = np.zeros(excitations[0].mode.field.shape, dtype=complex)
    for exc in excitations:
        out += exc.amplitude * np.exp(1j * exc.mode.beta * z) * exc.mode.field
    return out


def intensity(field):
    """I = 0.5*eps0*c*|phi|^2 for a complex or real field array."""
    return 0.5 * epsilon_0 * c * np.abs(field) ** 2


def intensity_at(field, grid, x, y):
    """Bilinearly interpolated intensity at a physical point."""
    xs, ys = grid.x, grid.y
    if not (xs[0] <= x <= xs[-1] and ys[0] <= y <= ys[-1]):
        raise ValueError("query point outside the grid")
    I = intensity(field)
    ix = min(np.searchsorted(xs, x), len(xs) - 1)
    iy = min(np.searchsorted(ys, y), len(ys) - 1)
    ix0, iy0 = max(ix - 1, 0), max(iy - 1, 0)
    tx = 0.0 if ix == ix0 else (x - xs[ix0]) / (xs[ix] - xs[ix0])
    ty = 0.0 if iy == iy0 else (y - ys[iy0]) / (ys[iy] - ys[iy0])
    top = I[iy0, ix0] * (1 - tx) + I[iy0, ix] * tx
    bot = I[iy, ix0] * (1 - tx) + I[iy, ix] * tx
    return top * (1 - ty) + bot * ty


def integrated_power(field, grid):
    """Transverse quadrature of I; equals launched power for clean modes."""
    return float(np.sum(intensity(field)) * grid.step**2)


def beat_period(beta0, beta1):
    """Two-mode interference period 2*pi/|beta0 - beta1| along z."""
    if beta0 == beta1:
        raise ValueError("degenerate propagation constants have no beat")
    return 2 * pi / abs(beta0 - beta1)


def two_mode_intensity_terms(exc0, exc1):
    """DC and cross-term maps of a two-mode beat.

    I(x,y,z) = dc + cross * cos(dbeta*z + dtheta) with
    dc = 0.5*eps0*c*(P0 E0^2 + P1 E1^2) and
    cross = 0.5*eps0*c*2*sqrt(P0 P1) E0 E1; dbeta = beta0 - beta1,
    dtheta = theta0 - theta1.
    """
    _check_same_family([exc0, exc1])
    half = 0.5 * epsilon_0 * c
    dc = half * (exc0.power * exc0.mode.field**2
                 + exc1.power * exc1.mode.field**2)
    cross = half * 2 * np.sqrt(exc0.power * exc1.power) \
        * exc0.mode.field * exc1.mode.field
    dbeta = exc0.mode.beta - exc1.mode.beta
    dtheta = exc0.phase - exc1.phase
    return dc, cross, dbeta, dtheta


def beat_intensity_stack(exc0, exc1, z_values):
    """I(x,y,z) over the requested z stations, shape (nz, ny, nx)."""
    dc, cross, dbeta, dtheta = two_mode_intensity_terms(exc0, exc1)
    z = np.asarray(z_values, dtype=float)
    return dc[None, :, :] + cross[None, :, :] * np.cos(
        dbeta * z[:, None, None] + dtheta)
