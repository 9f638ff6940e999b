"""Atomic data and elementary per-atom formulas for the two-color trap.

Everything here is a pure function of its arguments; heavier machinery
(mode solving, potential assembly) lives elsewhere.  Energies are in J
internally, with helpers to quote uK.
"""

from dataclasses import dataclass

from scipy.constants import c, hbar, k as k_B, pi

# 87Rb mass: 86.909180527 u
M_RB87 = 86.909180527 * 1.66053906660e-27


@dataclass(frozen=True)
class AtomSpecies:
    """D-line data for an alkali atom.

    gamma_D1/gamma_D2 are the spontaneous decay rates in s^-1 (for 87Rb,
    3.61e7 and 3.81e7; these are angular rates, not 2*pi*frequency).
    c3_factor is the dimensionless coefficient in C3 = c3_factor*hbar*Gamma
    of the surface-interaction interpolation formula.
    """

    name: str
    mass: float
    line_D1_wavelength: float
    line_D2_wavelength: float
    gamma_D1: float
    gamma_D2: float
    c3_factor: float = 0.113

    def omega_D1(self):
        return 2 * pi * c / self.line_D1_wavelength

    def omega_D2(self):
        return 2 * pi * c / self.line_D2_wavelength

    def validate(self):
        if self.mass <= 0:
            raise ValueError("atom mass must be positive")
        if self.line_D1_wavelength <= 0 or self.line_D2_wavelength <= 0:
            raise ValueError("line wavelengths must be positive")
        if not self.line_D2_wavelength < self.line_D1_wavelength:
            raise ValueError("expected D2 line below D1 line in wavelength")


RB87 = AtomSpecies(
    name="Rb87",
    mass=M_RB87,
    line_D1_wavelength=795e-9,
    line_D2_wavelength=780e-9,
    gamma_D1=3.61e7,
    gamma_D2=3.81e7,
)

# Closeness (in angular frequency) to a D line below which the far-detuned
# formulas are refused.  2pi * 100 GHz is still "far" by any trap standard.
RESONANCE_GUARD = 2 * pi * 100e9


class ResonanceError(ValueError):
    """Requested wavelength is too close to an atomic line."""


def recoil_energy(atom, wavelength):
    """Single-photon recoil energy (hbar*k)^2 / 2m in J."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return (hbar * 2 * pi / wavelength) ** 2 / (2 * atom.mass)


def _detunings(atom, wavelength):
    w = 2 * pi * c / wavelength
    d1 = w - atom.omega_D1()
    d2 = w - atom.omega_D2()
    for d in (d1, d2):
        if abs(d) < RESONANCE_GUARD:
            raise ResonanceError(
                f"{wavelength*1e9:.3f} nm is within the resonance guard of a D line"
            )
    return d1, d2


def fine_structure_detuning_factor(atom, wavelength):
    """Effective Gamma/Delta with D-line weights 1/3 (D1) and 2/3 (D2).

    Detunings follow Delta = omega_light - omega_line, so the factor is
    negative for light red of both lines; the dipole potential inherits the
    sign (red-detuned -> attractive, U < 0).
    """
    d1, d2 = _detunings(atom, wavelength)
    return atom.gamma_D1 / (3 * d1) + 2 * atom.gamma_D2 / (3 * d2)


def fine_structure_scattering_factor(atom, wavelength):
    """Effective (Gamma/Delta)^2 with the same 1/3, 2/3 line weights."""
    d1, d2 = _detunings(atom, wavelength)
    return atom.gamma_D1**2 / (3 * d1**2) + 2 * atom.gamma_D2**2 / (3 * d2**2)


def joule_to_uK(energy):
    """Energy in J -> temperature-equivalent in uK."""
    return energy / k_B * 1e6


def uK_to_joule(temp_uK):
    return temp_uK * 1e-6 * k_B
