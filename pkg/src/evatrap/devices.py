"""Mode-converter building blocks: MZI splitter, phase shifter, coupler.

Amplitude vectors live in the (TE00, TE01) modal basis of the output
waveguide; all transfer matrices are exactly unitary by construction, and
the physics enters only through the phase theta accumulated in the
index-shifted MZI arm.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.constants import pi

from .modes import mode_by_label, solve_modes


def mzi_matrix(theta):
    """Transfer matrix of the balanced interferometer for arm phase theta.

    Columns map input (TE00, TE01) amplitudes to output amplitudes:
    theta = 0 passes the input through, theta = pi swaps the modes.
    """
    ct, st = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[ct, 1j * st],
                     [1j * st, ct]])


def mzi_apply(theta, amplitudes):
    out = mzi_matrix(theta) @ np.asarray(amplitudes, dtype=complex)
    return out[0], out[1]


def coupler_matrix(length, coupling_length):
    """Directional-coupler transfer over `length` with full transfer at
    coupling_length: kappa = pi/(2*L_c)."""
    kappa = pi / (2.0 * coupling_length)
    ckl, skl = np.cos(kappa * length), np.sin(kappa * length)
    return np.array([[ckl, 1j * skl],
                     [1j * skl, ckl]])


def coupler_apply(length, coupling_length, amplitudes):
    out = coupler_matrix(length, coupling_length) @ np.asarray(amplitudes,
                                                               dtype=complex)
    return out[0], out[1]


def transferred_fraction(length, coupling_length):
    """Power fraction moved to the cross port after `length`."""
    return float(np.sin(pi * length / (2.0 * coupling_length)) ** 2)


def modulator_phase(geometry, grid, wavelength, delta_n, length,
                    label="TE00"):
    """Arm phase theta = [beta(n_g + dn) - beta(n_g)] * length.

    Both propagation constants come from full eigen-solves; raises KeyError
    if the mode is cut off at either index.
    """
    base = solve_modes(geometry, grid, wavelength)
    shifted_geometry = dataclasses.replace(
        geometry, core_index=geometry.core_index + delta_n)
    shifted = solve_modes(shifted_geometry, grid, wavelength)
    b0 = mode_by_label(base, label).beta
    b1 = mode_by_label(shifted, label).beta
    return (b1 - b0) * length


@dataclass
class MziDevice:
    """An MZI mode splitter with an index-modulated arm.

    phase_per_dn is the calibrated linear slope d(theta)/d(dn); calibrate()
    fills it from one eigen-solve pair so subsequent dn scans are cheap.
    """

    geometry: object
    grid: object
    wavelength: float
    arm_length: float
    label: str = "TE00"
    phase_per_dn: float = None

    def calibrate(self, reference_dn=0.01012):
        theta = modulator_phase(self.geometry, self.grid, self.wavelength,
                                reference_dn, self.arm_length, self.label)
        self.phase_per_dn = theta / reference_dn
        return self.phase_per_dn

    def phase(self, delta_n, exact=False):
        if exact or self.phase_per_dn is None:
            return modulator_phase(self.geometry, self.grid, self.wavelength,
                                   delta_n, self.arm_length, self.label)
        return self.phase_per_dn * delta_n

    def output_amplitudes(self, delta_n, inputs=(1.0, 0.0), exact=False):
        return mzi_apply(self.phase(delta_n, exact=exact), inputs)


def superposition_vs_dn(device, dn_values, inputs=(1.0, 0.0)):
    """(dn, theta, |c0|^2, |c1|^2) rows over an index-shift scan."""
    if device.phase_per_dn is None:
        device.calibrate()
    rows = []
    for dn in dn_values:
        theta = device.phase(dn)
        c0, c1 = mzi_apply(theta, inputs)
        rows.append((dn, theta, abs(c0) ** 2, abs(c1) ** 2))
    return rows


def second_core_index_map(geometry, grid, gap):
    """Index profile of a single core displaced diagonally up-right.

    The core occupies x in [w/2 + gap/sqrt(2), ...], y in [gap/sqrt(2), ...]
    so that its lower-left corner sits a distance `gap` from the upper-right
    corner of the standard core. No pedestal: the displaced guide hangs in
    the cladding.
    """
    X, Y = grid.meshgrid()
    w, h = geometry.core_width, geometry.core_height
    d = gap / np.sqrt(2.0)
    n = np.full(X.shape, geometry.clad_index)
    n[(X >= w / 2 + d) & (X <= w / 2 + d + w)
      & (Y >= d) & (Y <= d + h)] = geometry.core_index
    return n


def two_core_index_map(geometry, grid, gap):
    """Index profile of the diagonal two-core coupler.

    The standard core (with pedestal) plus a second core offset up and to
    the right with corner-to-corner clearance `gap`. A purely horizontal or
    vertical offset would forbid the TE10 <-> TE01 exchange by parity, so
    the off-axis placement is what makes the converter work.
    """
    from .geometry import build_index_profile
    return np.maximum(build_index_profile(geometry, grid),
                      second_core_index_map(geometry, grid, gap))


def supermode_coupling_estimate(geometry, grid, wavelength, gap,
                                source_label="TE10", target_label="TE01"):
    """kappa of the TE10 -> TE01 exchange from the supermode splitting.

    Solves both isolated guides and the combined structure, picks the
    supermode pair with the largest total projection on the isolated
    (source, target) doublet, and corrects the half-splitting S for the
    residual phase mismatch: kappa = sqrt(S^2 - delta^2) with
    delta = (beta_source - beta_target)/2. All four first-excited modes
    hybridize at small gaps, so this is a coarse estimate.
    """
    from .modes import overlap
    source = mode_by_label(solve_modes(geometry, grid, wavelength),
                           source_label)
    displaced = solve_modes(geometry, grid, wavelength,
                            index_map=second_core_index_map(geometry, grid,
                                                            gap))
    target = mode_by_label(displaced, target_label)
    super_modes = solve_modes(geometry, grid, wavelength, max_modes=8,
                              index_map=two_core_index_map(geometry, grid,
                                                           gap))
    if len(super_modes) < 2:
        raise ValueError("fewer than two supermodes found")
    ranked = sorted(super_modes,
                    key=lambda m: -(abs(overlap(m, source)) ** 2
                                    + abs(overlap(m, target)) ** 2))
    pair = ranked[:2]
    half_split = abs(pair[0].beta - pair[1].beta) / 2.0
    delta = (source.beta - target.beta) / 2.0
    kappa = float(np.sqrt(max(half_split ** 2 - delta ** 2, 0.0)))
    return kappa, pair
