"""Shared fixtures: one coarse-grid eigensolve pass reused by the whole suite.

The 10 nm grid keeps per-test cost around a second; the acceptance module
builds its own full-resolution fixtures and is the only slow part of the run.
"""

import pytest

from evatrap.constants import RB87
from evatrap.fields import ModeExcitation
from evatrap.geometry import SimulationGrid, WaveguideGeometry
from evatrap.modes import mode_by_label, solve_modes
from evatrap.potential import TwoColorSetup, build_potential

RED_WL = 865e-9
BLUE_WL = 700e-9


@pytest.fixture(scope="session")
def geometry():
    return WaveguideGeometry()


@pytest.fixture(scope="session")
def grid():
    # y stops above the pedestal foot; betas move at the 1e-4 level only
    return SimulationGrid(step=10e-9, x_min=-1.0e-6, x_max=1.0e-6,
                          y_min=-1.4e-6, y_max=1.0e-6)


@pytest.fixture(scope="session")
def red_modes(geometry, grid):
    return solve_modes(geometry, grid, RED_WL)


@pytest.fixture(scope="session")
def blue_modes(geometry, grid):
    return solve_modes(geometry, grid, BLUE_WL)


@pytest.fixture(scope="session")
def guide_setup(geometry, grid, red_modes, blue_modes):
    return TwoColorSetup(
        geometry=geometry, grid=grid, atom=RB87,
        red_wavelength=RED_WL, blue_wavelength=BLUE_WL,
        red=[ModeExcitation(mode_by_label(red_modes, "TE01"), 1.5e-3)],
        blue=[ModeExcitation(mode_by_label(blue_modes, "TE00"), 40e-3)])


@pytest.fixture(scope="session")
def guide_map(guide_setup):
    return build_potential(guide_setup)


@pytest.fixture(scope="session")
def lattice_setup(geometry, grid, red_modes, blue_modes):
    return TwoColorSetup(
        geometry=geometry, grid=grid, atom=RB87,
        red_wavelength=RED_WL, blue_wavelength=BLUE_WL,
        red=[ModeExcitation(mode_by_label(red_modes, "TE00"), 0.75e-3),
             ModeExcitation(mode_by_label(red_modes, "TE01"), 0.75e-3)],
        blue=[ModeExcitation(mode_by_label(blue_modes, "TE00"), 40e-3)])
