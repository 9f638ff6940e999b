"""1D lattice from a TE00 + TE01 beat, checked against propagation.

Splitting the red power between the two guided modes makes the
intensity above the core oscillate along z with period 2*pi/dbeta.
The blue light is z-uniform, so the trap breaks into a chain of sites.
The same superposition is then marched with the beam propagation
method and the fitted beat period is compared with the eigenvalue
prediction.  Finishes with the guide-to-lattice crossover driven by an
interferometer splitting angle.
"""

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from evatrap import constants
from evatrap.bpm import fit_beat_length, propagate
from evatrap.devices import mzi_apply
from evatrap.fields import ModeExcitation, beat_period
from evatrap.geometry import SimulationGrid, WaveguideGeometry
from evatrap.modes import mode_by_label, solve_modes
from evatrap.potential import SurfaceParams, TwoColorSetup
from evatrap.trap import guide_lattice_transition, lattice_analysis

geometry = WaveguideGeometry()
grid = SimulationGrid(step=10e-9, x_min=-1.0e-6, x_max=1.0e-6,
                      y_min=-1.4e-6, y_max=1.0e-6)

red_modes = solve_modes(geometry, grid, 865e-9)
blue_modes = solve_modes(geometry, grid, 700e-9)
te00 = mode_by_label(red_modes, "TE00")
te01 = mode_by_label(red_modes, "TE01")

period = beat_period(te00.beta, te01.beta)
print(f"dbeta = {te00.beta - te01.beta:.5e} /m "
      f"-> beat period {period * 1e6:.4f} um")

# Equal red power in both modes, blue unchanged from the guide case.
setup = TwoColorSetup(geometry, grid, constants.RB87, 865e-9, 700e-9,
                      [ModeExcitation(te00, 0.75e-3),
                       ModeExcitation(te01, 0.75e-3)],
                      [ModeExcitation(mode_by_label(blue_modes, "TE00"),
                                      40e-3)],
                      SurfaceParams(2.1, 780e-9), include_gravity=True)
pmap, report, info = lattice_analysis(setup, z_stations=24)
print(f"site depth  {report.depth_uK:.1f} uK, "
      f"corrugation {info['corrugation_uK']:.1f} uK")
print(f"frequencies {report.frequencies_kHz[0]:.0f} / "
      f"{report.frequencies_kHz[1]:.0f} / {report.frequencies_kHz[2]:.0f} "
      f"kHz (x / y / z)")

# Cross-check the period by actually propagating the two-mode field.
bgrid = SimulationGrid(step=20e-9, x_min=-0.8e-6, x_max=0.8e-6,
                       y_min=-0.8e-6, y_max=0.8e-6)
bmodes = solve_modes(geometry, bgrid, 865e-9)
launch = [ModeExcitation(mode_by_label(bmodes, "TE00"), 0.75e-3),
          ModeExcitation(mode_by_label(bmodes, "TE01"), 0.75e-3)]
result = propagate(geometry, bgrid, 865e-9, launch, 3.0e-6, dz=10e-9)
fit, _ = fit_beat_length(result, "TE00", "TE01", period)
print(f"propagated fit {fit * 1e6:.4f} um "
      f"({(fit / period - 1) * 100:+.2f}% vs eigenvalue prediction)")

# Turning the splitting angle moves all red power into one mode and
# melts the lattice back into a smooth guide.
thetas = [np.pi / 2, 5 * np.pi / 6, np.pi]
pairs = [mzi_apply(t, (1.0, 0.0)) for t in thetas]
scan = guide_lattice_transition(setup, pairs, total_red_power=1.5e-3,
                                z_stations=16)
print("\ntheta (deg)  corrugation (uK)")
for t, (_, _, inf) in zip(thetas, scan):
    print(f"{np.degrees(t):10.0f} {inf['corrugation_uK']:14.2f}")

# Figure: potential along z at the site height, and the y-z landscape.
zs = np.asarray(pmap.z)
ix0 = int(np.argmin(np.abs(grid.x)))
iy0 = int(np.argmin(np.abs(grid.y - report.y_min)))
toK = constants.joule_to_uK

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
ax1.plot(zs * 1e6, toK(pmap.U[:, iy0, ix0]), "k.-")
ax1.set_ylabel("U at site height (uK)")
ax1.set_title(f"beat period {period * 1e6:.3f} um")

yz = toK(pmap.U[:, :, ix0]).T
lim = 3 * abs(report.U_min_uK)
im = ax2.pcolormesh(zs * 1e6, grid.y * 1e6, np.clip(yz, -lim, lim),
                    cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
ax2.set_ylim(-0.1, 0.5)
ax2.set_xlabel("z (um)")
ax2.set_ylabel("y (um)")
fig.colorbar(im, ax=ax2, label="U (uK)")

fig.tight_layout()
fig.savefig("lattice_beat.png", dpi=150)
print("\nwrote lattice_beat.png")
