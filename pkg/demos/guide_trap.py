"""Two-color evanescent atom guide above a channel waveguide.

Solves the guided TE modes at 865 nm (red, attractive) and 700 nm
(blue, repulsive), superposes 1.5 mW of red TE01 with 40 mW of blue
TE00, adds the surface attraction and gravity, and characterizes the
trap that forms above the core.

Runs on a 10 nm grid so it finishes in a few seconds; the bundled
reference configuration uses 5 nm.  Writes guide_trap.png next to the
current directory.
"""

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from evatrap import constants
from evatrap.geometry import SimulationGrid, WaveguideGeometry
from evatrap.fields import ModeExcitation
from evatrap.modes import decay_length, mode_by_label, solve_modes
from evatrap.potential import SurfaceParams, TwoColorSetup, build_potential
from evatrap.trap import analyze_guide, power_sweep

geometry = WaveguideGeometry()
grid = SimulationGrid(step=10e-9, x_min=-1.0e-6, x_max=1.0e-6,
                      y_min=-1.4e-6, y_max=1.0e-6)

# Mode solve at both colors.  The red light rides in TE01 (one vertical
# node, a lobe above the core) and the blue in TE00.
red_modes = solve_modes(geometry, grid, 865e-9)
blue_modes = solve_modes(geometry, grid, 700e-9)
te01 = mode_by_label(red_modes, "TE01")
te00b = mode_by_label(blue_modes, "TE00")
print("modes at 865 nm:", ", ".join(m.label for m in red_modes))
print(f"beta(TE01, 865 nm) = {te01.beta:.5e} /m, "
      f"L = {decay_length(te01) * 1e6:.4f} um")
print(f"beta(TE00, 700 nm) = {te00b.beta:.5e} /m, "
      f"L = {decay_length(te00b) * 1e6:.4f} um")

# The red tail reaches further out than the blue one, so close to the
# surface the repulsion wins and far away the attraction wins: a
# minimum forms in between.
setup = TwoColorSetup(geometry, grid, constants.RB87, 865e-9, 700e-9,
                      [ModeExcitation(te01, 1.5e-3)],
                      [ModeExcitation(te00b, 40e-3)],
                      SurfaceParams(2.1, 780e-9), include_gravity=True)
pmap, report = analyze_guide(setup)

print(f"\ntrap minimum {report.y_min * 1e9:.0f} nm above the core")
print(f"depth          {report.depth_uK:8.1f} uK")
print(f"frequencies    {report.frequencies_kHz[0]:6.0f} / "
      f"{report.frequencies_kHz[1]:6.0f} kHz (x / y)")
print(f"scattering     {report.Gamma_sc:8.2f} 1/s "
      f"-> tau_coh = {report.tau_coh * 1e3:.0f} ms")
print(f"lifetime       {report.tau_trap:8.1f} s "
      f"({report.tau_trap_halved:.1f} s with the factor-2 convention)")

# Depth and standoff against red power, blue fixed at 40 mW.
rows, _ = power_sweep(setup, [0.5e-3, 1.0e-3, 1.5e-3, 2.0e-3, 2.5e-3])
print("\nP_red (mW)  y_min (um)  depth (uK)  Gamma (1/s)  tau (s)")
for P, r in rows:
    print(f"{P * 1e3:9.1f} {r.y_min * 1e6:11.3f} {r.depth_uK:11.1f}"
          f" {r.Gamma_sc:12.2f} {r.tau_trap:8.1f}")

# Figure: vertical cut through the trap plus the 2D landscape.
ix0 = int(np.argmin(np.abs(grid.x)))
toK = constants.joule_to_uK
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

y_um = grid.y * 1e6
ax1.plot(y_um, toK(pmap.U[:, ix0]), "k-", label="total")
ax1.plot(y_um, toK(pmap.components["red"][:, ix0]), "r--", label="red")
ax1.plot(y_um, toK(pmap.components["blue"][:, ix0]), "b--", label="blue")
ax1.plot(y_um, toK(pmap.components["surface"][:, ix0]), "g:",
         label="surface")
ax1.set_xlim(0, 0.5)
ax1.set_ylim(-250, 250)
ax1.set_xlabel("height above core (um)")
ax1.set_ylabel("U (uK)")
ax1.legend(loc="upper right", fontsize=8)
ax1.set_title("cut at x = 0")

U_uK = toK(pmap.U)
lim = 3 * abs(report.U_min_uK)
im = ax2.pcolormesh(grid.x * 1e6, y_um, np.clip(U_uK, -lim, lim),
                    cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
ax2.plot(report.x * 1e6, report.y_min * 1e6, "k+", markersize=10)
ax2.set_xlim(-0.5, 0.5)
ax2.set_ylim(-0.3, 0.5)
ax2.set_xlabel("x (um)")
ax2.set_ylabel("y (um)")
ax2.set_title("two-color potential")
fig.colorbar(im, ax=ax2, label="U (uK)")

fig.tight_layout()
fig.savefig("guide_trap.png", dpi=150)
print("\nwrote guide_trap.png")
