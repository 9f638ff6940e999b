"""Mach-Zehnder mode converter and the directional coupler behind it.

The converter takes TE00 in, splits it, phase-shifts one arm by theta
(index change delta_n over the arm length), and recombines into a
TE00/TE10 mixture.  theta = pi converts all power.  The 3 dB splitters
are directional couplers; their transfer follows the two-mode coupling
model, and an independent supermode calculation of the coupling
coefficient is compared against it.
"""

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from evatrap.devices import MziDevice, mzi_apply, mzi_matrix, \
    supermode_coupling_estimate, transferred_fraction
from evatrap.geometry import SimulationGrid, WaveguideGeometry

geometry = WaveguideGeometry()
grid = SimulationGrid(step=10e-9, x_min=-1.0e-6, x_max=1.0e-6,
                      y_min=-1.4e-6, y_max=1.0e-6)

# The transfer matrix is unitary for any angle.
worst = max(np.max(np.abs(mzi_matrix(t).conj().T @ mzi_matrix(t)
                          - np.eye(2)))
            for t in np.linspace(0, 2 * np.pi, 49))
print(f"unitarity residual over a full turn: {worst:.2e}")

# Exact arm phase from two eigenvalue solves at 1.06 um: beta with and
# without the index shift, times the arm length.  calibrate() anchors a
# linear phase model at dn so the scan below needs no further solves.
device = MziDevice(geometry, grid, wavelength=1.06e-6, arm_length=50e-6)
dn = 0.01012
device.calibrate(dn)
theta = device.phase(dn)
print(f"theta(delta_n = {dn}) = {theta / np.pi:.4f} pi")
print(f"theta(delta_n / 2)   = {device.phase(dn / 2) / np.pi:.4f} pi")

dns = np.linspace(0.0, dn, 25)
pops = []
for d in dns:
    c0, c1 = device.output_amplitudes(d)
    pops.append((abs(c0) ** 2, abs(c1) ** 2))
pops = np.array(pops)
print(f"residual TE00 power at delta_n = {dn}: {pops[-1, 0]:.4f}")

# Directional coupler: fraction transferred vs interaction length.
Lc = 24.38e-6
lengths = np.linspace(0, Lc, 200)
frac = [transferred_fraction(L, Lc) for L in lengths]
for L in (6.095e-6, 12.19e-6, 24.38e-6):
    print(f"transfer at {L * 1e6:6.2f} um: {transferred_fraction(L, Lc):.4f}")

kappa_cmt = np.pi / (2 * Lc)
kappa_sm, pair = supermode_coupling_estimate(geometry, grid, 865e-9,
                                             gap=42e-9)
print(f"coupling coefficient: two-mode model {kappa_cmt:.4g} /m, "
      f"supermode splitting {kappa_sm:.4g} /m "
      f"(x{kappa_sm / kappa_cmt:.2f})")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(dns, pops[:, 0], "b-", label="TE00")
ax1.plot(dns, pops[:, 1], "r-", label="TE10")
ax1.set_xlabel("delta_n")
ax1.set_ylabel("output population")
ax1.set_title("converter populations")
ax1.legend()

ax2.plot(lengths * 1e6, frac, "k-")
for L in (6.095, 12.19, 18.285, 24.38):
    ax2.axvline(L, color="0.8", lw=0.5)
ax2.set_xlabel("coupler length (um)")
ax2.set_ylabel("transferred fraction")
ax2.set_title(f"directional coupler, L_c = {Lc * 1e6:.2f} um")

fig.tight_layout()
fig.savefig("mode_converter.png", dpi=150)
print("\nwrote mode_converter.png")
