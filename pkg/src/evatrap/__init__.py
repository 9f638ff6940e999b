"""Two-color evanescent-field atom guide and 1D lattice above an SOI
channel waveguide: mode solving, potential assembly, trap analysis, BPM
propagation, and the MZI/coupler mode-control chain.
"""

from .constants import RB87, AtomSpecies, ResonanceError, recoil_energy
from .geometry import SimulationGrid, WaveguideGeometry
from .modes import (FitError, GuidedMode, SolverError, decay_length,
                    dispersion_scan, mode_by_label, solve_modes)
from .fields import ModeExcitation, beat_period, intensity, superpose
from .potential import (PotentialMap, SurfaceParams, TwoColorSetup,
                        build_potential, dipole_potential, scattering_rate,
                        surface_potential)
from .trap import (NoTrapMinimum, TrapReport, analyze_guide,
                   find_trap_minimum, guide_lattice_transition,
                   lattice_analysis, power_sweep, surface_sensitivity,
                   trap_report)
from .bpm import (BpmResult, beat_length_from_phase, fit_beat_length,
                  mode_beta_from_trace, propagate)
from .devices import (MziDevice, coupler_apply, coupler_matrix, mzi_apply,
                      mzi_matrix, modulator_phase, superposition_vs_dn,
                      supermode_coupling_estimate, transferred_fraction)
from .config import ConfigError, RunConfig, load_config, parse_config

__version__ = "0.1.0"
