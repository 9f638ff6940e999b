"""Waveguide cross-section geometry and the uniform simulation grid.

Axis convention: y is vertical (normal to the chip, y = 0 at the core top
surface), x is lateral (core centered on x = 0), z is the propagation
direction.  The substrate is modeled as a pedestal of the core width sitting
under the core; everything else is vacuum.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class WaveguideGeometry:
    core_width: float = 0.3e-6
    core_height: float = 0.3e-6
    core_index: float = 3.42
    substrate_index: float = 1.45
    clad_index: float = 1.0
    substrate_step_height: float = 1.0e-6

    def validate(self):
        if self.core_width <= 0 or self.core_height <= 0:
            raise ValueError("core dimensions must be positive")
        if not (self.core_index > self.substrate_index > 0
                and self.substrate_index >= self.clad_index >= 1.0):
            raise ValueError("need n_core > n_substrate >= n_clad >= 1 for guiding")
        if self.substrate_step_height < 0:
            raise ValueError("substrate step height must be non-negative")


@dataclass(frozen=True)
class SimulationGrid:
    """Cell-centered uniform grid.  Extents are chosen so the core top sits
    at y = 0 with vacuum margin above it."""

    step: float = 5e-9
    x_min: float = -1.5e-6
    x_max: float = 1.5e-6
    y_min: float = -1.8e-6
    y_max: float = 1.2e-6

    nx: int = field(init=False)
    ny: int = field(init=False)

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("grid step must be positive")
        object.__setattr__(self, "nx", int(round((self.x_max - self.x_min) / self.step)))
        object.__setattr__(self, "ny", int(round((self.y_max - self.y_min) / self.step)))
        if self.nx < 4 or self.ny < 4:
            raise ValueError("grid too small")

    @property
    def x(self):
        return self.x_min + (np.arange(self.nx) + 0.5) * self.step

    @property
    def y(self):
        return self.y_min + (np.arange(self.ny) + 0.5) * self.step

    def meshgrid(self):
        return np.meshgrid(self.x, self.y, indexing="xy")

    def halved(self):
        return SimulationGrid(self.step / 2, self.x_min, self.x_max,
                              self.y_min, self.y_max)

    def coarsened(self):
        return SimulationGrid(self.step * 2, self.x_min, self.x_max,
                              self.y_min, self.y_max)


def build_index_profile(geometry, grid):
    """Piecewise-constant index map n(x, y) on the grid (ny, nx).

    The core must lie inside the grid; a substrate pedestal deeper than the
    grid is silently clipped at y_min (the guided fields decay within a
    fraction of the pedestal height).
    """
    geometry.validate()
    w, h = geometry.core_width, geometry.core_height
    hs = geometry.substrate_step_height
    if (grid.x_min > -w / 2 or grid.x_max < w / 2
            or grid.y_min > -h or grid.y_max <= 0):
        raise ValueError("grid does not contain the waveguide core")
    X, Y = grid.meshgrid()
    n = np.full((grid.ny, grid.nx), geometry.clad_index)
    in_x = np.abs(X) <= w / 2
    n[in_x & (Y >= -h - hs) & (Y < -h)] = geometry.substrate_index
    n[in_x & (Y >= -h) & (Y <= 0.0)] = geometry.core_index
    return n


def _rect_distance(X, Y, xa, xb, ya, yb):
    """Distance from each grid point to an axis-aligned rectangle."""
    dx = np.maximum(np.maximum(xa - X, X - xb), 0.0)
    dy = np.maximum(np.maximum(ya - Y, Y - yb), 0.0)
    return np.hypot(dx, dy)


def surface_distance(geometry, grid):
    """Distance from each cell center to the nearest dielectric face."""
    w, h = geometry.core_width, geometry.core_height
    hs = geometry.substrate_step_height
    X, Y = grid.meshgrid()
    d_core = _rect_distance(X, Y, -w / 2, w / 2, -h, 0.0)
    d_sub = _rect_distance(X, Y, -w / 2, w / 2, -h - hs, -h)
    return np.minimum(d_core, d_sub)


def exterior_mask(geometry, grid):
    """Vacuum cells at least half a cell away from any dielectric face."""
    n = build_index_profile(geometry, grid)
    ldist = surface_distance(geometry, grid)
    return (n == geometry.clad_index) & (ldist >= grid.step / 2)
