"""Run configuration: JSON with explicit unit suffixes, strictly validated.

Every physical quantity in a config file is either a bare number (SI) or a
string like "865 nm" / "40 mW" / "150 deg"; unknown units and unknown keys
are hard errors.  parse_config returns a RunConfig whose sections are ready
for the pipeline: geometry/grid objects, SI floats, excitation specs still
by mode label (modes get resolved after the eigen-solve).
"""

import json
import re
from dataclasses import dataclass, field as dc_field

from scipy.constants import pi

from .constants import RB87
from .geometry import SimulationGrid, WaveguideGeometry


class ConfigError(ValueError):
    """Malformed configuration (unknown key/unit, wrong type, bad value)."""


_UNIT_SCALE = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6,
               "nm": 1e-9, "pm": 1e-12},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "kW": 1e3},
    "angle": {"rad": 1.0, "mrad": 1e-3, "deg": pi / 180.0},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "µK": 1e-6},
}

_QTY_RE = re.compile(r"^\s*([-+]?[\d.]+(?:[eE][-+]?\d+)?)\s*([^\s\d]+)?\s*$")


def parse_quantity(value, kind, context=""):
    """SI float from a number or a '<value> <unit>' string of the given kind."""
    where = f" in {context}" if context else ""
    if isinstance(value, bool):
        raise ConfigError(f"expected a quantity, got a boolean{where}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected number or quantity string{where}, "
                          f"got {type(value).__name__}")
    m = _QTY_RE.match(value)
    if not m:
        raise ConfigError(f"cannot parse quantity {value!r}{where}")
    number, unit = m.groups()
    try:
        number = float(number)
    except ValueError as err:
        raise ConfigError(f"bad number in {value!r}{where}") from err
    if unit is None:
        return number
    scale = _UNIT_SCALE.get(kind, {}).get(unit)
    if scale is None:
        raise ConfigError(f"unit {unit!r} is not a {kind} unit{where}")
    return number * scale


def _check_keys(data, allowed, context):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {context}")


def _number(value, context):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a plain number in {context}")
    return float(value)


def _integer(value, context):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer in {context}")
    return value


def _boolean(value, context):
    if not isinstance(value, bool):
        raise ConfigError(f"expected true/false in {context}")
    return value


def _string(value, context):
    if not isinstance(value, str):
        raise ConfigError(f"expected a string in {context}")
    return value


def _parse_section(data, schema, context):
    """Apply a {key: converter} schema to a dict; unknown keys are errors."""
    if not isinstance(data, dict):
        raise ConfigError(f"{context} must be an object")
    _check_keys(data, schema, context)
    out = {}
    for key, conv in schema.items():
        if key in data:
            out[key] = conv(data[key], f"{context}.{key}")
    return out


def _qty(kind):
    return lambda v, ctx: parse_quantity(v, kind, ctx)


def _qty_list(kind):
    def conv(v, ctx):
        if not isinstance(v, list):
            raise ConfigError(f"expected a list in {ctx}")
        return [parse_quantity(item, kind, ctx) for item in v]
    return conv


def _string_list(v, ctx):
    if not isinstance(v, list):
        raise ConfigError(f"expected a list in {ctx}")
    return [_string(item, ctx) for item in v]


def _excitation_list(v, ctx):
    if not isinstance(v, list):
        raise ConfigError(f"expected a list of excitations in {ctx}")
    out = []
    for i, entry in enumerate(v):
        sub = _parse_section(entry, {
            "mode": _string,
            "power": _qty("power"),
            "phase": _qty("angle"),
        }, f"{ctx}[{i}]")
        if "mode" not in sub or "power" not in sub:
            raise ConfigError(f"excitation {ctx}[{i}] needs 'mode' and 'power'")
        sub.setdefault("phase", 0.0)
        out.append(sub)
    return out


_GEOMETRY_SCHEMA = {
    "core_width": _qty("length"), "core_height": _qty("length"),
    "core_index": _number, "substrate_index": _number, "clad_index": _number,
    "substrate_step_height": _qty("length"),
}

_GRID_SCHEMA = {
    "step": _qty("length"),
    "x_min": _qty("length"), "x_max": _qty("length"),
    "y_min": _qty("length"), "y_max": _qty("length"),
}


def _grid_section(v, ctx):
    return _parse_section(v, _GRID_SCHEMA, ctx)


_TOP_SCHEMA_KEYS = ("atom", "geometry", "grid", "light", "surface",
                    "include_gravity", "modes", "decay", "sweep", "lattice",
                    "transition", "bpm", "mzi")


@dataclass
class RunConfig:
    atom: object
    geometry: WaveguideGeometry
    grid: SimulationGrid
    red_wavelength: float
    blue_wavelength: float
    red_excitations: list
    blue_excitations: list
    surface_permittivity: float
    surface_reference_wavelength: float
    include_gravity: bool
    modes: dict = dc_field(default_factory=dict)
    decay: dict = dc_field(default_factory=dict)
    sweep: dict = dc_field(default_factory=dict)
    lattice: dict = dc_field(default_factory=dict)
    transition: dict = dc_field(default_factory=dict)
    bpm: dict = dc_field(default_factory=dict)
    mzi: dict = dc_field(default_factory=dict)
    raw: dict = dc_field(default_factory=dict)

    def with_grid_step(self, step):
        g = self.grid
        new = SimulationGrid(step, g.x_min, g.x_max, g.y_min, g.y_max)
        out = RunConfig(**{**self.__dict__, "grid": new})
        return out


def parse_config(data):
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be an object")
    _check_keys(data, _TOP_SCHEMA_KEYS, "config")

    atom_name = data.get("atom", "Rb87")
    if atom_name != "Rb87":
        raise ConfigError(f"unsupported atom {atom_name!r} (only Rb87)")
    atom = RB87
    atom.validate()

    geo_kwargs = _parse_section(data.get("geometry", {}), _GEOMETRY_SCHEMA,
                                "geometry")
    geometry = WaveguideGeometry(**geo_kwargs)
    geometry.validate()

    grid_kwargs = _grid_section(data.get("grid", {}), "grid")
    grid = SimulationGrid(**grid_kwargs)

    light = data.get("light", {})
    _check_keys(light, ("red", "blue"), "light")
    color = {}
    for name, default_wl in (("red", 865e-9), ("blue", 700e-9)):
        sec = _parse_section(light.get(name, {}), {
            "wavelength": _qty("length"),
            "excitations": _excitation_list,
        }, f"light.{name}")
        sec.setdefault("wavelength", default_wl)
        sec.setdefault("excitations", [])
        color[name] = sec

    surf = _parse_section(data.get("surface", {}), {
        "permittivity": _number,
        "reference_wavelength": _qty("length"),
    }, "surface")

    modes_sec = _parse_section(data.get("modes", {}), {
        "wavelength": _qty("length"), "polarization": _string,
        "max_modes": _integer,
    }, "modes")

    decay_sec = _parse_section(data.get("decay", {}), {
        "wavelengths": _qty_list("length"), "labels": _string_list,
    }, "decay")

    sweep_sec = _parse_section(data.get("sweep", {}), {
        "red_powers": _qty_list("power"),
    }, "sweep")

    lattice_sec = _parse_section(data.get("lattice", {}), {
        "z_stations": _integer, "excitations": _excitation_list,
    }, "lattice")

    transition_sec = _parse_section(data.get("transition", {}), {
        "thetas": _qty_list("angle"), "z_stations": _integer,
    }, "transition")

    bpm_sec = _parse_section(data.get("bpm", {}), {
        "wavelength": _qty("length"),
        "launch": _excitation_list,
        "z_max": _qty("length"), "dz": _qty("length"),
        "order": _integer,
        "absorber_width": _qty("length"), "absorber_kappa": _number,
        "snapshot_every": _integer,
        "grid": _grid_section,
    }, "bpm")

    mzi_sec = _parse_section(data.get("mzi", {}), {
        "wavelength": _qty("length"), "arm_length": _qty("length"),
        "delta_n": _number, "label": _string,
        "dn_values": lambda v, ctx: [_number(i, ctx) for i in _as_list(v, ctx)],
        "coupler": lambda v, ctx: _parse_section(v, {
            "coupling_length": _qty("length"),
            "gap": _qty("length"),
            "lengths": _qty_list("length"),
        }, ctx),
        "grid": _grid_section,
    }, "mzi")

    return RunConfig(
        atom=atom, geometry=geometry, grid=grid,
        red_wavelength=color["red"]["wavelength"],
        blue_wavelength=color["blue"]["wavelength"],
        red_excitations=color["red"]["excitations"],
        blue_excitations=color["blue"]["excitations"],
        surface_permittivity=surf.get("permittivity", 2.1),
        surface_reference_wavelength=surf.get("reference_wavelength", 780e-9),
        include_gravity=_boolean(data.get("include_gravity", False),
                                 "include_gravity"),
        modes=modes_sec, decay=decay_sec, sweep=sweep_sec,
        lattice=lattice_sec, transition=transition_sec,
        bpm=bpm_sec, mzi=mzi_sec, raw=data)


def _as_list(v, ctx):
    if not isinstance(v, list):
        raise ConfigError(f"expected a list in {ctx}")
    return v


def load_config(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from err
    return parse_config(data)


def default_config_path():
    """Path of the bundled reference configuration."""
    import importlib.resources
    return importlib.resources.files("evatrap") / "reference.cfg"


def load_default_config():
    return load_config(default_config_path())
