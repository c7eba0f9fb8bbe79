"""Run configuration files and output writers.

Configurations are YAML documents with fixed sections. Parsing is strict:
unknown keys, wrong types and out-of-range values are reported with the line
they came from, before anything is simulated.
"""

from __future__ import annotations

import hashlib
import json
import typing
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from . import __version__
from .materials import MaterialDB
from .mesh import DeviceGeometry, FieldState, Mesh, Resolution
from .protocol import Segment, StepControl, TraceResult, Waveform
from .scenario import PulseSpec, RampSpec, Scenario
from .solver import BoundaryConditions, SolverConfig

__all__ = [
    "ConfigError",
    "SweepSettings",
    "IVSettings",
    "OutputSettings",
    "RunConfig",
    "load_config",
    "parse_config",
    "default_config_text",
    "write_csv",
    "write_trace",
    "write_vtk",
    "read_csv",
]


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


DEFAULT_K1_AXIS = tuple(float(x) for x in np.round(np.linspace(6.2, 18.8, 8), 4))
DEFAULT_K2_AXIS = tuple(float(x) for x in np.round(np.linspace(2.5, 11.5, 8), 4))


@dataclass(frozen=True)
class SweepSettings:
    K1: tuple = DEFAULT_K1_AXIS
    K2: tuple = DEFAULT_K2_AXIS
    cycles: int = 10
    resolution: Resolution = Resolution(dy=2e-9, dz_switch=1.25e-9, dz_max=10e-9, growth=1.5)

    def __post_init__(self):
        object.__setattr__(self, "K1", tuple(float(k) for k in self.K1))
        object.__setattr__(self, "K2", tuple(float(k) for k in self.K2))
        if not self.K1 or not self.K2:
            raise ValueError("sweep axes must be non-empty")
        if any(k <= 0 for k in self.K1 + self.K2):
            raise ValueError("sweep axis values must be positive")
        if self.cycles < 1:
            raise ValueError("sweep cycles must be >= 1")


@dataclass(frozen=True)
class IVSettings:
    """Piecewise-linear DC sweep through ``points`` (volts). Segments going
    more negative run with compliance; the others without."""

    points: tuple = (0.0, -2.1, 0.0, 1.0, 0.0)
    step: float = 0.01
    dwell: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(float(v) for v in self.points))
        if len(self.points) < 2:
            raise ValueError("an I-V sweep needs at least two points")
        if not self.step > 0 or not self.dwell > 0:
            raise ValueError("step and dwell must be positive")

    def waveform(self) -> Waveform:
        segs = []
        for a, b in zip(self.points[:-1], self.points[1:]):
            if a == b:
                continue
            segs.append(Segment.ramp(a, b, 1.0, limit=b < a))
        if not segs:
            raise ValueError("I-V points never change voltage")
        return Waveform(segs)


@dataclass(frozen=True)
class OutputSettings:
    snapshots: tuple = (1e-3, 5e-3, 10e-3)
    vtk: bool = True

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(float(t) for t in self.snapshots))
        if any(t < 0 for t in self.snapshots):
            raise ValueError("snapshot times must be non-negative")


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario = field(default_factory=Scenario)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    iv: IVSettings = field(default_factory=IVSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    @property
    def seed(self) -> int:
        return self.scenario.seed

    def with_seed(self, seed: int) -> "RunConfig":
        return RunConfig(self.scenario.replace(seed=seed), self.sweep, self.iv, self.output)

    def to_dict(self) -> dict:
        s = self.scenario
        return {
            "seed": s.seed,
            "geometry": _plain(s.geometry),
            "resolution": _plain(s.resolution),
            "materials": _plain(s.materials),
            "boundary": {k: v for k, v in _plain(s.boundary).items() if k != "V1"},
            "solver": _plain(s.solver),
            "time_step": _plain(s.control),
            "compliance": {"I_CC": s.I_CC},
            "nucleation": {"amplitude": s.seed_amplitude, "width": s.seed_width},
            "forming": _plain(s.form_pulse),
            "forming_ramp": _plain(s.form_ramp),
            "set": _plain(s.set_pulse),
            "reset": _plain(s.reset_pulse),
            "protocol": {"form_mode": s.form_mode},
            "read": {"V_read": s.V_read, "reference": s.read_reference},
            "cycling": {"cycles": s.cycles, "noise_amplitude": s.noise_amplitude},
            "sweep": {"K1": list(self.sweep.K1), "K2": list(self.sweep.K2), "cycles": self.sweep.cycles,
                      "resolution": _plain(self.sweep.resolution)},
            "iv": {"points": list(self.iv.points), "step": self.iv.step, "dwell": self.iv.dwell},
            "output": {"snapshots": list(self.output.snapshots), "vtk": self.output.vtk},
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = _plain(v) if is_dataclass(v) else (list(v) if isinstance(v, tuple) else v)
    return out


# parsing -------------------------------------------------------------------

# section name -> (dataclass, keys excluded from the file)
_SECTIONS = {
    "geometry": (DeviceGeometry, ()),
    "resolution": (Resolution, ()),
    "materials": (MaterialDB, ()),
    "boundary": (BoundaryConditions, ("V1",)),
    "solver": (SolverConfig, ()),
    "time_step": (StepControl, ()),
    "forming": (PulseSpec, ()),
    "forming_ramp": (RampSpec, ()),
    "set": (PulseSpec, ()),
    "reset": (PulseSpec, ()),
}
_SIMPLE = {
    "compliance": {"I_CC": float},
    "nucleation": {"amplitude": float, "width": float},
    "read": {"V_read": float, "reference": str},
    "protocol": {"form_mode": str},
    "cycling": {"cycles": int, "noise_amplitude": float},
    "output": {"snapshots": list, "vtk": bool},
    "iv": {"points": list, "step": float, "dwell": float},
    "sweep": {"K1": list, "K2": list, "cycles": int, "resolution": dict},
}
_TOP = {"seed"} | set(_SECTIONS) | set(_SIMPLE)


class _Lines:
    """Maps key paths to source lines using the composed YAML node tree."""

    def __init__(self, node):
        self.lines: dict = {}
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = (*path, k.value)
                self.lines[key] = k.start_mark.line + 1
                if isinstance(v, (yaml.MappingNode, yaml.SequenceNode)):
                    self._walk(v, key)
                    self.lines[key] = k.start_mark.line + 1

    def __call__(self, *path):
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)


def _coerce(value, kind, what):
    """Convert a YAML scalar to ``kind``. Strings like ``1e-9`` are accepted
    for floats because YAML 1.1 reads them as text."""
    origin = typing.get_origin(kind)
    if origin is typing.Union or type(kind).__name__ == "UnionType":
        args = [a for a in typing.get_args(kind) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], what)
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise TypeError(f"{what} must be true or false")
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"{what} must be an integer")
        return value
    if kind is float:
        if isinstance(value, bool):
            raise TypeError(f"{what} must be a number")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise TypeError(f"{what} must be a number")
    if kind is str:
        if not isinstance(value, str):
            raise TypeError(f"{what} must be a string")
        return value
    if kind in (tuple, list):
        if not isinstance(value, list):
            raise TypeError(f"{what} must be a list")
        return [_coerce(v, float, f"{what} entry") for v in value]
    if kind is dict:
        if not isinstance(value, dict):
            raise TypeError(f"{what} must be a mapping")
        return value
    raise TypeError(f"unsupported field type for {what}")


def _build(cls, data, base, path, lines, source, exclude=()):
    if data is None:
        return base
    if not isinstance(data, dict):
        raise ConfigError(f"section '{'.'.join(path)}' must be a mapping", source, lines(*path))
    hints = typing.get_type_hints(cls)
    names = [f.name for f in fields(cls) if f.name not in exclude]
    kw = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown key '{key}' in section '{'.'.join(path)}'", source, lines(*path, key))
        try:
            kw[key] = _coerce(value, hints[key], f"'{'.'.join((*path, key))}'")
        except TypeError as exc:
            raise ConfigError(str(exc), source, lines(*path, key)) from None
    try:
        return _replace(base, kw)
    except (ValueError, TypeError) as exc:
        bad = next((k for k in kw if k in str(exc)), None)
        line = lines(*path, bad) if bad else lines(*path)
        raise ConfigError(f"invalid value in '{'.'.join(path)}': {exc}", source, line) from None


def _replace(base, kw):
    from dataclasses import replace

    return replace(base, **kw)


def _simple(name, data, lines, source):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be a mapping", source, lines(name))
    spec = _SIMPLE[name]
    out = {}
    for key, value in data.items():
        if key not in spec:
            raise ConfigError(f"unknown key '{key}' in section '{name}'", source, lines(name, key))
        try:
            out[key] = _coerce(value, spec[key], f"'{name}.{key}'")
        except TypeError as exc:
            raise ConfigError(str(exc), source, lines(name, key)) from None
    return out


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse a YAML run configuration. Missing keys keep their defaults."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", source,
                          mark.line + 1 if mark else None) from None
    lines = _Lines(node)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source, 1)
    for key in data:
        if key not in _TOP:
            raise ConfigError(f"unknown section '{key}'", source, lines(key))

    d = RunConfig()
    s = d.scenario
    parts = {}
    targets = {
        "geometry": s.geometry, "resolution": s.resolution, "materials": s.materials,
        "boundary": s.boundary, "solver": s.solver, "time_step": s.control,
        "forming": s.form_pulse, "forming_ramp": s.form_ramp, "set": s.set_pulse, "reset": s.reset_pulse,
    }
    for name, (cls, exclude) in _SECTIONS.items():
        parts[name] = _build(cls, data.get(name), targets[name], (name,), lines, source, exclude)
    simple = {name: _simple(name, data.get(name), lines, source) for name in _SIMPLE}

    seed = data.get("seed", s.seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer", source, lines("seed"))

    def section_error(name, exc):
        return ConfigError(f"invalid value in '{name}': {exc}", source, lines(name))

    try:
        scenario = Scenario(
            geometry=parts["geometry"], resolution=parts["resolution"], materials=parts["materials"],
            boundary=parts["boundary"], solver=parts["solver"], control=parts["time_step"],
            I_CC=simple["compliance"].get("I_CC", s.I_CC),
            seed_amplitude=simple["nucleation"].get("amplitude", s.seed_amplitude),
            seed_width=simple["nucleation"].get("width", s.seed_width),
            form_pulse=parts["forming"], form_ramp=parts["forming_ramp"],
            form_mode=simple["protocol"].get("form_mode", s.form_mode),
            set_pulse=parts["set"], reset_pulse=parts["reset"],
            V_read=simple["read"].get("V_read", s.V_read),
            read_reference=simple["read"].get("reference", s.read_reference),
            noise_amplitude=simple["cycling"].get("noise_amplitude", s.noise_amplitude),
            cycles=simple["cycling"].get("cycles", s.cycles),
            seed=seed,
        )
    except ValueError as exc:
        msg = str(exc)
        sec = next((n for n, keys in (("compliance", ("I_CC",)), ("nucleation", ("seed_",)),
                                      ("read", ("V_read", "read_reference")),
                                      ("protocol", ("form_mode",)),
                                      ("cycling", ("noise", "cycles"))) if any(k in msg for k in keys)), None)
        raise ConfigError(f"invalid value: {msg}", source, lines(sec) if sec else None) from None
    if scenario.seed_width <= 0:
        raise ConfigError("nucleation width must be positive", source, lines("nucleation", "width"))

    sw = simple["sweep"]
    try:
        res = d.sweep.resolution
        if "resolution" in sw:
            res = _build(Resolution, sw["resolution"], res, ("sweep", "resolution"), lines, source)
        sweep = SweepSettings(sw.get("K1", d.sweep.K1), sw.get("K2", d.sweep.K2), sw.get("cycles", d.sweep.cycles), res)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise section_error("sweep", exc) from None
    try:
        iv = IVSettings(**{**_plain(d.iv), **simple["iv"]})
        iv.waveform()
    except ValueError as exc:
        raise section_error("iv", exc) from None
    try:
        output = OutputSettings(**{**_plain(d.output), **simple["output"]})
    except ValueError as exc:
        raise section_error("output", exc) from None
    return RunConfig(scenario, sweep, iv, output)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


def default_config_text() -> str:
    """The full default configuration as YAML."""
    head = "# rramfv run configuration; every key is optional\n"
    return head + yaml.safe_dump(RunConfig().to_dict(), sort_keys=False, default_flow_style=None)


# writers -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns: Sequence[str], rows, meta: dict | None = None) -> Path:
    """Comma-separated table preceded by ``# key: value`` metadata lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the header")
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_trace(path, trace: TraceResult, meta: dict | None = None) -> Path:
    return write_csv(path, TraceResult.COLUMNS, trace.rows().tolist(), meta)


def read_csv(path) -> tuple[dict, list, list]:
    """Return ``(meta, columns, rows)``; numeric cells become floats."""
    meta, rows, columns = {}, [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif columns is None:
            columns = line.split(",")
        elif line:
            cells = []
            for c in line.split(","):
                try:
                    cells.append(float(c))
                except ValueError:
                    cells.append(c)
            rows.append(cells)
    return meta, columns or [], rows


def metadata(cfg: RunConfig, **extra) -> dict:
    return {"rramfv_version": __version__, "seed": cfg.seed, "config_hash": cfg.hash(), **extra}


def write_vtk(path, mesh: Mesh, state: FieldState, title: str = "rramfv snapshot") -> Path:
    """Legacy ASCII VTK rectilinear grid with n_D, T and psi as cell data.
    The grid x axis is the lateral coordinate y, the grid y axis is z."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nyf, nzf = mesh.ny + 1, mesh.nz + 1

    def coords(a):
        return "\n".join(repr(float(v)) for v in a)

    out = [
        "# vtk DataFile Version 3.0",
        f"{title} t={state.t!r}",
        "ASCII",
        "DATASET RECTILINEAR_GRID",
        f"DIMENSIONS {nyf} {nzf} 1",
        f"X_COORDINATES {nyf} double",
        coords(mesh.y_faces),
        f"Y_COORDINATES {nzf} double",
        coords(mesh.z_faces),
        "Z_COORDINATES 1 double",
        "0.0",
        f"CELL_DATA {mesh.size}",
    ]
    for name, arr in (("n_D", state.n_D), ("T", state.T), ("psi", state.psi), ("region", mesh.region)):
        kind = "int" if name == "region" else "double"
        out.append(f"SCALARS {name} {kind} 1")
        out.append("LOOKUP_TABLE default")
        out.append("\n".join(_fmt(v) for v in np.asarray(arr).ravel()))
    path.write_text("\n".join(out) + "\n")
    return path
