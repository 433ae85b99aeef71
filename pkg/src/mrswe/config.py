"""Simulation configuration: schema, parsing, validation and serialisation.

The file format is plain ``key = value`` lines grouped under ``[section]``
headers; ``#`` and ``;`` start comments. Keys are unique across sections, so
a key may also appear before the first header or be overridden on the
command line without naming its section. Every key is known in advance:
typos are errors, reported with their line and column.

Example::

    case = circular
    L = 8
    epsilon = 1e-3

    [case]
    radius = 2.5

    [output]
    output_times = 0, 1.5, 3.5
    gauges = 5:0, 10:0
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .cases import CaseSpec, preset
from .zorder import MAX_LEVEL


class ConfigError(ValueError):
    """Invalid configuration; the message carries a location or key path."""


@dataclass
class SimConfig:
    case: CaseSpec = field(default_factory=CaseSpec)
    L: int = 8
    epsilon: float = 1e-3
    solver: str = "adaptive"
    cfl: float = 0.5
    g: float = 9.80665
    h_dry: float = 1e-6
    dt_fallback: float = 0.01
    workers: int = 0
    no_safety_zone: bool = False
    dem_strict: bool = True
    format: str = "esri_ascii"
    fields: tuple = ("h",)

    def replace(self, **changes) -> "SimConfig":
        case_changes = {k: changes.pop(k) for k in list(changes) if k in _CASE_FIELDS}
        out = dataclasses.replace(self, **changes)
        if case_changes:
            out = dataclasses.replace(out, case=out.case.replace(**case_changes))
        return out

    def validate(self) -> "SimConfig":
        if not 1 <= self.L <= MAX_LEVEL:
            raise ConfigError(f"run.L: {self.L} outside the supported range [1, {MAX_LEVEL}]")
        if not self.epsilon >= 0 or not math.isfinite(self.epsilon):
            raise ConfigError(f"run.epsilon: must be a finite value >= 0, got {self.epsilon}")
        if self.solver not in ("adaptive", "uniform"):
            raise ConfigError(f"run.solver: {self.solver!r} is not 'adaptive' or 'uniform'")
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"run.cfl: {self.cfl} outside (0, 1]")
        if not self.g > 0:
            raise ConfigError("physics.g: must be positive")
        if not self.h_dry > 0:
            raise ConfigError("physics.h_dry: must be positive")
        if not self.dt_fallback > 0:
            raise ConfigError("run.dt_fallback: must be positive")
        if self.workers < 0:
            raise ConfigError("run.workers: must be >= 0 (0 picks the default)")
        if self.format not in ("esri_ascii", "csv"):
            raise ConfigError(f"output.format: {self.format!r} is not 'esri_ascii' or 'csv'")
        for f in self.fields:
            if f not in ("h", "qx", "qy", "eta", "z"):
                raise ConfigError(f"output.fields: unknown field {f!r}")
        try:
            self.case.validate()
        except ValueError as exc:
            raise ConfigError("; ".join(f"case.{part}" for part in str(exc).split("; "))) from None
        return self


# key -> (section, kind); kinds drive parsing and serialisation
_SCHEMA = {
    "case": ("run", "str"),
    "L": ("run", "int"),
    "epsilon": ("run", "float"),
    "solver": ("run", "str"),
    "cfl": ("run", "float"),
    "workers": ("run", "int"),
    "no_safety_zone": ("run", "bool"),
    "dt_fallback": ("run", "float"),
    "dem_strict": ("run", "bool"),
    "g": ("physics", "float"),
    "h_dry": ("physics", "float"),
    "manning": ("physics", "float"),
    "xmin": ("case", "float"),
    "ymin": ("case", "float"),
    "width": ("case", "float"),
    "height": ("case", "float"),
    "topography": ("case", "str"),
    "humps": ("case", "humps"),
    "dem": ("case", "str"),
    "initial": ("case", "str"),
    "eta": ("case", "float"),
    "dam_x": ("case", "float"),
    "eta_upstream": ("case", "float"),
    "eta_downstream": ("case", "float"),
    "centre_x": ("case", "float"),
    "centre_y": ("case", "float"),
    "radius": ("case", "float"),
    "h_inside": ("case", "float"),
    "h_outside": ("case", "float"),
    "t_end": ("case", "float"),
    "west": ("boundary", "str"),
    "east": ("boundary", "str"),
    "south": ("boundary", "str"),
    "north": ("boundary", "str"),
    "inflow_times": ("boundary", "floats"),
    "inflow_values": ("boundary", "floats"),
    "inflow_kind": ("boundary", "str"),
    "output_times": ("output", "floats"),
    "gauges": ("output", "points"),
    "gauge_interval": ("output", "float"),
    "centreline_y": ("output", "optfloat"),
    "format": ("output", "str"),
    "fields": ("output", "strs"),
}
SECTIONS = ("run", "physics", "case", "boundary", "output")
_CASE_FIELDS = {f.name for f in dataclasses.fields(CaseSpec)} - {"name"}


def _parse_value(kind: str, text: str):
    text = text.strip()
    if kind == "str":
        return text
    if kind == "int":
        return int(text)
    if kind == "float":
        v = float(text)
        if math.isnan(v):
            raise ValueError("NaN is not allowed")
        return v
    if kind == "optfloat":
        return None if text.lower() in ("", "none") else _parse_value("float", text)
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if kind == "floats":
        return tuple(_parse_value("float", p) for p in parts)
    if kind == "strs":
        return tuple(parts)
    if kind == "points":
        pts = tuple(tuple(float(c) for c in p.split(":")) for p in parts)
        if any(len(p) != 2 for p in pts):
            raise ValueError("points are written x:y")
        return pts
    if kind == "humps":
        humps = tuple(tuple(float(c) for c in p.split(":")) for p in parts)
        if any(len(h) != 4 for h in humps):
            raise ValueError("humps are written cx:cy:peak:size")
        return humps
    raise AssertionError(kind)


def _format_value(kind: str, value) -> str:
    if kind in ("float", "optfloat"):
        return "none" if value is None else repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "strs":
        return ", ".join(value)
    if kind in ("points", "humps"):
        return ", ".join(":".join(repr(float(c)) for c in p) for p in value)
    return str(value)


def parse_text(text: str, source: str = "<config>") -> dict:
    """Split config text into ``{key: (raw value, location)}``; syntax errors are located."""
    entries: dict[str, tuple[str, str]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        col = len(raw) - len(raw.lstrip()) + 1
        if not line or line[0] in "#;":
            continue
        where = f"{source}:{lineno}:{col}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{where}: unterminated section header")
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        for marker in (" #", " ;"):
            if marker in value:
                value = value.split(marker, 1)[0]
        if key not in _SCHEMA:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if section is not None and _SCHEMA[key][0] != section:
            raise ConfigError(f"{where}: key {key!r} belongs in [{_SCHEMA[key][0]}], not [{section}]")
        if key in entries:
            raise ConfigError(f"{where}: duplicate key {key!r} (first at {entries[key][1]})")
        entries[key] = (value.strip(), where)
    return entries


def _split_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override {item!r}: expected key=value")
    key, value = item.split("=", 1)
    key = key.strip()
    if "." in key:
        section, key = key.split(".", 1)
        if key in _SCHEMA and _SCHEMA[key][0] != section:
            raise ConfigError(f"override {item!r}: {key!r} belongs in [{_SCHEMA[key][0]}]")
    if key not in _SCHEMA:
        raise ConfigError(f"override {item!r}: unknown key {key!r}")
    return key, value


def build_config(entries: dict, overrides=()) -> SimConfig:
    entries = dict(entries)
    for item in overrides:
        key, value = _split_override(item)
        entries[key] = (value.strip(), f"--set {item}")
    values = {}
    for key, (raw, where) in entries.items():
        section, kind = _SCHEMA[key]
        try:
            values[key] = _parse_value(kind, raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: {section}.{key}: {exc}") from None
    name = values.pop("case", None)
    try:
        case = preset(name) if name else CaseSpec()
    except ValueError as exc:
        raise ConfigError(f"run.case: {exc}") from None
    case_values = {k: values.pop(k) for k in list(values) if k in _CASE_FIELDS}
    case = case.replace(**case_values)
    if case_values and name:
        case = case.replace(name=name)
    cfg = SimConfig(case=case, **values)
    return cfg.validate()


def loads(text: str, overrides=(), source: str = "<config>") -> SimConfig:
    return build_config(parse_text(text, source), overrides)


def load_config(path, overrides=()) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: config is not valid UTF-8 text") from None
    return loads(text, overrides, source=str(path))


def dumps(cfg: SimConfig) -> str:
    """Serialise a config; ``loads(dumps(cfg))`` reproduces it exactly."""
    flat = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg) if f.name != "case"}
    flat.update({f.name: getattr(cfg.case, f.name) for f in dataclasses.fields(cfg.case)})
    flat["case"] = flat.pop("name")
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for key, (sec, kind) in _SCHEMA.items():
            if sec != section:
                continue
            value = flat[key]
            if key == "case" and value not in _preset_names():
                # custom cases carry every field explicitly; the name is informational
                lines.append(f"# case name: {value}")
                continue
            lines.append(f"{key} = {_format_value(kind, value)}")
        lines.append("")
    return "\n".join(lines)


def _preset_names():
    from .cases import PRESETS

    return PRESETS


def case_to_text(case: CaseSpec) -> str:
    return dumps(SimConfig(case=case))


def case_from_text(text: str) -> CaseSpec:
    cfg = loads(text)
    if not any(line.startswith("case =") for line in text.splitlines()):
        name = next((line.split(":", 1)[1].strip() for line in text.splitlines()
                     if line.startswith("# case name:")), "custom")
        return cfg.case.replace(name=name)
    return cfg.case
