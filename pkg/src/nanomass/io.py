"""CSV/JSON emission and INI run-configuration parsing."""

from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import ConfigError
from .model import ResonatorParams, UnitSystem

FLOAT_FMT = "%.17g"


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return FLOAT_FMT % v
    if v is None:
        return ""
    return str(v)


def write_csv(
    path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]], meta: dict | None = None
) -> None:
    """Comma-separated table with a '#'-prefixed metadata header and 17-digit floats."""
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {format_value(value)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path: str | Path) -> tuple[dict, list[str], list[dict]]:
    """Inverse of write_csv; numeric cells come back as int or float."""
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(":")
            meta[key.strip()] = value.strip()
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader, [])
    rows = [dict(zip(columns, (_parse_cell(c) for c in r))) for r in reader]
    return meta, columns, rows


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def write_json(path: str | Path, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# Recognized keys per section and their parsers.
_FLOAT, _INT, _STR = float, int, str
SCHEMA: dict[str, dict[str, Any]] = {
    "run": {"units": _STR},
    "resonator": {
        "omega0": _FLOAT,
        "gamma": _FLOAT,
        "gamma3": _FLOAT,
        "kerr": _FLOAT,
        "mass": _FLOAT,
        "temperature": _FLOAT,
    },
    "drive": {"omega_p": _FLOAT, "p": _FLOAT, "p_over_pc": _FLOAT, "phi_p": _FLOAT},
    "steady": {"omega_p_start": _FLOAT, "omega_p_stop": _FLOAT, "num": _INT},
    "bifurcation": {"p_max_over_pc": _FLOAT, "resolution": _INT},
    "basins": {"n_re": _INT, "n_im": _INT, "margin": _FLOAT},
    "spectrum": {
        "omega_max": _FLOAT,
        "num": _INT,
        "phi_lo": _FLOAT,
        "phi_lo_from_phi0": _FLOAT,
        "branch": _STR,
        "trajectories": _INT,
        "run_rd": _FLOAT,
        "nperseg": _INT,
        "record_every": _INT,
        "dt_scale": _FLOAT,
    },
    "sensitivity": {
        "omega_p_start": _FLOAT,
        "omega_p_stop": _FLOAT,
        "num": _INT,
        "tau": _FLOAT,
        "policy": _STR,
        "phi_lo": _FLOAT,
        "branch": _STR,
    },
    "simulate": {
        "trajectories": _INT,
        "run_rd": _FLOAT,
        "mode": _STR,
        "branch": _STR,
        "record_every": _INT,
        "dump_trajectories": _INT,
        "phases": _STR,
    },
}


@dataclass
class RunConfig:
    """Parsed configuration; ``sections`` holds typed values keyed by section then key."""

    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    source: str = ""

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> Any:
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return value

    @property
    def units(self) -> UnitSystem:
        name = self.get("run", "units", "si")
        try:
            return UnitSystem(name)
        except ValueError:
            raise ConfigError(f"units must be 'si' or 'dimensionless', got {name!r}") from None

    def resonator(self) -> ResonatorParams:
        sec = "resonator"
        mass = self.get(sec, "mass")
        if mass is None and self.units is UnitSystem.DIMENSIONLESS:
            mass = 0.5
        try:
            return ResonatorParams(
                omega0=self.require(sec, "omega0"),
                gamma=self.require(sec, "gamma"),
                gamma3=self.require(sec, "gamma3"),
                kerr=self.require(sec, "kerr"),
                mass=self.require(sec, "mass") if mass is None else mass,
                temperature=self.require(sec, "temperature"),
                units=self.units,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"invalid resonator parameters: {exc}") from None


def _coerce(section: str, key: str, raw: str) -> Any:
    kinds = SCHEMA.get(section)
    if kinds is None:
        raise ConfigError(f"unknown section [{section}]")
    if key not in kinds:
        raise ConfigError(f"unknown key [{section}] {key}")
    try:
        return kinds[key](raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kinds[key].__name__}") from None


def parse_config(text: str, overrides: Sequence[str] = (), source: str = "<string>") -> RunConfig:
    """Parse INI text; ``overrides`` are 'section.key=value' strings applied last."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections: dict[str, dict[str, Any]] = {}
    for name in parser.sections():
        sections[name] = {k: _coerce(name, k, v) for k, v in parser.items(name)}
    for item in overrides:
        target, sep, raw = item.partition("=")
        section, dot, key = target.partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        sections.setdefault(section, {})[key] = _coerce(section, key, raw)
    return RunConfig(sections, source)


def load_config(path: str | Path | None, overrides: Sequence[str] = ()) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides, str(path))
