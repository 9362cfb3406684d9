"""Run configuration: INI files with dimensionless parameter ranges.

A config has four sections::

    [run]         command, seed, workers, out
    [params]      N (or g_over_kappa), drive, detuning, optimal_subsystem,
                  drive_grid, detuning_grid
    [truncation]  n_max, tail_tol, max_cutoff
    [options]     command-specific settings

Ranges are either comma-separated numbers or ``linspace(start, stop, num)``.
``drive`` and ``detuning`` also accept the token ``optimal``, which resolves
to the per-N optimum of ``optimal_subsystem`` before the sweep runs.
See docs/config.md for every key.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .metrology import SUBSYSTEMS

COMMANDS = (
    "steady",
    "qfi-sweep",
    "wigner",
    "bloch-sweep",
    "optimize",
    "scaling",
    "homodyne",
    "heterodyne",
    "bayes",
    "diagnostics",
)
OPTIMAL = "optimal"
SECTIONS = ("run", "params", "truncation", "options")


class UsageError(ConfigError):
    """A config that is well formed but asks for nothing (an empty range)."""


Range = tuple  # tuple of floats, or the string OPTIMAL


@dataclass(frozen=True)
class RunConfig:
    command: str
    N: tuple = ()
    drive: Range = (0.0,)
    detuning: Range = (0.0,)
    seed: int = 0
    workers: int = 1
    out: str = "results"
    # truncation; n_max = 0 picks a starting cutoff from N
    n_max: int = 0
    tail_tol: float = 1e-8
    max_cutoff: int = 160
    # operating-point search
    optimal_subsystem: str = "whole"
    drive_grid: tuple = tuple(np.linspace(0.0, 0.8, 33).tolist())
    detuning_grid: tuple = tuple(np.linspace(-1.0, 1.0, 21).tolist())
    rounds: int = 3
    # options
    subsystems: tuple = SUBSYSTEMS
    points: int = 0  # 0: command default
    half_width: float = 0.0  # 0: sized from the state
    angles: tuple = ()
    fit_n_min: float = 20.0
    n_experiments: int = 100
    shots: int = 1000
    width: float = 0.1
    candidates: int = 201
    span: float = 0.1
    record_shots: tuple = ()
    experiments: bool = True

    def __post_init__(self):
        validate(self)

    def start_cutoff(self, N: float) -> int:
        if self.n_max:
            return self.n_max
        return int(min(40 + math.ceil(1.2 * N), self.max_cutoff))


# key -> (section, kind)
_KEYS = {
    "command": ("run", "command"),
    "seed": ("run", "uint"),
    "workers": ("run", "posint"),
    "out": ("run", "str"),
    "N": ("params", "range"),
    "g_over_kappa": ("params", "range"),
    "drive": ("params", "range_or_optimal"),
    "detuning": ("params", "range_or_optimal"),
    "optimal_subsystem": ("params", "subsystem"),
    "drive_grid": ("params", "range"),
    "detuning_grid": ("params", "range"),
    "rounds": ("params", "posint"),
    "n_max": ("truncation", "uint"),
    "tail_tol": ("truncation", "posfloat"),
    "max_cutoff": ("truncation", "posint"),
    "subsystems": ("options", "subsystems"),
    "points": ("options", "uint"),
    "half_width": ("options", "nonnegfloat"),
    "angles": ("options", "range"),
    "fit_n_min": ("options", "float"),
    "n_experiments": ("options", "posint"),
    "shots": ("options", "uint"),
    "width": ("options", "posfloat"),
    "candidates": ("options", "posint"),
    "span": ("options", "posfloat"),
    "record_shots": ("options", "uintlist"),
    "experiments": ("options", "bool"),
}

_LINSPACE = re.compile(r"^linspace\(\s*([^,]+),\s*([^,]+),\s*([^,]+)\s*\)$")


def parse_range(text: str) -> tuple:
    """Parse ``1, 2, 3`` or ``linspace(a, b, n)`` into a tuple of floats."""
    text = text.strip()
    m = _LINSPACE.match(text)
    if m:
        a, b, n = float(m.group(1)), float(m.group(2)), m.group(3).strip()
        if not re.fullmatch(r"\d+", n):
            raise ValueError(f"linspace count must be a non-negative integer, got {n!r}")
        return tuple(np.linspace(a, b, int(n)).tolist())
    if not text:
        return ()
    return tuple(float(t) for t in text.split(","))


def _format_range(values) -> str:
    if isinstance(values, str):
        return values
    return ", ".join(repr(float(v)) for v in values)


def _parse_value(kind: str, text: str):
    text = text.strip()
    if kind == "command":
        if text not in COMMANDS:
            raise ValueError(f"unknown command {text!r}; expected one of {', '.join(COMMANDS)}")
        return text
    if kind == "str":
        return text
    if kind in ("uint", "posint"):
        if not re.fullmatch(r"\d+", text):
            raise ValueError(f"expected a non-negative integer, got {text!r}")
        v = int(text)
        if kind == "posint" and v < 1:
            raise ValueError(f"expected a positive integer, got {text!r}")
        if v >= 2**64:
            raise ValueError("integer does not fit in 64 bits")
        return v
    if kind in ("float", "posfloat", "nonnegfloat"):
        v = float(text)
        if not math.isfinite(v) or (kind == "posfloat" and v <= 0) or (kind == "nonnegfloat" and v < 0):
            raise ValueError(f"expected a {'positive ' if kind == 'posfloat' else ''}finite number, got {text!r}")
        return v
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected true/false, got {text!r}")
    if kind == "range":
        return parse_range(text)
    if kind == "range_or_optimal":
        return OPTIMAL if text == OPTIMAL else parse_range(text)
    if kind == "subsystem":
        if text not in SUBSYSTEMS:
            raise ValueError(f"expected one of {', '.join(SUBSYSTEMS)}, got {text!r}")
        return text
    if kind == "subsystems":
        items = tuple(t.strip() for t in text.split(",") if t.strip())
        bad = [t for t in items if t not in SUBSYSTEMS]
        if bad:
            raise ValueError(f"unknown subsystem(s) {bad}; expected {', '.join(SUBSYSTEMS)}")
        return items
    if kind == "uintlist":
        return tuple(_parse_value("uint", t) for t in text.split(",") if t.strip())
    raise AssertionError(kind)


def validate(cfg: RunConfig) -> None:
    """Semantic checks; raises UsageError for empty ranges and ConfigError otherwise."""
    if cfg.command not in COMMANDS:
        raise ConfigError(f"[run] command: unknown command {cfg.command!r}")
    if len(cfg.N) == 0:
        raise UsageError("[params] N: empty range")
    if any(not (n > 0 and math.isfinite(n)) for n in cfg.N):
        raise ConfigError("[params] N: every N must be positive")
    for name in ("drive", "detuning"):
        v = getattr(cfg, name)
        if v != OPTIMAL and len(v) == 0:
            raise UsageError(f"[params] {name}: empty range")
    if cfg.drive != OPTIMAL and any(d < 0 for d in cfg.drive):
        raise ConfigError("[params] drive: drive ratios must be non-negative")
    if cfg.drive == OPTIMAL and len(cfg.drive_grid) < 2:
        raise UsageError("[params] drive_grid: needs at least two values to optimize the drive")
    if cfg.detuning == OPTIMAL and len(cfg.detuning_grid) < 1:
        raise UsageError("[params] detuning_grid: empty range")
    if cfg.command in ("optimize", "scaling") and len(cfg.drive_grid) < 2:
        raise UsageError("[params] drive_grid: needs at least two values")
    if len(cfg.subsystems) == 0:
        raise UsageError("[options] subsystems: empty list")
    if cfg.n_max and cfg.n_max < 2:
        raise ConfigError("[truncation] n_max must be 0 (automatic) or >= 2")
    if cfg.n_max > cfg.max_cutoff:
        raise ConfigError("[truncation] n_max exceeds max_cutoff")
    if cfg.points and cfg.points < 2:
        raise ConfigError("[options] points must be 0 (default) or >= 2")
    if cfg.command == "scaling" and sum(n > cfg.fit_n_min for n in cfg.N) < 4:
        raise ConfigError(f"[options] fit_n_min: scaling needs at least 4 values of N above {cfg.fit_n_min}")
    if cfg.command == "bayes" and cfg.candidates % 2 == 0:
        raise ConfigError("[options] candidates must be odd so the operating drive is a grid point")


def _line_of(text: str, section: str | None, key: str | None) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*[=:]", s):
            return i
    return None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse INI text into a RunConfig; errors name the file, line and field."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keys are case sensitive ("N")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            line = _line_of(text, section, None)
            raise ConfigError(f"{source}:{line}: unknown section [{section}]; expected {', '.join(SECTIONS)}")
        for key, raw in parser.items(section):
            line = _line_of(text, section, key)
            where = f"{source}:{line}: [{section}] {key}"
            if key not in _KEYS:
                raise ConfigError(f"{where}: unknown key")
            expected, kind = _KEYS[key]
            if expected != section:
                raise ConfigError(f"{where}: belongs in [{expected}]")
            try:
                values[key] = _parse_value(kind, raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from None
    if "command" not in values:
        raise ConfigError(f"{source}: [run] command is required")
    if "g_over_kappa" in values:
        if "N" in values:
            raise ConfigError(f"{source}: give either N or g_over_kappa, not both")
        values["N"] = tuple(0.25 * r * r for r in values.pop("g_over_kappa"))
    if "N" not in values:
        raise ConfigError(f"{source}: [params] N (or g_over_kappa) is required")
    try:
        return RunConfig(**values)
    except ConfigError as exc:
        raise type(exc)(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


def to_ini(cfg: RunConfig, include_run: bool = True) -> str:
    """Canonical INI text; parse_config(to_ini(cfg)) == cfg."""
    sections = {s: [] for s in SECTIONS}
    for f in dataclasses.fields(cfg):
        name = f.name
        section, kind = _KEYS[name]
        if section == "run" and not include_run and name != "command":
            continue
        v = getattr(cfg, name)
        if kind in ("range", "range_or_optimal"):
            text = _format_range(v)
        elif kind in ("subsystems", "uintlist"):
            text = ", ".join(str(t) for t in v)
        elif kind == "bool":
            text = "true" if v else "false"
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        sections[section].append(f"{name} = {text}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())


def config_hash(cfg: RunConfig) -> str:
    """Digest of everything that affects results (not workers or out)."""
    canon = to_ini(dataclasses.replace(cfg, workers=1, out=""), include_run=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def with_overrides(cfg: RunConfig, seed=None, workers=None, out=None) -> RunConfig:
    changes = {k: v for k, v in (("seed", seed), ("workers", workers), ("out", out)) if v is not None}
    return dataclasses.replace(cfg, **changes) if changes else cfg
