"""Plain-text scenario configuration.

INI layout, one section per concern; every key is optional except
`run.scenario`, and `auto` (the default for several keys) is resolved from
the scenario and the other values after all overrides are applied:

    [run]          scenario, label
    [chain]        sites, omega_01, omega_0T, j_xy, j_z
    [drive]        mode, rabi, carrier, pulse_area, pulse_duration,
                   repetition_period, average_rabi, pulse_offset, gate_windows
    [decay]        gamma
    [integrator]   frame, dt, t_max, snapshot_stride, n_snapshots,
                   max_drive_phase, max_carrier_phase, max_decay_step
    [trajectories] n_traj, master_seed, chunk_size, workers, crosscheck_lindblad

Numbers may be written as multiples of pi ("2pi", "pi/2", "4*pi").
Gate windows are "start:end" pairs separated by commas.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Optional

from .errors import ConfigFileError, ConfigInvariantError, SchemaError
from .experiments import (
    DEFAULT_OMEGA_01,
    DEFAULT_OMEGA_0T,
    DEFAULT_PULSE_DURATION,
    DEFAULT_RABI,
    DEFAULT_T_MAX,
    SCENARIOS,
    ScenarioConfig,
    scenario_from_dict,
    scenario_to_dict,
)
from .model import ChainSpec, DecayConfig, DriveSchedule
from .solvers import IntegratorConfig, TrajectoryConfig

AUTO = "auto"

# key -> (kind, default); kinds: str, float, int, bool, windows
SCHEMA = {
    "run": {"scenario": ("str", None), "label": ("str", AUTO)},
    "chain": {
        "sites": ("int", AUTO),
        "omega_01": ("float", DEFAULT_OMEGA_01),
        "omega_0T": ("float", DEFAULT_OMEGA_0T),
        "j_xy": ("float", 1.0),
        "j_z": ("float", 0.0),
    },
    "drive": {
        "mode": ("str", AUTO),
        "rabi": ("float", AUTO),
        "carrier": ("float", AUTO),
        "pulse_area": ("float", 2 * math.pi),
        "pulse_duration": ("float", DEFAULT_PULSE_DURATION),
        "repetition_period": ("float", AUTO),
        "average_rabi": ("float", DEFAULT_RABI),
        "pulse_offset": ("float", 0.0),
        "gate_windows": ("windows", ()),
    },
    "decay": {"gamma": ("float", AUTO)},
    "integrator": {
        "frame": ("str", AUTO),
        "dt": ("float", AUTO),
        "t_max": ("float", DEFAULT_T_MAX),
        "snapshot_stride": ("int", AUTO),
        "n_snapshots": ("int", 500),
        "max_drive_phase": ("float", 0.02),
        "max_carrier_phase": ("float", 0.16),
        "max_decay_step": ("float", 0.25),
    },
    "trajectories": {
        "n_traj": ("int", 5000),
        "master_seed": ("int", 20040901),
        "chunk_size": ("int", 500),
        "workers": ("int", 1),
        "crosscheck_lindblad": ("bool", True),
    },
}

POSITIVE = {
    "chain.omega_0T", "chain.j_xy", "drive.pulse_area", "drive.pulse_duration",
    "drive.repetition_period", "drive.average_rabi", "integrator.dt", "integrator.t_max",
    "integrator.snapshot_stride", "integrator.n_snapshots", "integrator.max_drive_phase",
    "integrator.max_carrier_phase", "integrator.max_decay_step", "trajectories.n_traj",
    "trajectories.chunk_size", "trajectories.workers",
}
NON_NEGATIVE = {"chain.j_z", "drive.rabi", "drive.carrier", "drive.pulse_offset",
                "decay.gamma", "trajectories.master_seed"}
CHOICES = {
    "run.scenario": SCENARIOS,
    "drive.mode": ("off", "continuous", "pulsed"),
    "integrator.frame": ("lab", "rwa"),
    "chain.sites": (2, 3),
}

_PI = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*(?:pi|π)\s*(?:/\s*(\d+\.?\d*))?$")


def parse_number(text: str) -> float:
    """Float, or a multiple of pi such as "2pi", "pi/2", "0.5*pi"."""
    s = text.strip().lower()
    m = _PI.match(s)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        den = float(m.group(2)) if m.group(2) else 1.0
        value = coef * math.pi / den
    else:
        value = float(s)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _parse_value(kind, text):
    if kind == "str":
        return text.strip()
    if kind == "float":
        return parse_number(text)
    if kind == "int":
        value = parse_number(text)
        if value != int(value):
            raise ValueError(f"{text!r} is not an integer")
        return int(value)
    if kind == "bool":
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{text!r} is not a boolean")
    windows = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        a, sep, b = part.partition(":")
        if not sep:
            raise ValueError(f"gate window {part!r} is not start:end")
        windows.append((parse_number(a), parse_number(b)))
    return tuple(windows)


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, for error context."""
    lines, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif section and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, 1)[0].strip()
            lines.setdefault((section, key), n)
    return lines


def read_raw(text: str, source: str = "<config>") -> tuple[dict, dict]:
    """Parse INI text into {section: {key: str}} and a line map."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise SchemaError(f"cannot parse {source}: {exc.message.splitlines()[0]}",
                          line=getattr(exc, "lineno", None)) from None
    raw = {s: dict(parser[s]) for s in parser.sections()}
    return raw, _key_lines(text)


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    """Apply "section.key=value" strings on top of raw values."""
    out = {s: dict(v) for s, v in raw.items()}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise SchemaError(f"override {item!r} must look like section.key=value")
        out.setdefault(section, {})[name] = value.strip()
    return out


def _typed(raw: dict, lines: dict) -> dict:
    values = {}
    for section, keys in raw.items():
        if section not in SCHEMA:
            raise SchemaError(f"unknown section [{section}]", key=section)
        for key, text in keys.items():
            full = f"{section}.{key}"
            line = lines.get((section, key))
            if key not in SCHEMA[section]:
                raise SchemaError("unknown key", key=full, line=line)
            kind, _ = SCHEMA[section][key]
            if text.strip().lower() == AUTO and SCHEMA[section][key][1] == AUTO:
                continue
            try:
                value = _parse_value(kind, text)
            except ValueError as exc:
                raise SchemaError(f"bad value: {exc}", key=full, line=line) from None
            _check_range(full, value, line)
            values[full] = value
    return values


def _check_range(full, value, line):
    if full in CHOICES and value not in CHOICES[full]:
        raise SchemaError(f"must be one of {CHOICES[full]}, got {value!r}", key=full, line=line)
    if full in POSITIVE and not value > 0:
        raise SchemaError(f"must be positive, got {value}", key=full, line=line)
    if full in NON_NEGATIVE and value < 0:
        raise SchemaError(f"must be non-negative, got {value}", key=full, line=line)


def resolve(raw: dict, lines: Optional[dict] = None) -> ScenarioConfig:
    """Typed values + defaults + `auto` resolution -> ScenarioConfig."""
    lines = lines or {}
    given = _typed(raw, lines)
    if "run.scenario" not in given:
        raise SchemaError("run.scenario is required", key="run.scenario")

    def get(full):
        if full in given:
            return given[full]
        section, key = full.split(".")
        return SCHEMA[section][key][1]

    def where(full):
        return {"key": full, "line": lines.get(tuple(full.split(".")))}

    scenario = get("run.scenario")
    label = get("run.label")
    label = scenario if label == AUTO else label

    sites = get("chain.sites")
    if sites == AUTO:
        sites = 3 if scenario == "three_site_gate" else 2
    factory = ChainSpec.qubit_barrier_qubit if sites == 3 else ChainSpec.barrier_qubit
    try:
        chain = factory(get("chain.omega_01"), get("chain.omega_0T"), get("chain.j_xy"), get("chain.j_z"))
    except ValueError as exc:
        raise ConfigInvariantError(str(exc), key="chain") from None

    drive = _resolve_drive(scenario, get, where)
    if drive.carrier == chain.omega_0T:
        drive = replace(drive, carrier=None)  # resonant carrier has one canonical form
    rabi = drive.rabi if drive.mode == "continuous" else get("drive.average_rabi")

    gamma = get("decay.gamma")
    if gamma == AUTO:
        gamma = {"zeno": 100 * rabi, "jump_crosscheck": rabi / 10}.get(scenario, 0.0)
    decay = DecayConfig(gamma)

    integrator = _resolve_integrator(drive, chain, get, where)

    trajectories = None
    if scenario == "jump_crosscheck" or "trajectories" in raw:
        trajectories = TrajectoryConfig(get("trajectories.n_traj"), get("trajectories.master_seed"),
                                        get("trajectories.chunk_size"), get("trajectories.workers"))
    return ScenarioConfig(scenario, chain, drive, decay, integrator, trajectories, label,
                          get("trajectories.crosscheck_lindblad"))


def _resolve_drive(scenario, get, where) -> DriveSchedule:
    mode = get("drive.mode")
    if mode == AUTO:
        mode = {"pulsed_decoupling": "pulsed", "three_site_gate": "off",
                "laser_off_baseline": "off"}.get(scenario, "continuous")
    carrier = get("drive.carrier")
    carrier = None if carrier == AUTO else carrier
    windows = get("drive.gate_windows")
    rabi = get("drive.rabi")
    try:
        if mode == "off":
            return DriveSchedule("off", gate_windows=windows)
        if mode == "continuous":
            return DriveSchedule.continuous(DEFAULT_RABI if rabi == AUTO else rabi, carrier, windows)
        area, tau = get("drive.pulse_area"), get("drive.pulse_duration")
        period = get("drive.repetition_period")
        period = area / get("drive.average_rabi") if period == AUTO else period
        if rabi != AUTO and not math.isclose(rabi, area / tau, rel_tol=1e-12):
            raise ConfigInvariantError(
                f"pulsed rabi must equal pulse_area / pulse_duration = {area / tau:.6g}", **where("drive.rabi"))
        return DriveSchedule.pulsed(area, tau, period, carrier=carrier, offset=get("drive.pulse_offset"),
                                    gate_windows=windows)
    except ConfigInvariantError:
        raise
    except ValueError as exc:
        raise ConfigInvariantError(str(exc), key="drive") from None


def _resolve_integrator(drive, chain, get, where) -> IntegratorConfig:
    frame = get("integrator.frame")
    if frame == AUTO:
        frame = "rwa" if drive.mode == "pulsed" else "lab"
    t_max, n_snap = get("integrator.t_max"), get("integrator.n_snapshots")
    carrier = chain.omega_0T if drive.carrier is None else drive.carrier
    base = IntegratorConfig.default(frame, t_max, carrier, n_snap)
    dt, stride = get("integrator.dt"), get("integrator.snapshot_stride")
    if dt == AUTO:
        dt = base.dt if stride == AUTO else t_max / (n_snap * stride)
    if stride == AUTO:
        n_steps = round(t_max / dt)
        stride = n_steps // n_snap if n_steps % n_snap == 0 and n_steps >= n_snap else 1
    try:
        cfg = IntegratorConfig(dt, t_max, stride, frame, get("integrator.max_drive_phase"),
                               get("integrator.max_carrier_phase"), get("integrator.max_decay_step"))
        cfg.check(carrier if drive.mode != "off" else None)
    except ValueError as exc:
        raise ConfigInvariantError(str(exc), **where("integrator.dt")) from None
    return cfg


def parse_config_text(text: str, overrides: Iterable[str] = (), source: str = "<config>") -> ScenarioConfig:
    raw, lines = read_raw(text, source)
    return resolve(apply_overrides(raw, overrides), lines)


def parse_config(path, overrides: Iterable[str] = ()) -> ScenarioConfig:
    """Read, override and resolve a config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFileError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config_text(text, overrides, str(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: ScenarioConfig) -> str:
    """Fully resolved config text; parsing it back gives an equal ScenarioConfig."""
    d = scenario_to_dict(cfg)
    drive = dict(d["drive"])
    windows = drive.pop("gate_windows")
    if drive["mode"] != "pulsed":
        for key in ("pulse_area", "pulse_duration", "repetition_period", "pulse_offset"):
            drive.pop(key)
    if drive["mode"] == "off":
        drive.pop("rabi")
        drive.pop("carrier")
    if windows:
        drive["gate_windows"] = ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in windows)
    sections = {"run": d["run"], "chain": d["chain"], "drive": drive, "decay": d["decay"],
                "integrator": d["integrator"]}
    if "trajectories" in d:
        sections["trajectories"] = d["trajectories"]
    out = []
    for name, keys in sections.items():
        out.append(f"[{name}]")
        out += [f"{k} = {_fmt(v)}" for k, v in keys.items()]
        out.append("")
    return "\n".join(out)


def config_from_manifest(manifest: dict) -> ScenarioConfig:
    """Rebuild the resolved config recorded in a run manifest."""
    try:
        return scenario_from_dict(manifest["config"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"manifest has no usable config: {exc}") from None
