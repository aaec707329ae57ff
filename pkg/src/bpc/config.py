"""
Scenario files.

A scenario is an INI file with the sections below.  Every key is optional
except ``[particle] m`` (unless a preset supplies it).  A value holding a
comma-separated list expands into one run per entry; several list-valued
keys expand to their Cartesian product.  ``[output] snapshots`` is always a
list of times and never expands.

::

    [scenario]
    name = demo            ; label, used for output subdirectories
    preset = global_sweep  ; rest | global_sweep; explicit keys override it

    [fluid]
    initial = sine         ; zero | sine | step | random_fourier | samples
    amplitude = 5
    k = 1                  ; sine wavenumber
    x_jump = 0.5           ; step position
    modes = 8              ; random_fourier
    seed = 0               ; random_fourier (overridden by --seed)
    samples =              ; CSV file with x,u columns for initial = samples
    n = 100                ; nodes per side (sets n_left and n_right)
    dt = 1e-3              ; fixed step, or cap when adaptive
    adaptive = true
    cfl_safety = 0.5
    coupling_iters = 3
    coupling_tol = 1e-10

    [particle]
    m = 1                  ; required
    h0 = 0.5
    ell0 = 0
    contact_tol = 1e-3

    [control]
    mode = free            ; free (g = 0) | constant | hold | strategy
    g = 0                  ; constant mode
    t_end = 1              ; free / constant / hold
    delta = 0.05           ; strategy
    h_target = 0.6
    T0_duration = 0.01
    tracking_duration = 1
    norm_kind = sup        ; sup | l2
    slack = 0.1
    handoff_tol = 1e-2
    closed_loop_tracking = false

    [output]
    dir = bpc_out
    decimate = 1           ; keep every k-th timeseries row and state
    snapshots = 0, 0.5     ; u_<t>.csv written at the first state with time >= t
    snapshot_points = 201
"""
from __future__ import annotations

import configparser
import io
import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from bpc import initial_data
from bpc.control import StrategyParams
from bpc.core import SimConfig


class ConfigError(ValueError):
    """Malformed scenario file; the message names the offending key."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t
    return parse


def _times(text: str) -> tuple:
    return tuple(float(s) for s in text.split(",") if s.strip())


_REQUIRED = object()

# (section, key) -> (parser, default)
SCHEMA: dict[tuple[str, str], tuple[Callable, object]] = {
    ("scenario", "name"): (str, "scenario"),
    ("scenario", "preset"): (str, ""),
    ("fluid", "initial"): (_choice("zero", "sine", "step", "random_fourier", "samples"), "zero"),
    ("fluid", "amplitude"): (float, 1.0),
    ("fluid", "k"): (int, 1),
    ("fluid", "x_jump"): (float, 0.5),
    ("fluid", "modes"): (int, 8),
    ("fluid", "seed"): (int, 0),
    ("fluid", "samples"): (str, ""),
    ("fluid", "n"): (int, 100),
    ("fluid", "n_left"): (int, None),
    ("fluid", "n_right"): (int, None),
    ("fluid", "dt"): (float, 1e-3),
    ("fluid", "adaptive"): (_bool, True),
    ("fluid", "cfl_safety"): (float, 0.5),
    ("fluid", "coupling_iters"): (int, 3),
    ("fluid", "coupling_tol"): (float, 1e-10),
    ("particle", "m"): (float, _REQUIRED),
    ("particle", "h0"): (float, 0.5),
    ("particle", "ell0"): (float, 0.0),
    ("particle", "contact_tol"): (float, 1e-3),
    ("control", "mode"): (_choice("free", "constant", "hold", "strategy"), "free"),
    ("control", "g"): (float, 0.0),
    ("control", "t_end"): (float, 1.0),
    ("control", "delta"): (float, 0.05),
    ("control", "h_target"): (float, 0.6),
    ("control", "T0_duration"): (float, 0.01),
    ("control", "tracking_duration"): (float, 1.0),
    ("control", "norm_kind"): (_choice("sup", "l2"), "sup"),
    ("control", "slack"): (float, 0.1),
    ("control", "handoff_tol"): (float, 1e-2),
    ("control", "closed_loop_tracking"): (_bool, False),
    ("output", "dir"): (str, "bpc_out"),
    ("output", "decimate"): (int, 1),
    ("output", "snapshots"): (_times, ()),
    ("output", "snapshot_points"): (int, 201),
}

_NO_EXPAND = {("output", "snapshots"), ("scenario", "name"), ("scenario", "preset"),
              ("output", "dir"), ("fluid", "samples")}

PRESETS: dict[str, dict[tuple[str, str], str]] = {
    "rest": {
        ("scenario", "name"): "rest",
        ("fluid", "initial"): "zero",
        ("fluid", "n"): "50",
        ("particle", "m"): "1",
        ("particle", "h0"): "0.5",
        ("control", "mode"): "free",
        ("control", "t_end"): "0.1",
    },
    "global_sweep": {
        ("scenario", "name"): "global_sweep",
        ("fluid", "initial"): "sine",
        ("fluid", "amplitude"): "0.5, 5, 50",
        ("fluid", "n"): "100",
        ("particle", "m"): "10",
        ("particle", "h0"): "0.3",
        ("control", "mode"): "strategy",
        ("control", "delta"): "0.05",
        ("control", "h_target"): "0.6",
        ("output", "decimate"): "10",
    },
}


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    amplitude: float = 1.0
    k: int = 1
    x_jump: float = 0.5
    modes: int = 8
    seed: int = 0
    samples: str = ""

    def build(self):
        if self.kind == "samples":
            if not self.samples:
                raise ConfigError("[fluid] samples: a CSV path is required for initial = samples")
            data = np.loadtxt(self.samples, delimiter=",", skiprows=1, ndmin=2)
            return initial_data.from_samples(data[:, 0], self.amplitude * data[:, 1])
        return initial_data.make(self.kind, amplitude=self.amplitude, k=self.k,
                                 x_jump=self.x_jump, modes=self.modes, seed=self.seed)


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "bpc_out"
    decimate: int = 1
    snapshots: tuple = ()
    snapshot_points: int = 201


@dataclass
class Scenario:
    name: str
    initial: InitialSpec
    sim: SimConfig
    h0: float
    ell0: float
    mode: str
    g: float
    t_end: float
    strategy: StrategyParams
    output: OutputSpec
    resolved: dict = field(default_factory=dict)
    varied: tuple = ()

    @property
    def delta(self) -> float:
        return self.sim.delta

    @property
    def h_target(self) -> float:
        return self.sim.h_target


def read_raw(path) -> dict[tuple[str, str], str]:
    """INI file to a flat ``{(section, key): text}`` map, schema-checked."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    raw = {}
    known_sections = {s for s, _ in SCHEMA}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser.items(section):
            if (section, key) not in SCHEMA:
                raise ConfigError(f"unknown key [{section}] {key}")
            raw[(section, key)] = value
    return raw


def _merged(raw: dict, seed: Optional[int]) -> dict:
    preset = raw.get(("scenario", "preset"), "").strip()
    merged = {}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"[scenario] preset: unknown preset {preset!r}; "
                              f"choose from {', '.join(sorted(PRESETS))}")
        merged.update(PRESETS[preset])
    merged.update(raw)
    if seed is not None:
        merged[("fluid", "seed")] = str(seed)
    return merged


def _parse_value(key, text):
    parser, _ = SCHEMA[key]
    try:
        return parser(text)
    except ValueError as exc:
        raise ConfigError(f"[{key[0]}] {key[1]}: invalid value {text!r} ({exc})") from None


def expand(raw: dict, seed: Optional[int] = None) -> list[dict]:
    """Fill defaults and expand list-valued keys into one resolved map per run."""
    merged = _merged(raw, seed)
    axes = []
    for key, text in merged.items():
        if key not in _NO_EXPAND and "," in text:
            axes.append((key, [s.strip() for s in text.split(",") if s.strip()]))
    combos = itertools.product(*[vals for _, vals in axes]) if axes else [()]
    out = []
    for combo in combos:
        entry = dict(merged)
        for (key, _), value in zip(axes, combo):
            entry[key] = value
        resolved = {}
        for key, (_, default) in SCHEMA.items():
            if key in entry:
                resolved[key] = _parse_value(key, entry[key])
            elif default is _REQUIRED:
                raise ConfigError(f"missing required key [{key[0]}] {key[1]}")
            else:
                resolved[key] = default
        resolved["_varied"] = tuple((k, v) for (k, _), v in zip(axes, combo))
        out.append(resolved)
    return out


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text)


def scenario_from_resolved(r: dict) -> Scenario:
    varied = r.get("_varied", ())
    name = r[("scenario", "name")]
    if varied:
        name = name + "__" + "_".join(f"{k[1]}={v}" for k, v in varied)
    n = r[("fluid", "n")]
    n_left = r[("fluid", "n_left")] or n
    n_right = r[("fluid", "n_right")] or n
    try:
        sim = SimConfig(
            m=r[("particle", "m")], n_left=n_left, n_right=n_right, dt=r[("fluid", "dt")],
            adaptive=r[("fluid", "adaptive")], cfl_safety=r[("fluid", "cfl_safety")],
            delta=r[("control", "delta")], h_target=r[("control", "h_target")],
            contact_tol=r[("particle", "contact_tol")],
            coupling_iters=r[("fluid", "coupling_iters")],
            coupling_tol=r[("fluid", "coupling_tol")], decimate=r[("output", "decimate")])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    h0 = r[("particle", "h0")]
    if not 0.0 < h0 < 1.0:
        raise ConfigError(f"[particle] h0: must lie in (0, 1), got {h0!r}")
    if r[("control", "t_end")] <= 0:
        raise ConfigError("[control] t_end: must be positive")
    params = StrategyParams(
        T0_duration=r[("control", "T0_duration")],
        tracking_duration=r[("control", "tracking_duration")],
        norm_kind=r[("control", "norm_kind")], slack=r[("control", "slack")],
        handoff_tol=r[("control", "handoff_tol")],
        closed_loop_tracking=r[("control", "closed_loop_tracking")])
    initial = InitialSpec(r[("fluid", "initial")], r[("fluid", "amplitude")], r[("fluid", "k")],
                          r[("fluid", "x_jump")], r[("fluid", "modes")], r[("fluid", "seed")],
                          r[("fluid", "samples")])
    output = OutputSpec(r[("output", "dir")], r[("output", "decimate")],
                        r[("output", "snapshots")], r[("output", "snapshot_points")])
    return Scenario(_slug(name), initial, sim, h0, r[("particle", "ell0")],
                    r[("control", "mode")], r[("control", "g")], r[("control", "t_end")],
                    params, output, {k: v for k, v in r.items() if k != "_varied"}, varied)


def load(path, seed: Optional[int] = None) -> list[Scenario]:
    """Parse, validate and expand a scenario file."""
    if not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")
    return [scenario_from_resolved(r) for r in expand(read_raw(path), seed)]


def manifest_text(scenario: Scenario) -> str:
    """Fully resolved configuration (defaults included) as INI text."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for (section, key), value in scenario.resolved.items():
        if not cp.has_section(section):
            cp.add_section(section)
        if isinstance(value, tuple):
            text = ", ".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        elif value is None:
            text = ""
        else:
            text = str(value).lower() if isinstance(value, bool) else str(value)
        cp.set(section, key, text)
    # the effective name (with swept values) and derived node counts
    cp.set("scenario", "name", scenario.name)
    cp.set("fluid", "n_left", str(scenario.sim.n_left))
    cp.set("fluid", "n_right", str(scenario.sim.n_right))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
