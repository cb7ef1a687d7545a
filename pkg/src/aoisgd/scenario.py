"""Scenario files: YAML parsing, validation against a fixed schema, defaults,
and construction of the simulation objects.

Every key has a default in :data:`DEFAULTS`; unknown keys are rejected so a
scenario file together with the defaults table fully determines a run.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import channel as ch
from . import coverage as cov
from . import graph as gr
from .errors import ConfigError, InvalidInput
from .optimizer import StepSchedule, sequence_from_config

SCHEMA_VERSION = 1

DEFAULTS: dict[str, Any] = {
    "name": "unnamed",
    "agents": 16,
    "slots": 10000,
    "slot_duration": 1.0,
    "seed": 20240601,
    "event_order": "rx-tick-tx",
    "topology": {
        "kind": "cycles",  # cycles | explicit | complete | line
        "graphs": None,
        "probabilities": None,
        "epsilon_floor": 0.01,
    },
    "channel": {
        "mode": "probability",  # probability | sinr | lossless
        "capacity": None,  # components per slot; None means all of them
        "channels": 8,
        "latent_matrix": [[0.95, 0.05], [0.05, 0.95]],
        "channel_matrices": [[[0.9, 0.1], [0.2, 0.8]], [[0.8, 0.2], [0.1, 0.9]]],
        "decay_mode": "sqrt_decay",
        "success_scale": None,
        "success_scale_range": [0.5, 0.9],
        "success_scale_seed": 7,
        "initial_latent": 0,
        "initial_states": 0,
        "sinr": {
            "beta": 1.0,
            "noise_floor": 1.0,
            "bandwidth": 1.0,
            "signal_mean": 4.0,
            "interference_mean": 0.5,
            "epsilon": 0.1,
            "delta": 0.1,
            "fallback_power": 1.0,
        },
    },
    "clocks": {
        "kind": "poisson",  # poisson | every_slot | none
        "rate": 0.2,
        "rates": None,
    },
    "problem": {
        "kind": "coverage",  # coverage | quadratic | none
        "delta": 0.25,
        "xi": [0.5, 1.5],
        "xi_mode": "shared",  # shared | per_agent
        "mc_samples": 256,
        "targets": "pentagon",
        "target_radius": 0.6,
        "target_count": 5,
        "penalty": True,
        "centers": None,
        "upper": None,
        "penalty_weight": 0.0,
        "dim": 1,
        "error_bound": 0.0,
        "init": {"kind": "annulus", "r_min": 1.2, "r_max": 2.0, "seed": 11, "positions": None},
    },
    "schedule": {
        "a": {"kind": "inverse_power", "exponent": 1.0, "scale": 1000.0, "offset": 10.0, "shift": 0.0},
        "b": {"kind": "inverse_power", "exponent": 2.0 / 3.0, "scale": 1000.0, "offset": 10.0,
              "shift": 0.0},
        "kappa": 1.0,
    },
    "output": {
        "aoi_stride": 1,
        "record_log": False,
    },
    "verify": {
        "horizon": 1000000,
        "pilot_slots": 2000,
        "channel_trace_slots": 100000,
        "decay_lags": [1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20],
        "rate_floor": 0.01,
    },
}

# keys whose value is a free-form mapping rather than a nested schema section
_LEAF_MAPPINGS = {("schedule", "a"), ("schedule", "b")}
_SEQUENCE_KINDS = {"inverse_power": {"kind", "exponent", "scale", "offset", "shift"},
                   "constant": {"kind", "value"}}


@dataclass
class ChannelSetup:
    mode: str
    capacity: int
    channel_count: int
    bank: ch.FadingChannelBank | None = None
    sinr_model: ch.SinrLinkModel | None = None


@dataclass
class Scenario:
    name: str
    agent_count: int
    slot_count: int
    slot_duration: float
    topology: gr.TopologySchedule
    channel: ChannelSetup
    problem: Any
    schedule: StepSchedule
    clock_kind: str
    clock_rates: np.ndarray
    initial_positions: np.ndarray
    error_bound: float
    seed: int
    event_order: str = "rx-tick-tx"
    xi_mode: str = "shared"
    aoi_stride: int = 1
    record_log: bool = False
    config: dict = field(default_factory=dict)

    def with_seed(self, seed: int) -> "Scenario":
        cfg = copy.deepcopy(self.config)
        cfg["seed"] = int(seed)
        return build_scenario(cfg)

    def with_overrides(self, **sections) -> "Scenario":
        cfg = copy.deepcopy(self.config)
        _deep_update(cfg, sections)
        return build_scenario(cfg)


# --------------------------------------------------------------------------
# Parsing with line numbers


def _line_index(node, path=(), out=None):
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_index(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


def _nearest_line(lines: dict, path: tuple):
    while path:
        if path in lines:
            return lines[path]
        path = path[:-1]
    return lines.get((), None)


def parse_text(text: str, path: str | None = None) -> tuple[dict, dict]:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line, path) from None
    if data is None:
        data, lines = {}, {}
    else:
        lines = _line_index(node)
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping", 1, path)
    return data, lines


def _check_keys(data: dict, defaults: dict, lines: dict, path: tuple, src):
    for key, value in data.items():
        p = path + (key,)
        if key not in defaults:
            raise ConfigError(f"unknown key '{'.'.join(map(str, p))}'", _nearest_line(lines, p), src)
        if isinstance(defaults[key], dict) and p not in _LEAF_MAPPINGS:
            if not isinstance(value, dict):
                raise ConfigError(f"'{'.'.join(map(str, p))}' must be a mapping",
                                  _nearest_line(lines, p), src)
            _check_keys(value, defaults[key], lines, p, src)


def _deep_update(base: dict, over: dict) -> dict:
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict) and k not in ("a", "b"):
            _deep_update(base[k], v)
        else:
            base[k] = copy.deepcopy(v)
    return base


def resolve(data: dict, lines: dict | None = None, src: str | None = None) -> dict:
    """Merge ``data`` over the defaults after checking that every key is known."""
    lines = lines or {}
    _check_keys(data, DEFAULTS, lines, (), src)
    cfg = copy.deepcopy(DEFAULTS)
    _deep_update(cfg, data)
    return cfg


# --------------------------------------------------------------------------
# Construction


def _fail(msg, lines, path, src):
    raise ConfigError(msg, _nearest_line(lines, path), src)


def _int(cfg, key, lines, path, src, lo=None):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        _fail(f"'{'.'.join(path + (key,))}' must be an integer", lines, path + (key,), src)
    if lo is not None and v < lo:
        _fail(f"'{'.'.join(path + (key,))}' must be >= {lo}", lines, path + (key,), src)
    return int(v)


def _float(cfg, key, lines, path, src, positive=False):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"'{'.'.join(path + (key,))}' must be a number", lines, path + (key,), src)
    if positive and not v > 0:
        _fail(f"'{'.'.join(path + (key,))}' must be positive", lines, path + (key,), src)
    return float(v)


def _choice(cfg, key, options, lines, path, src):
    v = cfg[key]
    if v not in options:
        _fail(f"'{'.'.join(path + (key,))}' must be one of {sorted(options)}, got {v!r}",
              lines, path + (key,), src)
    return v


def build_topology(cfg: dict, D: int, lines=None, src=None) -> gr.TopologySchedule:
    lines = lines or {}
    t = cfg["topology"]
    path = ("topology",)
    kind = _choice(t, "kind", {"cycles", "explicit", "complete", "line"}, lines, path, src)
    try:
        if kind == "cycles":
            graphs = gr.experiment_cycle_topologies(D)
        elif kind == "complete":
            edges = tuple((i, j) for i in range(D) for j in range(D) if i != j)
            graphs = [gr.DirectedGraph(D, edges)]
        elif kind == "line":
            graphs = [gr.DirectedGraph(D, tuple((i, i + 1) for i in range(D - 1)))]
        else:
            if not t["graphs"]:
                _fail("explicit topology needs 'graphs'", lines, path, src)
            graphs = [gr.DirectedGraph(D, tuple(tuple(int(v) for v in e) for e in g))
                      for g in t["graphs"]]
        probs = t["probabilities"]
        return gr.TopologySchedule(tuple(graphs), None if probs is None else tuple(probs),
                                   float(t["epsilon_floor"]))
    except (InvalidInput, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        _fail(f"invalid topology: {exc}", lines, path, src)


def draw_success_scale(channels: int, states: int, lo: float, hi: float, seed: int) -> np.ndarray:
    """Per (channel, state) scale ``c_s`` uniform on ``[lo, hi]`` from a fixed seed."""
    rng = np.random.default_rng(seed)
    return lo + (hi - lo) * rng.random((channels, states))


def build_channel(cfg: dict, D: int, lines=None, src=None) -> ChannelSetup:
    lines = lines or {}
    c = cfg["channel"]
    path = ("channel",)
    mode = _choice(c, "mode", {"probability", "sinr", "lossless"}, lines, path, src)
    cap = c["capacity"]
    capacity = D if cap is None else _int(c, "capacity", lines, path, src, lo=1)
    C = _int(c, "channels", lines, path, src, lo=1)
    setup = ChannelSetup(mode, capacity, C)
    if mode == "probability":
        try:
            mats = np.asarray(c["channel_matrices"], dtype=float)
            S = mats.shape[-1]
            if c["success_scale"] is None:
                lo, hi = c["success_scale_range"]
                scale = draw_success_scale(C, S, float(lo), float(hi), int(c["success_scale_seed"]))
                c["success_scale"] = scale.tolist()  # recorded in the resolved config
            scale = np.asarray(c["success_scale"], dtype=float)
            if scale.ndim == 1:
                scale = np.tile(scale, (C, 1))
            init = c["initial_states"]
            states = np.full(C, int(init)) if np.isscalar(init) else np.asarray(init, dtype=np.int64)
            setup.bank = ch.FadingChannelBank(c["latent_matrix"], mats, scale,
                                              c["decay_mode"], int(c["initial_latent"]), states)
        except (InvalidInput, ValueError, TypeError) as exc:
            _fail(f"invalid channel bank: {exc}", lines, path, src)
    elif mode == "sinr":
        s = c["sinr"]
        try:
            phys = ch.LinkPhysics(float(s["noise_floor"]), float(s["beta"]), float(s["bandwidth"]))
            setup.sinr_model = ch.SinrLinkModel(phys, float(s["signal_mean"]),
                                                float(s["interference_mean"]),
                                                float(s["epsilon"]), float(s["delta"]),
                                                float(s["fallback_power"]))
        except (InvalidInput, ValueError, TypeError) as exc:
            _fail(f"invalid sinr settings: {exc}", lines, path + ("sinr",), src)
    return setup


def build_problem(cfg: dict, D: int, lines=None, src=None):
    lines = lines or {}
    p = cfg["problem"]
    path = ("problem",)
    kind = _choice(p, "kind", {"coverage", "quadratic", "none"}, lines, path, src)
    try:
        if kind == "coverage":
            if p["targets"] == "pentagon":
                targets = cov.pentagon_targets(float(p["target_radius"]), int(p["target_count"]))
            else:
                targets = np.asarray(p["targets"], dtype=float)
            lo, hi = p["xi"]
            prob = cov.CoverageProblem(D, targets, float(p["delta"]), cov.UniformXi(float(lo), float(hi)),
                                       int(p["mc_samples"]), bool(p["penalty"]))
            dim = 2
        elif kind == "quadratic":
            centers = np.zeros((D, 1)) if p["centers"] is None else np.asarray(p["centers"], dtype=float)
            centers = centers.reshape(D, -1)
            upper = math.inf if p["upper"] is None else float(p["upper"])
            prob = cov.QuadraticProblem(centers, upper, float(p["penalty_weight"]))
            dim = centers.shape[1]
        else:
            dim = int(p["dim"])
            prob = cov.NullProblem(dim)
    except (InvalidInput, ValueError, TypeError) as exc:
        _fail(f"invalid problem: {exc}", lines, path, src)
    init = p["init"]
    ik = init.get("kind", "annulus")
    if ik == "annulus":
        if dim != 2:
            _fail("annulus initialisation needs a planar problem", lines, path + ("init",), src)
        x0 = cov.annulus_positions(D, float(init["r_min"]), float(init["r_max"]), int(init["seed"]))
    elif ik == "explicit":
        x0 = np.asarray(init["positions"], dtype=float).reshape(D, dim)
    elif ik == "zeros":
        x0 = np.zeros((D, dim))
    else:
        _fail(f"unknown init kind {ik!r}", lines, path + ("init",), src)
    eb = _float(p, "error_bound", lines, path, src)
    if eb < 0:
        _fail("'problem.error_bound' must be nonnegative", lines, path + ("error_bound",), src)
    return prob, x0, eb


def build_schedule(cfg: dict, lines=None, src=None) -> StepSchedule:
    lines = lines or {}
    s = cfg["schedule"]
    seqs = []
    for key in ("a", "b"):
        spec = s[key]
        kind = spec.get("kind") if isinstance(spec, dict) else None
        allowed = _SEQUENCE_KINDS.get(kind)
        if allowed is None:
            _fail(f"'schedule.{key}.kind' must be one of {sorted(_SEQUENCE_KINDS)}",
                  lines, ("schedule", key), src)
        extra = set(spec) - allowed
        if extra:
            _fail(f"unknown key 'schedule.{key}.{sorted(extra)[0]}'", lines,
                  ("schedule", key, sorted(extra)[0]), src)
        seqs.append(sequence_from_config(spec))
    return StepSchedule(seqs[0], seqs[1], float(s["kappa"]))


def build_scenario(cfg: dict, lines: dict | None = None, src: str | None = None) -> Scenario:
    """Validate a resolved config and build the simulation objects."""
    lines = lines or {}
    D = _int(cfg, "agents", lines, (), src, lo=1)
    N = _int(cfg, "slots", lines, (), src, lo=1)
    dt = _float(cfg, "slot_duration", lines, (), src, positive=True)
    seed = _int(cfg, "seed", lines, (), src, lo=0)
    if seed >= 2 ** 64:
        _fail("'seed' must fit in 64 bits", lines, ("seed",), src)
    order = _choice(cfg, "event_order", {"rx-tick-tx", "deliver-first"}, lines, (), src)
    topo = build_topology(cfg, D, lines, src)
    chan = build_channel(cfg, D, lines, src)
    prob, x0, eb = build_problem(cfg, D, lines, src)
    sched = build_schedule(cfg, lines, src)
    clk = cfg["clocks"]
    ck = _choice(clk, "kind", {"poisson", "every_slot", "none"}, lines, ("clocks",), src)
    if clk["rates"] is not None:
        rates = np.asarray(clk["rates"], dtype=float)
        if rates.shape != (D,):
            _fail("'clocks.rates' needs one rate per agent", lines, ("clocks", "rates"), src)
    else:
        rates = np.full(D, _float(clk, "rate", lines, ("clocks",), src))
    if ck == "poisson" and np.any(rates < 0):
        _fail("clock rates must be nonnegative", lines, ("clocks",), src)
    xi_mode = _choice(cfg["problem"], "xi_mode", {"shared", "per_agent"}, lines, ("problem",), src)
    out = cfg["output"]
    stride = _int(out, "aoi_stride", lines, ("output",), src, lo=1)
    return Scenario(str(cfg["name"]), D, N, dt, topo, chan, prob, sched, ck, rates, x0, eb, seed,
                    order, xi_mode, stride, bool(out["record_log"]), cfg)


# --------------------------------------------------------------------------
# Files


def shipped_scenarios() -> list[str]:
    root = resources.files("aoisgd") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def scenario_path(name_or_path: str) -> Path:
    """A filesystem path, or the name of a shipped scenario."""
    p = Path(name_or_path)
    if p.exists():
        return p
    shipped = resources.files("aoisgd") / "scenarios" / f"{name_or_path}.yaml"
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigError(f"scenario not found: {name_or_path}", None, None)


def load_config(name_or_path: str) -> tuple[dict, dict, str]:
    path = scenario_path(name_or_path)
    text = path.read_text()
    data, lines = parse_text(text, str(path))
    return resolve(data, lines, str(path)), lines, str(path)


def load_scenario(name_or_path: str, seed: int | None = None) -> Scenario:
    cfg, lines, src = load_config(name_or_path)
    if seed is not None:
        cfg["seed"] = int(seed)
    return build_scenario(cfg, lines, src)


def scenario_from_dict(data: dict) -> Scenario:
    return build_scenario(resolve(copy.deepcopy(data)))
