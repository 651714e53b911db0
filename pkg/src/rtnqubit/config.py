"""JSON run configuration: parsing, validation and canonical re-emission."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from .propagator import METHODS, SUBSTEP
from .pulsegen import AXES, PRESETS, Family, PulseSpec
from .rtn import RtnMode, RtnParams
from .sweep import ALL_SEQUENCES, AxisAssignment

EXPERIMENTS = ("time-sweep", "tau-sweep", "sequence-scan", "validate-unitarity")
FORMATS = ("csv",)

DEFAULT_TIME_GRID = (0.0, 12.0, 0.01)
DEFAULT_TAU_GRID = {"start": 1e-3, "stop": 20.0, "num": 40}

_TOP_KEYS = {"experiment", "pulses", "rtn", "n_trajectories", "seed", "propagator", "time_grid",
             "tau_grid", "gate_time", "sequences", "threshold", "output"}
_RTN_KEYS = {"delta", "tau", "mode"}
_PROPAGATOR_KEYS = {"method", "substep"}
_TIME_GRID_KEYS = {"start", "stop", "step"}
_PULSE_KEYS = {"family", "t0", "r0", "amplitude"}
_OUTPUT_KEYS = {"format"}

PulseEntry = Union[str, PulseSpec]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    pulses: tuple[tuple[str, PulseEntry], ...] = ()
    rtn: RtnParams = RtnParams()
    n_trajectories: int = 300
    method: str = "disentangle"
    substep: float = SUBSTEP
    time_grid: tuple[float, float, float] = DEFAULT_TIME_GRID
    tau_grid: tuple[float, ...] = field(default_factory=lambda: tuple(np.geomspace(1e-3, 20.0, 40).tolist()))
    gate_time: Optional[float] = None
    sequences: tuple[str, ...] = tuple(s.label for s in ALL_SEQUENCES)
    threshold: float = 0.999
    output_format: str = "csv"

    @property
    def seed(self) -> int:
        return self.rtn.seed

    def assignment(self) -> Optional[AxisAssignment]:
        if not self.pulses:
            return None
        names, custom = {}, {}
        for axis, entry in self.pulses:
            if isinstance(entry, PulseSpec):
                name = f"custom-{axis}"
                custom[name] = entry
                names[axis] = name
            else:
                names[axis] = entry
        return AxisAssignment(custom=custom, **names)


def _fail(path, message):
    raise ConfigError(path, message)


def _object(value, path, allowed):
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    unknown = sorted(set(value) - allowed)
    if unknown:
        _fail(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")
    return value


def _number(value, path, *, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    value = float(value)
    if not math.isfinite(value):
        _fail(path, "must be finite")
    if positive and not value > 0:
        _fail(path, "must be positive")
    if nonnegative and not value >= 0:
        _fail(path, "must be non-negative")
    return value


def _integer(value, path, lo, hi) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, "expected an integer")
    if not lo <= value <= hi:
        _fail(path, f"must lie in [{lo}, {hi}]")
    return value


def _choice(value, path, options):
    if value not in options:
        _fail(path, f"must be one of {list(options)}")
    return value


def _pulse(value, path) -> PulseEntry:
    if isinstance(value, str):
        if value not in PRESETS:
            _fail(path, f"unknown pulse {value!r}; presets are {sorted(PRESETS)}")
        return value
    body = _object(value, path, _PULSE_KEYS)
    if "family" not in body or "t0" not in body:
        _fail(path, "custom pulse needs 'family' and 't0'")
    family = _choice(body["family"], f"{path}.family", [f.value for f in Family])
    return PulseSpec(Family(family),
                     t0=_number(body["t0"], f"{path}.t0", positive=True),
                     r0=_number(body.get("r0", 0.0), f"{path}.r0"),
                     amplitude=_number(body.get("amplitude", 1.0), f"{path}.amplitude", nonnegative=True),
                     axis=path.rsplit(".", 1)[-1])


def _pulses(value, path) -> tuple[tuple[str, PulseEntry], ...]:
    body = _object(value, path, set(AXES))
    entries = tuple((axis, _pulse(body[axis], f"{path}.{axis}"))
                    for axis in AXES if body.get(axis) is not None)
    if not entries:
        _fail(path, "at least one axis must carry a pulse")
    names = [e for _, e in entries if isinstance(e, str)]
    if len(set(names)) != len(names):
        _fail(path, "pulse reused on more than one axis")
    return entries


def _tau_grid(value, path) -> tuple[float, ...]:
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    if "values" in value:
        _object(value, path, {"values"})
        raw = value["values"]
        if not isinstance(raw, list) or not raw:
            _fail(f"{path}.values", "expected a non-empty list")
        taus = tuple(_number(v, f"{path}.values[{i}]", positive=True) for i, v in enumerate(raw))
    else:
        body = _object(value, path, {"start", "stop", "num"})
        merged = {**DEFAULT_TAU_GRID, **body}
        start = _number(merged["start"], f"{path}.start", positive=True)
        stop = _number(merged["stop"], f"{path}.stop", positive=True)
        num = _integer(merged["num"], f"{path}.num", 1, 100000)
        taus = tuple(np.geomspace(start, stop, num).tolist())
    if any(b <= a for a, b in zip(taus, taus[1:])):
        _fail(path, "must be strictly increasing")
    return taus


def parse_config(text: Union[str, dict], seed: Optional[int] = None) -> RunConfig:
    """Validate a JSON config (text or already-decoded dict) and apply defaults.

    ``seed`` overrides the config's ``seed`` key.
    """
    if isinstance(text, str):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from exc
    else:
        data = text
    data = _object(data, "", _TOP_KEYS)
    experiment = data.get("experiment")
    if experiment is not None:
        _choice(experiment, "experiment", EXPERIMENTS)
    kwargs: dict[str, Any] = {"experiment": experiment}

    if "pulses" in data:
        kwargs["pulses"] = _pulses(data["pulses"], "pulses")

    rtn = _object(data.get("rtn", {}), "rtn", _RTN_KEYS)
    master_seed = _integer(data.get("seed", 0), "seed", 0, 2**64 - 1)
    if seed is not None:
        master_seed = _integer(seed, "seed", 0, 2**64 - 1)
    kwargs["rtn"] = RtnParams(
        delta=_number(rtn.get("delta", 0.125), "rtn.delta", nonnegative=True),
        tau=_number(rtn.get("tau", 1e-3), "rtn.tau", positive=True),
        mode=RtnMode(_choice(rtn.get("mode", RtnMode.FORMULA_RESAMPLED.value), "rtn.mode",
                             [m.value for m in RtnMode])),
        seed=master_seed,
    )
    if "n_trajectories" in data:
        kwargs["n_trajectories"] = _integer(data["n_trajectories"], "n_trajectories", 1, 10**7)

    prop = _object(data.get("propagator", {}), "propagator", _PROPAGATOR_KEYS)
    kwargs["method"] = _choice(prop.get("method", "disentangle"), "propagator.method", METHODS)
    kwargs["substep"] = _number(prop.get("substep", SUBSTEP), "propagator.substep", positive=True)

    if "time_grid" in data:
        grid = _object(data["time_grid"], "time_grid", _TIME_GRID_KEYS)
        start = _number(grid.get("start", DEFAULT_TIME_GRID[0]), "time_grid.start", nonnegative=True)
        stop = _number(grid.get("stop", DEFAULT_TIME_GRID[1]), "time_grid.stop", positive=True)
        step = _number(grid.get("step", DEFAULT_TIME_GRID[2]), "time_grid.step", positive=True)
        if stop <= start:
            _fail("time_grid.stop", "must exceed time_grid.start")
        kwargs["time_grid"] = (start, stop, step)

    if "tau_grid" in data:
        kwargs["tau_grid"] = _tau_grid(data["tau_grid"], "tau_grid")

    if "gate_time" in data and data["gate_time"] is not None:
        kwargs["gate_time"] = _number(data["gate_time"], "gate_time", positive=True)

    if "sequences" in data:
        raw = data["sequences"]
        if not isinstance(raw, list) or not raw:
            _fail("sequences", "expected a non-empty list of labels")
        labels = []
        for i, label in enumerate(raw):
            if not isinstance(label, str):
                _fail(f"sequences[{i}]", "expected a label such as 'QW-BP-C'")
            try:
                labels.append(AxisAssignment.from_label(label).label)
            except ValueError as exc:
                _fail(f"sequences[{i}]", str(exc))
        kwargs["sequences"] = tuple(labels)

    if "threshold" in data:
        threshold = _number(data["threshold"], "threshold", positive=True)
        if threshold > 1:
            _fail("threshold", "must not exceed 1")
        kwargs["threshold"] = threshold

    output = _object(data.get("output", {}), "output", _OUTPUT_KEYS)
    kwargs["output_format"] = _choice(output.get("format", "csv"), "output.format", FORMATS)

    # requirements that depend on the experiment come last so that field
    # errors are reported first
    if experiment is None:
        _fail("experiment", "required")
    if experiment in ("time-sweep", "tau-sweep") and "pulses" not in kwargs:
        _fail("pulses", f"required for {experiment}")
    if experiment == "tau-sweep" and "gate_time" not in kwargs:
        _fail("gate_time", "required for tau-sweep")
    return RunConfig(**kwargs)


def _emit_pulse(entry: PulseEntry):
    if isinstance(entry, str):
        return entry
    return {"family": entry.family.value, "t0": entry.t0, "r0": entry.r0, "amplitude": entry.amplitude}


def emit_config(config: RunConfig) -> dict:
    """Canonical, fully resolved JSON-ready form; ``parse_config`` inverts it."""
    out: dict[str, Any] = {"experiment": config.experiment}
    if config.pulses:
        out["pulses"] = {axis: _emit_pulse(entry) for axis, entry in config.pulses}
    out["rtn"] = {"delta": config.rtn.delta, "tau": config.rtn.tau, "mode": config.rtn.mode.value}
    out["n_trajectories"] = config.n_trajectories
    out["seed"] = config.rtn.seed
    out["propagator"] = {"method": config.method, "substep": config.substep}
    out["time_grid"] = dict(zip(("start", "stop", "step"), config.time_grid))
    out["tau_grid"] = {"values": list(config.tau_grid)}
    if config.gate_time is not None:
        out["gate_time"] = config.gate_time
    out["sequences"] = list(config.sequences)
    out["threshold"] = config.threshold
    out["output"] = {"format": config.output_format}
    return out
