"""Fidelity experiments: time sweeps, correlation-time sweeps, optimum search
and the scan over pulse-to-axis assignments."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .ensemble import EnsembleConfig, FidelityCurve, fidelity_curve
from .pulsegen import AXES, PRESETS, PulseSpec, preset


class SweepKind(str, enum.Enum):
    TIME = "time-sweep"
    TAU = "tau-sweep"
    SEQUENCE = "sequence-scan"


class NoOptimumError(ValueError):
    pass


@dataclass(frozen=True)
class AxisAssignment:
    """Which pulse drives which axis. Labels list the x, y, z pulses in order."""

    x: Optional[str] = None
    y: Optional[str] = None
    z: Optional[str] = None
    custom: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        names = [n for n in (self.x, self.y, self.z) if n is not None]
        if not names:
            raise ValueError("at least one axis must carry a pulse")
        if len(set(names)) != len(names):
            raise ValueError(f"pulse reused across axes: {names}")
        for n in names:
            if n not in PRESETS and n not in self.custom:
                raise ValueError(f"unknown pulse {n!r}")

    @classmethod
    def from_label(cls, label: str) -> AxisAssignment:
        parts = label.split("-")
        if len(parts) > 3:
            raise ValueError(f"label {label!r} names more than three axes")
        return cls(*(None if p == "none" else p for p in parts))

    @property
    def label(self) -> str:
        parts = [n if n is not None else "none" for n in (self.x, self.y, self.z)]
        while parts[-1] == "none":
            parts.pop()
        return "-".join(parts)

    def pulses(self) -> tuple[PulseSpec, ...]:
        out = []
        for axis, name in zip(AXES, (self.x, self.y, self.z)):
            if name is None:
                continue
            spec = self.custom.get(name)
            out.append(spec.on_axis(axis) if spec is not None else preset(name, axis))
        return tuple(out)


ALL_SEQUENCES = tuple(AxisAssignment(*p) for p in itertools.permutations(("BP", "C", "QW")))

# 40 log-spaced correlation times in [1e-3, 20]
DEFAULT_TAUS = np.geomspace(1e-3, 20.0, 40)


@dataclass
class SweepResult:
    kind: SweepKind
    abscissa: np.ndarray
    fidelity: np.ndarray
    stderr: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def abscissa_name(self) -> str:
        return "tau" if self.kind is SweepKind.TAU else "t"

    @property
    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.abscissa.tolist(), self.fidelity.tolist(), self.stderr.tolist()))

    def as_curve(self) -> FidelityCurve:
        return FidelityCurve(self.abscissa, self.fidelity, self.stderr,
                             self.metadata.get("n_trajectories", 0), self.metadata.get("seed", 0),
                             kind=self.abscissa_name)


def _metadata(config: EnsembleConfig, assignment: AxisAssignment, **extra) -> dict:
    return {
        "sequence": assignment.label,
        "n_trajectories": config.n_trajectories,
        "seed": config.rtn.seed,
        "delta": config.rtn.delta,
        "tau": config.rtn.tau,
        "mode": config.rtn.mode.value,
        "method": config.method,
        "substep": config.substep,
        **extra,
    }


def _config_for(assignment: AxisAssignment, base: EnsembleConfig) -> EnsembleConfig:
    return replace(base, pulses=assignment.pulses())


def time_sweep(assignment: AxisAssignment, times, base: EnsembleConfig) -> SweepResult:
    config = _config_for(assignment, base)
    curve = fidelity_curve(config, times)
    return SweepResult(SweepKind.TIME, curve.times, curve.fidelity, curve.stderr,
                       _metadata(config, assignment))


def tau_sweep(assignment: AxisAssignment, gate_time: float, taus, base: EnsembleConfig) -> SweepResult:
    """Fidelity at ``gate_time`` for each correlation time in ``taus``.

    All points reuse the same master seed (common random numbers).
    """
    if not gate_time > 0:
        raise ValueError(f"gate_time must be positive, got {gate_time}")
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0 or taus[0] <= 0 or np.any(np.diff(taus) <= 0):
        raise ValueError("tau grid must be positive and strictly increasing")
    config = _config_for(assignment, base)
    fid = np.empty(taus.size)
    err = np.empty(taus.size)
    for i, tau in enumerate(taus):
        point = replace(config, rtn=replace(config.rtn, tau=float(tau)))
        try:
            curve = fidelity_curve(point, [gate_time])
        except Exception as exc:
            raise RuntimeError(f"tau={tau:.6g}: {exc}") from exc
        fid[i] = curve.fidelity[0]
        err[i] = curve.stderr[0]
    return SweepResult(SweepKind.TAU, taus, fid, err, _metadata(config, assignment, gate_time=gate_time))


def _refine(t, f, i) -> tuple[float, float]:
    # vertex of the parabola through the three samples around i
    t0, t1, t2 = t[i - 1], t[i], t[i + 1]
    f0, f1, f2 = f[i - 1], f[i], f[i + 1]
    denom = (t0 - t1) * (t0 - t2) * (t1 - t2)
    a = (t2 * (f1 - f0) + t1 * (f0 - f2) + t0 * (f2 - f1)) / denom
    b = (t2 * t2 * (f0 - f1) + t1 * t1 * (f2 - f0) + t0 * t0 * (f1 - f2)) / denom
    if a >= 0:
        return float(t1), float(f1)
    tv = min(max(-b / (2 * a), t0), t2)
    c = f1 - a * t1 * t1 - b * t1
    return float(tv), float(a * tv * tv + b * tv + c)


def optimal_points(curve: FidelityCurve, threshold: float = 0.0) -> list[tuple[float, float]]:
    """Interior local maxima with sampled fidelity >= ``threshold``, refined."""
    t = np.asarray(curve.times, dtype=float)
    f = np.asarray(curve.fidelity, dtype=float)
    points = []
    for i in range(1, t.size - 1):
        if f[i] > f[i - 1] and f[i] >= f[i + 1] and f[i] >= threshold:
            points.append(_refine(t, f, i))
    return points


def find_optimal_times(curve: FidelityCurve, threshold: float) -> list[float]:
    """Times of all near-unit fidelity maxima, in increasing order."""
    if len(curve.times) == 0:
        raise ValueError("empty curve")
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    times = [tp for tp, _ in optimal_points(curve, threshold)]
    if not times:
        raise NoOptimumError(f"no local maximum reaches fidelity {threshold}")
    return times


def peak(curve: FidelityCurve) -> tuple[float, float]:
    """Highest local maximum of the curve (refined)."""
    points = optimal_points(curve)
    if not points:
        i = int(np.argmax(curve.fidelity))
        return float(curve.times[i]), float(curve.fidelity[i])
    return max(points, key=lambda p: p[1])


@dataclass
class SequenceOutcome:
    assignment: AxisAssignment
    time_curve: SweepResult
    optimal_times: list[float]
    optimum: float
    peak_fidelity: float
    tau_curve: Optional[SweepResult]


@dataclass
class SequenceScanResult:
    kind: SweepKind
    outcomes: list[SequenceOutcome]
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, label: str) -> SequenceOutcome:
        for outcome in self.outcomes:
            if outcome.assignment.label == label:
                return outcome
        raise KeyError(label)


def sequence_scan(sequences: Sequence[AxisAssignment], times, taus, base: EnsembleConfig,
                  threshold: float = 0.9) -> SequenceScanResult:
    """For each assignment: time-domain curve, its optima, and a tau sweep at the peak.

    The reported optimum is the highest maximum of the time curve;
    ``optimal_times`` lists every maximum clearing ``threshold``.
    """
    outcomes = []
    for assignment in sequences:
        curve = time_sweep(assignment, times, base)
        candidates = [tp for tp, _ in optimal_points(curve.as_curve(), threshold)]
        t_opt, f_opt = peak(curve.as_curve())
        taus_curve = tau_sweep(assignment, t_opt, taus, base) if taus is not None and len(taus) else None
        outcomes.append(SequenceOutcome(assignment, curve, candidates, t_opt, f_opt, taus_curve))
    meta = {"sequences": [s.label for s in sequences], "threshold": threshold,
            "n_trajectories": base.n_trajectories, "seed": base.rtn.seed}
    return SequenceScanResult(SweepKind.SEQUENCE, outcomes, meta)


def time_grid(start: float, stop: float, step: float) -> np.ndarray:
    """``start, start+step, ...`` up to and including ``stop`` (within 1e-9 steps)."""
    if not step > 0 or stop < start:
        raise ValueError("need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)
