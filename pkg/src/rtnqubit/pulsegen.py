"""Square-wave control pulses built from the sign of a trigonometric carrier."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

AXES = ("x", "y", "z")


class Family(str, enum.Enum):
    COSINE = "cosine"
    SINE = "sine"


@dataclass(frozen=True)
class PulseSpec:
    """One drive channel: ``amplitude * sign(trig(t / t0 + r0))`` on ``axis``.

    ``sign(0)`` is taken as +1, so the waveform is right-continuous.
    """

    family: Family
    t0: float
    r0: float = 0.0
    amplitude: float = 1.0
    axis: str = "x"

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")
        if not self.amplitude >= 0:
            raise ValueError(f"amplitude must be non-negative, got {self.amplitude}")
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")

    def on_axis(self, axis: str) -> PulseSpec:
        return replace(self, axis=axis)

    @property
    def _offset(self) -> float:
        # cos(u) = 0 at u = pi/2 + k*pi, sin(u) = 0 at u = k*pi
        return math.pi / 2 if self.family is Family.COSINE else 0.0


C = PulseSpec(Family.COSINE, t0=8.0)
BP = PulseSpec(Family.SINE, t0=1.8, r0=-0.6)
QW = PulseSpec(Family.SINE, t0=2.0, r0=2.56)

PRESETS = {"C": C, "QW": QW, "BP": BP}


def preset(name: str, axis: str = "x") -> PulseSpec:
    try:
        return PRESETS[name].on_axis(axis)
    except KeyError:
        raise KeyError(f"unknown pulse preset {name!r}; expected one of {sorted(PRESETS)}") from None


def eval_pulse(spec: PulseSpec, t):
    """Evaluate the pulse at time(s) ``t``; accepts scalars or arrays."""
    arg = np.asarray(t, dtype=float) / spec.t0 + spec.r0
    carrier = np.cos(arg) if spec.family is Family.COSINE else np.sin(arg)
    out = np.where(carrier >= 0.0, spec.amplitude, -spec.amplitude)
    return float(out) if out.ndim == 0 else out


def jump_times(spec: PulseSpec, t_end: float) -> np.ndarray:
    """All sign changes of the pulse in the open interval ``(0, t_end)``.

    Closed form: the carrier argument equals ``k*pi + offset``.
    """
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    # t = t0 * (k*pi + offset - r0) > 0
    shift = spec._offset - spec.r0
    k_lo = math.floor(-shift / math.pi)
    k_hi = math.ceil((t_end / spec.t0 - shift) / math.pi)
    ks = np.arange(k_lo, k_hi + 1)
    t = spec.t0 * (ks * math.pi + shift)
    return t[(t > 0.0) & (t < t_end)]
