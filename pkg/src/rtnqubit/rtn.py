"""Random telegraph noise trajectories switching between +delta and -delta.

Every trajectory draws from its own Philox stream keyed by
``(seed, trajectory_index)``, so an ensemble is reproducible regardless of
the order (or thread) in which its members are generated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# draws per refill when generating jump sequences in bulk
_CHUNK = 256


class RtnMode(str, enum.Enum):
    FORMULA_PHASE = "formula-phase"
    FORMULA_RESAMPLED = "formula-resampled"
    MARKOV = "markov"


@dataclass(frozen=True)
class RtnParams:
    delta: float = 0.125
    tau: float = 1e-3
    mode: RtnMode = RtnMode.FORMULA_RESAMPLED
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", RtnMode(self.mode))
        if not self.delta >= 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class RtnTrajectory:
    initial_sign: int
    jumps: np.ndarray = field(repr=False)
    delta: float
    horizon: float

    def __post_init__(self):
        jumps = np.asarray(self.jumps, dtype=float)
        if self.initial_sign not in (1, -1):
            raise ValueError("initial_sign must be +1 or -1")
        if jumps.size and (jumps[0] <= 0 or jumps[-1] >= self.horizon or np.any(np.diff(jumps) <= 0)):
            raise ValueError("jumps must be strictly increasing inside (0, horizon)")
        object.__setattr__(self, "jumps", jumps)

    @classmethod
    def silent(cls, horizon: float) -> RtnTrajectory:
        """Noise-free trajectory (delta = 0)."""
        return cls(1, np.empty(0), 0.0, horizon)

    def values(self, t) -> np.ndarray:
        """Vectorized noise amplitude; no horizon check."""
        flips = np.searchsorted(self.jumps, np.asarray(t, dtype=float), side="right")
        return self.delta * self.initial_sign * (1.0 - 2.0 * (flips & 1))


def trajectory_rng(seed: int, trajectory_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(trajectory_index,))
    return np.random.Generator(np.random.Philox(ss))


def _open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    # p in (0, 1): log(0) is excluded
    p = rng.random(size)
    while np.any(p == 0.0):
        p[p == 0.0] = rng.random(np.count_nonzero(p == 0.0))
    return p


def _resampled_jumps(rng, tau, horizon, r0):
    # After a jump the carrier phase t/tau is congruent to the r_d in force
    # mod pi, so successive gaps (in units of tau) are (r_next - r_prev) mod pi;
    # the phase origin at t = 0 plays the role of the first r_prev.
    pieces = []
    t_last = 0.0
    prev = 0.0
    carry = np.array([r0])
    while True:
        r = np.concatenate((carry, np.log(_open_uniform(rng, _CHUNK))))
        gaps = np.mod(np.diff(np.concatenate(([prev], r))), math.pi)
        gaps[gaps == 0.0] = math.pi
        t = t_last + tau * np.cumsum(gaps)
        inside = t < horizon
        pieces.append(t[inside])
        if not inside.all():
            return np.concatenate(pieces)
        t_last, prev, carry = t[-1], r[-1], r[:0]


def _strictly_increasing(jumps):
    # coincident flips cancel pairwise
    t, counts = np.unique(jumps, return_counts=True)
    return t[counts % 2 == 1]


def _markov_jumps(rng, tau, horizon):
    pieces = []
    t_last = 0.0
    while True:
        t = t_last + np.cumsum(rng.exponential(tau, _CHUNK))
        inside = t < horizon
        pieces.append(t[inside])
        if not inside.all():
            break
        t_last = t[-1]
    return np.concatenate(pieces)


def sample_trajectory(params: RtnParams, horizon: float, trajectory_index: int) -> RtnTrajectory:
    """Draw trajectory ``trajectory_index`` of the ensemble defined by ``params``.

    formula-phase
        one ``r_d = ln p``; jumps at every ``tau*(k*pi + r_d)`` in ``(0, horizon)``,
        i.e. a periodic square wave with random phase.
    formula-resampled
        ``r_d`` is redrawn after each jump and the next jump is the next zero of
        ``sin(t/tau - r_d)``, giving aperiodic switching.
    markov
        exponential waiting times with mean ``tau`` and a uniformly random
        initial sign.

    In both formula modes the initial sign is ``sign(sin(-r_d))`` of the first
    draw.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if not params.tau > 0:
        raise ValueError(f"tau must be positive, got {params.tau}")
    rng = trajectory_rng(params.seed, trajectory_index)
    tau = params.tau

    if params.mode is RtnMode.MARKOV:
        sign = 1 if rng.random() < 0.5 else -1
        jumps = _markov_jumps(rng, tau, horizon)
    else:
        r0 = math.log(_open_uniform(rng, 1)[0])
        sign = 1 if math.sin(-r0) >= 0.0 else -1
        if params.mode is RtnMode.FORMULA_PHASE:
            k_lo = math.floor(-r0 / math.pi)
            k_hi = math.ceil(horizon / (tau * math.pi) - r0 / math.pi)
            t = tau * (np.arange(k_lo, k_hi + 1) * math.pi + r0)
            jumps = t[(t > 0.0) & (t < horizon)]
        else:
            jumps = _resampled_jumps(rng, tau, horizon, r0)
    return RtnTrajectory(sign, _strictly_increasing(jumps), params.delta, horizon)


def eval_noise(traj: RtnTrajectory, t: float) -> float:
    """Noise amplitude at ``t``; right-continuous at jump times."""
    if not 0.0 <= t <= traj.horizon:
        raise ValueError(f"t={t} outside trajectory horizon [0, {traj.horizon}]")
    return float(traj.values(t))
