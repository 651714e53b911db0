"""Single-trajectory evolution operators for a driven qubit.

Two independent routes compute ``U(t) = T exp(-i int H dt)`` for
``H = (b . sigma) / 2`` with ``b = (a_x, a_y, a_z + eta_z)``:

* the disentangling route writes ``U = exp(alpha s+) exp(beta sz) exp(gamma s-)``
  and integrates the ODEs for ``(alpha, beta, gamma)`` with classical RK4;
* the exact route multiplies closed-form SU(2) exponentials of the
  piecewise-constant field.

The drive (square-wave pulses plus telegraph noise) is piecewise constant, so
both routes break the time axis at every discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .pulsegen import AXES, PulseSpec, eval_pulse, jump_times
from .rtn import RtnTrajectory

SUBSTEP = 1e-3
OVERFLOW_GUARD = 200.0
# |alpha| above which the running chart is folded into the anchor frame
REANCHOR = 2.0
METHODS = ("disentangle", "exact", "both")


class PropagatorError(ArithmeticError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class OverflowGuardError(PropagatorError):
    """|Re beta| left the guard band: the disentangling chart is singular."""


class NonFiniteError(PropagatorError):
    pass


class PropagatorMismatchError(PropagatorError):
    """The two routes disagree beyond the cross-check tolerance."""


@dataclass(frozen=True)
class DriveSample:
    a_x: float = 0.0
    a_y: float = 0.0
    a_z: float = 0.0
    eta_z: float = 0.0


@dataclass(frozen=True)
class DisentangleState:
    """Disentangling coordinates at time ``t``.

    ``anchor`` is the propagator accumulated up to the start of the current
    chart (identity when the chart started at t = 0), so the full evolution
    operator is ``chart(alpha, beta, gamma) @ anchor``.
    """

    alpha: complex = 0j
    beta: complex = 0j
    gamma: complex = 0j
    t: float = 0.0
    anchor: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex), repr=False)


def riccati_rhs(state: DisentangleState, drive: DriveSample) -> tuple[complex, complex, complex]:
    """Time derivatives ``(d alpha, d beta, d gamma)`` with hbar = 1."""
    h_plus = 0.5 * complex(drive.a_x, -drive.a_y)
    h_minus = 0.5 * complex(drive.a_x, drive.a_y)
    h_z = complex(drive.a_z + drive.eta_z)
    da, db, dg = _kernels.riccati_rhs(complex(state.alpha), complex(state.beta), complex(state.gamma),
                                      h_plus, h_minus, h_z)
    return complex(da), complex(db), complex(dg)


def _check_state(state: DisentangleState):
    values = (state.alpha, state.beta, state.gamma)
    if not all(np.isfinite(complex(v).real) and np.isfinite(complex(v).imag) for v in values):
        raise NonFiniteError("disentangling coordinates are not finite", state.t)
    if abs(complex(state.beta).real) > OVERFLOW_GUARD:
        raise OverflowGuardError(f"|Re beta| = {abs(complex(state.beta).real):.3g} exceeds guard", state.t)


def assemble_unitary(state: DisentangleState) -> np.ndarray:
    """Evolution operator ``[[e^{b/2} + a g e^{-b/2}, a e^{-b/2}], [g e^{-b/2}, e^{-b/2}]] @ anchor``."""
    _check_state(state)
    local = np.empty((2, 2), dtype=complex)
    _kernels.chart_into(complex(state.alpha), complex(state.beta), complex(state.gamma), local)
    return local @ np.asarray(state.anchor, dtype=complex)


def unitarity_defect(u: np.ndarray) -> float:
    """``max |U^dagger U - I|`` over entries; accepts a stack of matrices."""
    u = np.asarray(u)
    gram = np.conj(np.swapaxes(u, -1, -2)) @ u
    return float(np.max(np.abs(gram - np.eye(2))))


def det_defect(u: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.det(np.asarray(u)) - 1.0)))


@dataclass(frozen=True)
class PiecewiseDrive:
    """Field ``(a_x, a_y, a_z + eta_z)`` constant on ``[edges[j], edges[j+1])``."""

    edges: np.ndarray
    field: np.ndarray

    def __post_init__(self):
        edges = np.ascontiguousarray(self.edges, dtype=float)
        values = np.ascontiguousarray(self.field, dtype=float).reshape(-1, 3)
        if edges.ndim != 1 or edges.size != values.shape[0] + 1:
            raise ValueError("need len(edges) == len(field) + 1")
        if edges[0] != 0.0 or np.any(np.diff(edges) < 0):
            raise ValueError("edges must start at 0 and be non-decreasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("drive values must be finite")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "field", values)

    @property
    def t_end(self) -> float:
        return float(self.edges[-1])

    @classmethod
    def from_sources(cls, pulses: Sequence[PulseSpec], noise: Optional[RtnTrajectory],
                     t_end: float, sample_times: Iterable[float] = ()) -> PiecewiseDrive:
        if not t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {t_end}")
        if noise is not None and t_end > noise.horizon:
            raise ValueError(f"t_end={t_end} exceeds noise horizon {noise.horizon}")
        parts = [np.array([0.0, t_end]), np.asarray(list(sample_times), dtype=float)]
        if t_end > 0:
            parts += [jump_times(p, t_end) for p in pulses]
            if noise is not None:
                parts.append(noise.jumps[noise.jumps < t_end])
        edges = np.unique(np.concatenate(parts))
        mids = 0.5 * (edges[:-1] + edges[1:])
        values = np.zeros((mids.size, 3))
        for p in pulses:
            values[:, AXES.index(p.axis)] += eval_pulse(p, mids)
        if noise is not None and noise.delta != 0.0:
            values[:, 2] += noise.values(mids)
        return cls(edges, values)

    def sample_index(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        idx = np.searchsorted(self.edges, times)
        if np.any(idx >= self.edges.size) or np.any(self.edges[np.minimum(idx, self.edges.size - 1)] != times):
            raise ValueError("sample times must be drive edges")
        return idx.astype(np.int64)


def _times_array(times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("sample times must be non-negative and non-decreasing")
    return times


def evolve_exact(drive: PiecewiseDrive, times) -> np.ndarray:
    """Exact propagators ``U(t)`` at each of ``times`` (which must be drive edges)."""
    times = _times_array(times)
    out = np.empty((times.size, 2, 2), dtype=complex)
    _kernels.exact_path(drive.edges, drive.field, drive.sample_index(times), out)
    return out


def evolve_disentangled(drive: PiecewiseDrive, times, substep: float = SUBSTEP,
                        reanchor: float = REANCHOR) -> tuple[np.ndarray, list[DisentangleState]]:
    """Disentangling-route propagators and coordinates at each of ``times``.

    ``reanchor=np.inf`` integrates a single chart from (0, 0, 0); it raises
    :class:`OverflowGuardError` once the chart approaches a point where
    ``u22 = 0``.
    """
    if not substep > 0:
        raise ValueError(f"substep must be positive, got {substep}")
    times = _times_array(times)
    n = times.size
    out_u = np.empty((n, 2, 2), dtype=complex)
    out_state = np.empty((n, 3), dtype=complex)
    out_frame = np.empty((n, 2, 2), dtype=complex)
    status, t_fail = _kernels.disentangle_path(
        drive.edges, drive.field, drive.sample_index(times), float(substep),
        float(reanchor), OVERFLOW_GUARD, out_u, out_state, out_frame)
    if status == _kernels.OVERFLOW:
        raise OverflowGuardError(f"|Re beta| exceeded {OVERFLOW_GUARD} at t={t_fail:.6g}", t_fail)
    if status == _kernels.NONFINITE:
        raise NonFiniteError(f"non-finite disentangling coordinates at t={t_fail:.6g}", t_fail)
    states = [DisentangleState(complex(a), complex(b), complex(g), float(t), frame.copy())
              for (a, b, g), t, frame in zip(out_state, times, out_frame)]
    return out_u, states


def propagate_disentangled(pulses: Sequence[PulseSpec], noise: Optional[RtnTrajectory], t_end: float,
                           substep: float = SUBSTEP, reanchor: float = REANCHOR) -> DisentangleState:
    drive = PiecewiseDrive.from_sources(pulses, noise, t_end)
    _, states = evolve_disentangled(drive, [t_end], substep, reanchor)
    return states[0]


def propagate_exact(pulses: Sequence[PulseSpec], noise: Optional[RtnTrajectory], t_end: float) -> np.ndarray:
    drive = PiecewiseDrive.from_sources(pulses, noise, t_end)
    return evolve_exact(drive, [t_end])[0]


def unitary_path(pulses: Sequence[PulseSpec], noise: Optional[RtnTrajectory], times,
                 method: str = "disentangle", substep: float = SUBSTEP, tolerance: float = 1e-6) -> np.ndarray:
    """Propagators at ``times`` by the chosen route.

    ``disentangle`` falls back to the exact route if the overflow guard trips;
    ``both`` computes the two routes and raises
    :class:`PropagatorMismatchError` if they differ by more than ``tolerance``.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    times = _times_array(times)
    t_end = float(times[-1]) if times.size else 0.0
    drive = PiecewiseDrive.from_sources(pulses, noise, t_end, times)
    if method == "exact":
        return evolve_exact(drive, times)
    try:
        u, _ = evolve_disentangled(drive, times, substep)
    except OverflowGuardError:
        if method == "both":
            raise
        return evolve_exact(drive, times)
    if method == "both":
        reference = evolve_exact(drive, times)
        gap = float(np.max(np.abs(u - reference))) if times.size else 0.0
        if gap > tolerance:
            raise PropagatorMismatchError(f"routes differ by {gap:.3g} > {tolerance:g}")
    return u
