"""Noise-averaged density matrices and spin-flip fidelity."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .propagator import SUBSTEP, PropagatorError, unitary_path
from .pulsegen import PulseSpec
from .rtn import RtnParams, sample_trajectory

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
# |0> is the second basis vector, |1> the first
RHO0 = np.diag([0.0, 1.0]).astype(complex)
RHO_TARGET = np.diag([1.0, 0.0]).astype(complex)


@dataclass(frozen=True)
class GateTarget:
    rho0: np.ndarray = field(default_factory=lambda: RHO0.copy())
    rho_target: np.ndarray = field(default_factory=lambda: RHO_TARGET.copy())
    gate: np.ndarray = field(default_factory=lambda: PAULI_X.copy())

    def __post_init__(self):
        mapped = self.gate @ self.rho0 @ self.gate.conj().T
        if not np.allclose(mapped, self.rho_target, atol=1e-12):
            raise ValueError("rho_target must equal gate @ rho0 @ gate^dagger")


SPIN_FLIP = GateTarget()


class TrajectoryError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"trajectory {index}: {cause}")
        self.index = index
        self.cause = cause


def is_density_matrix(rho: np.ndarray, tol: float = 1e-12, psd_tol: float = 1e-10) -> bool:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        return False
    hermitian = np.max(np.abs(rho - rho.conj().T)) <= tol
    unit_trace = abs(np.trace(rho) - 1.0) <= tol
    return bool(hermitian and unit_trace and np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -psd_tol)


def average_density(unitaries: Sequence[np.ndarray], rho0: np.ndarray = RHO0) -> np.ndarray:
    """Mean of ``U rho0 U^dagger``, accumulated in list order."""
    if len(unitaries) == 0:
        raise ValueError("need at least one unitary")
    total = np.zeros((2, 2), dtype=complex)
    for u in unitaries:
        u = np.asarray(u, dtype=complex)
        total += u @ rho0 @ u.conj().T
    return total / len(unitaries)


def fidelity(rho: np.ndarray, target: GateTarget = SPIN_FLIP) -> float:
    """Overlap ``tr(rho rho_T)``; for the spin-flip target this is <1|rho|1>."""
    value = np.trace(np.asarray(rho) @ target.rho_target).real
    return float(min(1.0, max(0.0, value)))


@dataclass(frozen=True)
class EnsembleConfig:
    pulses: tuple[PulseSpec, ...]
    rtn: RtnParams = RtnParams()
    n_trajectories: int = 300
    method: str = "disentangle"
    substep: float = SUBSTEP
    threads: int = 1
    target: GateTarget = SPIN_FLIP

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass
class FidelityCurve:
    times: np.ndarray
    fidelity: np.ndarray
    stderr: np.ndarray
    n_trajectories: int
    seed: int
    kind: str = "time"
    rho: Optional[np.ndarray] = field(default=None, repr=False)


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _trajectory_unitaries(config: EnsembleConfig, times: np.ndarray, index: int) -> np.ndarray:
    noise = sample_trajectory(config.rtn, float(times[-1]) + 1.0, index) if config.rtn.delta != 0 else None
    try:
        return unitary_path(config.pulses, noise, times, config.method, config.substep)
    except PropagatorError as exc:
        raise TrajectoryError(index, exc) from exc


def fidelity_curve(config: EnsembleConfig, times) -> FidelityCurve:
    """Ensemble fidelity at every time in ``times``.

    Trajectories may be propagated on several threads, but their
    contributions are folded strictly in trajectory-index order so the
    result does not depend on the thread count.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be non-empty, non-negative and strictly increasing")
    n = config.n_trajectories
    rho0, rho_t = config.target.rho0, config.target.rho_target

    rho_sum = np.zeros((times.size, 2, 2), dtype=complex)
    mean = np.zeros(times.size)
    m2 = np.zeros(times.size)

    def work(k):
        return _trajectory_unitaries(config, times, k)

    def fold(k, u):
        nonlocal mean, m2
        rho_k = u @ rho0 @ np.conj(np.swapaxes(u, -1, -2))
        rho_sum[...] += rho_k
        f_k = np.einsum("tij,ji->t", rho_k, rho_t).real
        # Welford update, index order
        delta = f_k - mean
        mean = mean + delta / (k + 1)
        m2 = m2 + delta * (f_k - mean)

    if config.threads == 1 or n == 1:
        for k in range(n):
            fold(k, work(k))
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            for k, u in enumerate(pool.map(work, range(n))):
                fold(k, u)

    rho = rho_sum / n
    values = np.clip(np.einsum("tij,ji->t", rho, rho_t).real, 0.0, 1.0)
    if n > 1:
        stderr = np.sqrt(np.maximum(m2, 0.0) / (n - 1) / n)
    else:
        stderr = np.full(times.size, np.nan)
    return FidelityCurve(times, values, stderr, n, config.rtn.seed, rho=rho)
