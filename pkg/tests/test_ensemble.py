import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtnqubit.ensemble import (PAULI_X, RHO0, RHO_TARGET, SPIN_FLIP, EnsembleConfig, GateTarget, TrajectoryError,
                               average_density, fidelity, fidelity_curve, is_density_matrix)
from rtnqubit.propagator import NonFiniteError
from rtnqubit.pulsegen import BP, C, QW
from rtnqubit.rtn import RtnParams


def su2(a, b, c):
    # Euler-angle SU(2) element
    rz = lambda x: np.diag([np.exp(-0.5j * x), np.exp(0.5j * x)])
    ry = lambda x: np.array([[math.cos(x / 2), -math.sin(x / 2)], [math.sin(x / 2), math.cos(x / 2)]])
    return rz(a) @ ry(b) @ rz(c)


def test_gate_target_convention():
    np.testing.assert_array_equal(PAULI_X @ RHO0 @ PAULI_X, RHO_TARGET)
    with pytest.raises(ValueError):
        GateTarget(rho_target=RHO0.copy())


def test_average_density_examples():
    eye = np.eye(2)
    np.testing.assert_array_equal(average_density([PAULI_X], RHO0), np.diag([1, 0]))
    np.testing.assert_array_equal(average_density([eye, PAULI_X], RHO0), np.diag([0.5, 0.5]))
    rho = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, 0.7]])
    np.testing.assert_allclose(average_density([eye, eye, eye], rho), rho, atol=1e-15)
    with pytest.raises(ValueError):
        average_density([], RHO0)


def test_fidelity_examples():
    assert fidelity(RHO_TARGET) == 1.0
    assert fidelity(RHO0) == 0.0
    assert fidelity(np.eye(2) / 2) == 0.5


angles = st.tuples(st.floats(-7, 7), st.floats(-7, 7), st.floats(-7, 7))


@settings(max_examples=60, deadline=None)
@given(st.lists(angles, min_size=1, max_size=12), st.floats(0, 1))
def test_average_is_valid_density_and_fidelity_linear(euler, weight):
    us = [su2(*e) for e in euler]
    rho = average_density(us, RHO0)
    assert is_density_matrix(rho)
    f = fidelity(rho)
    assert 0.0 <= f <= 1.0
    # flip probability equals mean |u12|^2 (|0> is the second basis vector)
    assert f == pytest.approx(np.mean([abs(u[0, 1]) ** 2 for u in us]), abs=1e-12)
    other = average_density([PAULI_X], RHO0)
    mixed = weight * rho + (1 - weight) * other
    assert fidelity(mixed) == pytest.approx(weight * f + (1 - weight) * fidelity(other), abs=1e-12)


def test_curve_starts_at_zero_and_c_pulse_peaks_at_pi():
    times = np.array([0.0, 1.0, math.pi, 4.0])
    curve = fidelity_curve(EnsembleConfig((C,), RtnParams(delta=0.0), n_trajectories=1), times)
    assert curve.fidelity[0] == 0.0
    assert abs(curve.fidelity[2] - 1.0) <= 1e-6
    assert np.isnan(curve.stderr).all()


def test_noise_free_ensemble_independent_of_size():
    times = np.linspace(0, 10, 101)
    one = fidelity_curve(EnsembleConfig((QW,), RtnParams(delta=0.0), n_trajectories=1), times)
    many = fidelity_curve(EnsembleConfig((QW,), RtnParams(delta=0.0), n_trajectories=300), times)
    np.testing.assert_allclose(one.fidelity, many.fidelity, atol=1e-12, rtol=0)


def test_fast_noise_leaves_c_pulse_perfect():
    config = EnsembleConfig((C,), RtnParams(delta=0.125, tau=1e-3), n_trajectories=300)
    curve = fidelity_curve(config, [math.pi])
    assert curve.fidelity[0] >= 0.99


def test_thread_count_does_not_change_results():
    times = np.linspace(0, 6, 61)
    base = EnsembleConfig((BP,), RtnParams(delta=0.125, tau=0.7, seed=42), n_trajectories=40)
    serial = fidelity_curve(base, times)
    threaded = fidelity_curve(EnsembleConfig(base.pulses, base.rtn, 40, threads=4), times)
    assert np.array_equal(serial.fidelity, threaded.fidelity)
    assert np.array_equal(serial.stderr, threaded.stderr)


def test_curve_density_matrices_valid():
    times = np.linspace(0, 8, 17)
    curve = fidelity_curve(EnsembleConfig((QW, BP.on_axis("y")), RtnParams(tau=0.5), n_trajectories=25), times)
    assert all(is_density_matrix(r, tol=1e-12) for r in curve.rho)
    assert np.all((curve.fidelity >= 0) & (curve.fidelity <= 1))


def test_stderr_scales_like_inverse_sqrt_n():
    def scatter(n):
        values = [fidelity_curve(EnsembleConfig((C,), RtnParams(delta=0.125, tau=1.0, seed=s), n_trajectories=n),
                                 [math.pi]).fidelity[0] for s in range(24)]
        return np.std(values, ddof=1)
    ratio = scatter(30) / scatter(300)
    assert math.sqrt(10) / 2 <= ratio <= 2 * math.sqrt(10)


def test_trajectory_errors_carry_index(monkeypatch):
    import rtnqubit.ensemble as ens

    def broken(*args, **kwargs):
        raise NonFiniteError("boom", 0.1)

    monkeypatch.setattr(ens, "unitary_path", broken)
    with pytest.raises(TrajectoryError) as info:
        fidelity_curve(EnsembleConfig((C,), RtnParams(), n_trajectories=3), [1.0])
    assert info.value.index == 0


def test_invalid_grid_rejected():
    config = EnsembleConfig((C,), RtnParams(), n_trajectories=1)
    with pytest.raises(ValueError):
        fidelity_curve(config, [1.0, 1.0])
    with pytest.raises(ValueError):
        fidelity_curve(config, [])
