import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtnqubit.rtn import (RtnMode, RtnParams, RtnTrajectory, eval_noise, sample_trajectory,
                          trajectory_rng)


def literal_resampled(seed, index, tau, horizon):
    """One draw at a time: after each jump redraw r_d = ln p and move to the
    next zero of sin(t/tau - r_d)."""
    rng = trajectory_rng(seed, index)
    r = math.log(rng.random(1)[0])
    sign = 1 if math.sin(-r) >= 0 else -1
    jumps, t_now = [], 0.0
    while True:
        k = math.floor((t_now / tau - r) / math.pi)
        candidate = tau * (k * math.pi + r)
        while candidate <= t_now * (1 + 1e-15):
            k += 1
            candidate = tau * (k * math.pi + r)
        if candidate >= horizon:
            return sign, np.array(jumps)
        jumps.append(candidate)
        t_now = candidate
        r = math.log(rng.random())


@pytest.mark.parametrize("tau, horizon", [(0.05, 3.0), (1.0, 30.0), (0.3, 50.0)])
def test_resampled_matches_sequential_oracle(tau, horizon):
    params = RtnParams(delta=0.125, tau=tau, mode=RtnMode.FORMULA_RESAMPLED, seed=11)
    for index in range(5):
        traj = sample_trajectory(params, horizon, index)
        sign, jumps = literal_resampled(11, index, tau, horizon)
        assert traj.initial_sign == sign
        assert traj.jumps.size == jumps.size
        np.testing.assert_allclose(traj.jumps, jumps, rtol=1e-12, atol=1e-9)


def test_zero_delta_trajectory_is_silent():
    for mode in RtnMode:
        traj = sample_trajectory(RtnParams(delta=0.0, tau=0.1, mode=mode), 5.0, 0)
        assert np.all(traj.values(np.linspace(0, 5, 101)) == 0.0)


def test_slow_formula_phase_has_at_most_one_jump():
    for index in range(200):
        traj = sample_trajectory(RtnParams(tau=5.0, mode="formula-phase"), 10.0, index)
        assert traj.jumps.size in (0, 1)


def test_fast_formula_phase_jump_count():
    expected = 1.0 / (math.pi * 0.05)
    counts = {sample_trajectory(RtnParams(tau=0.05, mode="formula-phase"), 1.0, i).jumps.size for i in range(200)}
    assert counts <= {math.floor(expected) - 1, math.floor(expected), math.floor(expected) + 1}


def test_formula_phase_spacing_is_pi_tau():
    traj = sample_trajectory(RtnParams(tau=0.2, mode="formula-phase", seed=3), 100.0, 7)
    np.testing.assert_allclose(np.diff(traj.jumps), math.pi * 0.2, rtol=1e-9)


def test_markov_mean_wait():
    traj = sample_trajectory(RtnParams(tau=0.5, mode="markov", seed=5), 0.5 * 20_000, 0)
    assert traj.jumps.size >= 10_000
    waits = np.diff(np.concatenate(([0.0], traj.jumps)))
    assert abs(waits.mean() / 0.5 - 1) < 0.05


def test_markov_initial_sign_is_balanced():
    signs = [sample_trajectory(RtnParams(tau=1.0, mode="markov"), 1.0, i).initial_sign for i in range(2000)]
    assert abs(np.mean(signs)) < 0.1


def test_formula_initial_sign_follows_first_draw():
    params = RtnParams(tau=1.0, mode="formula-phase", seed=2)
    for index in range(300):
        r = math.log(trajectory_rng(2, index).random(1)[0])
        expected = 1 if math.sin(-r) >= 0 else -1
        assert sample_trajectory(params, 1.0, index).initial_sign == expected


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), index=st.integers(0, 10**6),
       mode=st.sampled_from(list(RtnMode)), tau=st.floats(0.01, 5.0))
def test_deterministic_and_two_valued(seed, index, mode, tau):
    params = RtnParams(delta=0.125, tau=tau, mode=mode, seed=seed)
    a = sample_trajectory(params, 4.0, index)
    b = sample_trajectory(params, 4.0, index)
    np.testing.assert_array_equal(a.jumps, b.jumps)
    assert a.initial_sign == b.initial_sign
    assert np.all(np.diff(a.jumps) > 0)
    assert a.jumps.size == 0 or (a.jumps[0] > 0 and a.jumps[-1] < 4.0)
    values = a.values(np.linspace(0, 4.0, 257))
    assert set(np.unique(np.abs(values))) <= {0.125}


def test_prefix_independent_of_horizon():
    params = RtnParams(tau=0.01, seed=9)
    short = sample_trajectory(params, 3.0, 4)
    long = sample_trajectory(params, 30.0, 4)
    np.testing.assert_array_equal(short.jumps, long.jumps[long.jumps < 3.0])


def test_distinct_indices_give_distinct_paths():
    params = RtnParams(tau=0.05)
    assert not np.array_equal(sample_trajectory(params, 2.0, 0).jumps, sample_trajectory(params, 2.0, 1).jumps)


def test_eval_noise_examples():
    assert eval_noise(RtnTrajectory(1, np.empty(0), 0.125, 3.0), 0.5) == 0.125
    assert eval_noise(RtnTrajectory(1, np.array([1.0]), 0.125, 3.0), 1.5) == -0.125
    assert eval_noise(RtnTrajectory(1, np.array([1.0, 2.0]), 0.125, 3.0), 2.5) == 0.125
    # right-continuous
    assert eval_noise(RtnTrajectory(1, np.array([1.0]), 0.125, 3.0), 1.0) == -0.125
    with pytest.raises(ValueError):
        eval_noise(RtnTrajectory(1, np.empty(0), 0.125, 3.0), 3.5)


def test_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        sample_trajectory(RtnParams(), 0.0, 0)
    with pytest.raises(ValueError):
        RtnParams(tau=0.0)
    with pytest.raises(ValueError):
        RtnParams(delta=-1.0)
    with pytest.raises(ValueError):
        RtnTrajectory(1, np.array([2.0, 1.0]), 0.1, 3.0)
