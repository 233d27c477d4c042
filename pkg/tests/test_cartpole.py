import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pbrl.cartpole import (
    N_STATES,
    CartState,
    EnvConfig,
    bins_to_index,
    discretize,
    index_to_bins,
    reset,
    step,
)

ZERO = CartState(0.0, 0.0, 0.0, 0.0)
finite = st.floats(-1.0, 1.0, allow_nan=False)
states = st.builds(CartState, finite, finite, finite, finite)


def test_one_step_from_rest_matches_hand_values():
    # theta_acc = -(F/M) / (l (4/3 - m_p/M)) = -600/41, x_acc = 400/41
    s, failed = step(ZERO, 1)
    assert not failed
    assert s.x == 0.0 and s.theta == 0.0
    assert s.x_dot == pytest.approx(8 / 41, abs=1e-9)
    assert s.theta_dot == pytest.approx(-12 / 41, abs=1e-9)
    assert s.x_dot == pytest.approx(0.19512, abs=1e-5)
    assert s.theta_dot == pytest.approx(-0.29268, abs=1e-5)


@given(states, st.sampled_from([1, 2]))
def test_mirror_symmetry(s, a):
    fwd, f1 = step(s, a)
    back, f2 = step(-s, 3 - a)
    assert f1 == f2
    np.testing.assert_allclose(np.array(back), -np.array(fwd), rtol=0, atol=1e-12)


@given(states, st.sampled_from([1, 2]))
def test_step_is_pure(s, a):
    assert step(s, a) == step(s, a)


def test_failure_bounds():
    for a in (1, 2):
        assert step(CartState(2.5, 0, 0, 0), a)[1]
        assert step(CartState(0, 0, 0.3, 0), a)[1]
        assert not step(ZERO, a)[1]


def test_step_rejects_bad_input():
    with pytest.raises(ValueError):
        step(ZERO, 0)
    with pytest.raises(ValueError):
        step(CartState(math.nan, 0, 0, 0), 1)


def test_zero_force_keeps_rest_state():
    cfg = EnvConfig(force_mag=0.0)
    s = ZERO
    for _ in range(200):
        s, failed = step(s, 1, cfg)
        assert s == ZERO and not failed


def test_reset_range_determinism_and_mean():
    a = reset(np.random.default_rng(3))
    b = reset(np.random.default_rng(3))
    assert a == b
    rng = np.random.default_rng(0)
    draws = np.array([reset(rng) for _ in range(10_000)])
    assert np.all(np.abs(draws) <= 0.05)
    np.testing.assert_allclose(draws.mean(axis=0), 0.0, atol=0.005)


def test_discretize_centre_and_corners():
    cfg = EnvConfig()
    assert discretize(ZERO) == 777
    assert index_to_bins(777) == (3, 3, 3, 3)
    top = CartState(*cfg.ranges)
    assert discretize(top) == 1295
    bottom = CartState(*(-r for r in cfg.ranges))
    assert discretize(bottom) == 0


def test_discretize_clamps():
    assert index_to_bins(discretize(CartState(-9.0, 0, 0, 0)))[0] == 0
    assert index_to_bins(discretize(CartState(0, 50.0, 0, 0)))[1] == 5
    assert index_to_bins(discretize(CartState(0, 0, 0, -50.0)))[3] == 0


def test_bin_boundaries_are_left_closed():
    cfg = EnvConfig(x_range=3.0)  # bin edges at exact integers
    assert index_to_bins(discretize(CartState(-2.0, 0, 0, 0), cfg))[0] == 1
    assert index_to_bins(discretize(CartState(np.nextafter(-2.0, -10), 0, 0, 0), cfg))[0] == 0
    assert index_to_bins(discretize(CartState(0.0, 0, 0, 0), cfg))[0] == 3


def test_index_bijection():
    seen = set()
    for bins in itertools.product(range(6), repeat=4):
        j = bins_to_index(bins)
        assert 0 <= j < N_STATES
        assert index_to_bins(j) == bins
        seen.add(j)
    assert seen == set(range(N_STATES))
    with pytest.raises(ValueError):
        index_to_bins(N_STATES)


def test_env_config_validation():
    with pytest.raises(ValueError):
        EnvConfig(cart_mass=0.0)
    with pytest.raises(ValueError):
        EnvConfig(tau=-0.01)
