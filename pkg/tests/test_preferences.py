"""Preference pairs: assumption checks, inverse marginals, objective evaluation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omegavar.preferences import (LinearizedObjective, PenaltyShape,
                                  PreferencePair, eval_f, inverse_marginals,
                                  validate)


def test_power_validate_baseline():
    assert validate(PreferencePair.power(0.3, 2.2, 1.0)) == []


def test_power_validate_convex_reward_flagged():
    with pytest.raises(ValueError):
        PreferencePair.power(0.0, 2.2)
    flags = validate(PreferencePair.power(1.5, 2.2, 1.0))
    assert any("H3" in f for f in flags)


def test_power_validate_linear_reward_flagged():
    flags = validate(PreferencePair.power(1.0, 2.2, 1.0))
    assert any("H2" in f for f in flags)


def test_power_shape_flag():
    assert PreferencePair.power(0.3, 2.2).shape is PenaltyShape.CONVEX
    assert PreferencePair.power(0.3, 0.8).shape is PenaltyShape.CONCAVE
    assert PreferencePair.power(0.3, 1.0).shape is PenaltyShape.CONCAVE


def test_inverse_marginal_examples():
    pair = PreferencePair.power(0.3, 2.2, 1.0)
    i1, _ = inverse_marginals(pair, 0.3)
    assert i1 == pytest.approx(1.0, rel=1e-14)
    _, i2 = inverse_marginals(pair, 2.2)
    assert i2 == pytest.approx(1.0, rel=1e-14)
    i1, _ = inverse_marginals(pair, 0.6)
    assert i1 == pytest.approx(2.0 ** (-10.0 / 7.0), rel=1e-14)
    assert i1 == pytest.approx(0.3715, abs=5e-5)
    with pytest.raises(ValueError):
        inverse_marginals(pair, 0.0)


def test_inverse_marginal_round_trip_grid():
    pair = PreferencePair.power(0.3, 2.2, 1.0)
    xs = np.logspace(-6, 6, 200)
    i1 = pair.inv_reward_prime(np.asarray(pair.reward_prime(xs)))
    i2 = pair.inv_penalty_prime(np.asarray(pair.penalty_prime(xs)))
    assert np.allclose(i1, xs, rtol=1e-10)
    assert np.allclose(i2, xs, rtol=1e-10)


@settings(max_examples=100, deadline=None)
@given(g1=st.floats(0.05, 0.95), g2=st.floats(0.15, 3.0), x=st.floats(1e-6, 1e6))
def test_round_trip_property(g1, g2, x):
    pair = PreferencePair.power(g1, g2, 1.3)
    assert float(pair.inv_reward_prime(float(pair.reward_prime(x)))) == pytest.approx(x, rel=1e-10)
    if g2 != 1.0:
        assert float(pair.inv_penalty_prime(float(pair.penalty_prime(x)))) == pytest.approx(x, rel=1e-10)


def test_generic_pair_bisection_inverse():
    pair = PreferencePair.from_callables(
        reward=lambda x: 2.0 * math.sqrt(x),
        penalty=lambda x: x * x + x,
    )
    assert pair.shape is PenaltyShape.CONVEX
    # (U')^{-1}: U'(x) = x^{-1/2}, inverse of 0.5 is 4
    assert float(pair.inv_reward_prime(0.5)) == pytest.approx(4.0, rel=1e-9)
    # (D')^{-1}: D'(x) = 2x + 1, inverse of 4 is 1.5
    assert float(pair.inv_penalty_prime(4.0)) == pytest.approx(1.5, rel=1e-9)
    assert validate(pair) == []


def test_generic_pair_flags_nonconcave_reward():
    pair = PreferencePair.from_callables(reward=lambda x: x * x, penalty=lambda x: x * x)
    flags = validate(pair)
    assert flags  # monotone but convex: Inada and concavity both sampled as broken


def test_eval_f_examples():
    pair = PreferencePair.power(0.3, 2.2, 1.0)
    obj0 = LinearizedObjective(pair=pair, nu=1.0, lam=0.0, theta=6.0, floor=6.5)
    assert eval_f(obj0, 6.0) == 0.0
    assert eval_f(obj0, 7.0) == pytest.approx(1.0, rel=1e-14)
    obj = LinearizedObjective(pair=pair, nu=1.0, lam=0.5, theta=6.0, floor=6.5)
    assert eval_f(obj, 6.2) == pytest.approx(0.2 ** 0.3, rel=1e-12)
    assert eval_f(obj, 6.2) == pytest.approx(0.61703, abs=5e-5)
    # at and above the floor the bonus applies
    assert eval_f(obj, 6.5) == pytest.approx(0.5 ** 0.3 + 0.5, rel=1e-12)
    with pytest.raises(ValueError):
        eval_f(obj, -0.1)


def test_eval_f_bonus_is_zero_or_lam():
    pair = PreferencePair.power(0.3, 2.2, 1.0)
    base = LinearizedObjective(pair=pair, nu=2.0, lam=0.0, theta=6.0, floor=5.0)
    lifted = LinearizedObjective(pair=pair, nu=2.0, lam=0.7, theta=6.0, floor=5.0)
    xs = np.linspace(0.0, 12.0, 201)
    diff = lifted.value(xs) - base.value(xs)
    assert set(np.round(np.unique(diff), 12)) <= {0.0, 0.7}


@settings(max_examples=100, deadline=None)
@given(x1=st.floats(6.0, 50.0), x2=st.floats(6.0, 50.0), lam=st.floats(0.0, 5.0))
def test_eval_f_monotone_above_theta(x1, x2, lam):
    pair = PreferencePair.power(0.3, 2.2, 1.0)
    obj = LinearizedObjective(pair=pair, nu=1.5, lam=lam, theta=6.0, floor=6.5)
    lo, hi = sorted((x1, x2))
    assert eval_f(obj, hi) >= eval_f(obj, lo) - 1e-12


def test_second_difference_sign_matches_shape():
    theta = 6.0
    xs = np.linspace(0.5, 5.5, 41)
    for g2, sign in ((2.2, -1.0), (0.8, 1.0)):
        pair = PreferencePair.power(0.3, g2, 1.0)
        obj = LinearizedObjective(pair=pair, nu=1.0, lam=0.0, theta=theta, floor=0.0)
        vals = obj.value_base(xs)
        second = vals[2:] - 2.0 * vals[1:-1] + vals[:-2]
        # convex penalty: -nu*D(theta-x) is concave on the loss side (and vice versa)
        assert np.all(sign * second >= -1e-12)


def test_objective_validation():
    pair = PreferencePair.power(0.3, 2.2, 1.0)
    with pytest.raises(ValueError):
        LinearizedObjective(pair=pair, nu=-1.0, lam=0.0, theta=6.0, floor=6.5)
    with pytest.raises(ValueError):
        LinearizedObjective(pair=pair, nu=1.0, lam=-0.5, theta=6.0, floor=6.5)
    with pytest.raises(ValueError):
        LinearizedObjective(pair=pair, nu=1.0, lam=0.0, theta=0.0, floor=6.5)
    with pytest.raises(ValueError):
        LinearizedObjective(pair=pair, nu=1.0, lam=0.0, theta=6.0, floor=-1.0)
