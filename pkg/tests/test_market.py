"""Market model: rate integrals, annuity, kernel law, feasibility, transforms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omegavar.market import (DegenerateMarketError, Feasibility, MarketParams,
                             SingularTransformError, auxiliary_initial,
                             back_transform, contribution_annuity, feasibility,
                             forward_transform, kernel_law, rate_integral)

# closed-form annuity at the baseline: net rate mu_c - sc1*li - sc2*ls - r_n = -0.07
F0_BASELINE = 0.8 * (1.0 - math.exp(-0.07 * 40.0)) / 0.07


def test_param_validation():
    good = dict(horizon=40.0, r_nominal=0.04, r_real=0.02, sigma_i=0.4, sigma_s1=0.3,
                sigma_s2=0.4, mu_c=0.1, sigma_c1=0.2, sigma_c2=0.3, lambda_i=0.2,
                lambda_s=0.3, i0=1.0, c0=0.8, x0=1.0)
    MarketParams(**good)
    for key, bad in [("horizon", 0.0), ("sigma_i", 0.0), ("sigma_s2", -0.1),
                     ("sigma_c1", -1.0), ("i0", 0.0), ("c0", -0.5), ("x0", -1.0)]:
        with pytest.raises(ValueError):
            MarketParams(**{**good, key: bad})


def test_rate_integral_table_matches_riemann():
    table = [0.04] * 20 + [0.03] * 20
    exact = rate_integral(table, 3.25, 27.5)
    assert exact == pytest.approx(0.04 * (20.0 - 3.25) + 0.03 * (27.5 - 20.0), rel=1e-14)
    assert rate_integral(0.04, 0.0, 40.0) == pytest.approx(1.6, rel=1e-15)


def test_annuity_zero_at_horizon(base_market):
    assert contribution_annuity(base_market, 40.0) == 0.0


def test_annuity_baseline_closed_form(base_market):
    val = contribution_annuity(base_market, 0.0)
    assert val == pytest.approx(F0_BASELINE, rel=1e-12)
    assert val == pytest.approx(10.7336, abs=5e-5)
    # independent oracle: midpoint Riemann sum with 1e6 panels
    n = 1_000_000
    s = (np.arange(n) + 0.5) * (40.0 / n)
    riemann = 0.8 * float(np.sum(np.exp(-0.07 * s))) * 40.0 / n
    assert val == pytest.approx(riemann, rel=1e-8)


def test_annuity_flat_exponent_gives_horizon():
    p = MarketParams(horizon=40.0, r_nominal=0.03, r_real=0.02, sigma_i=0.4,
                     sigma_s1=0.3, sigma_s2=0.4, mu_c=0.03, sigma_c1=0.0, sigma_c2=0.0,
                     lambda_i=0.2, lambda_s=0.3, i0=1.0, c0=1.0, x0=0.0)
    assert contribution_annuity(p, 0.0) == pytest.approx(40.0, rel=1e-12)


def test_annuity_domain_and_monotone(base_market):
    with pytest.raises(ValueError):
        contribution_annuity(base_market, -0.1)
    with pytest.raises(ValueError):
        contribution_annuity(base_market, 40.1)
    ts = np.linspace(0.0, 40.0, 41)
    vals = [contribution_annuity(base_market, float(t)) for t in ts]
    # net exponent rate is negative at the baseline, so the annuity decays
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_auxiliary_initial(base_market):
    import dataclasses
    assert auxiliary_initial(base_market) == pytest.approx(1.0 + F0_BASELINE, rel=1e-12)
    no_contrib = dataclasses.replace(base_market, c0=0.0, x0=2.5, i0=2.0)
    assert auxiliary_initial(no_contrib) == pytest.approx(1.25, rel=1e-15)
    empty = dataclasses.replace(base_market, c0=0.0, x0=0.0)
    assert auxiliary_initial(empty) == 0.0


def test_kernel_law_baseline(base_market):
    law = kernel_law(base_market)
    assert law.var == pytest.approx(((0.2 - 0.4) ** 2 + 0.3 ** 2) * 40.0, rel=1e-14)
    assert law.var == pytest.approx(5.2, rel=1e-14)
    assert law.a == pytest.approx(0.8 + 2.6, rel=1e-14)
    assert law.mean_kernel == pytest.approx(math.exp(-0.8), rel=1e-14)


def test_kernel_law_degenerate():
    import dataclasses
    p = MarketParams(horizon=40.0, r_nominal=0.04, r_real=0.02, sigma_i=0.4,
                     sigma_s1=0.3, sigma_s2=0.4, mu_c=0.1, sigma_c1=0.2, sigma_c2=0.3,
                     lambda_i=0.4, lambda_s=0.0, i0=1.0, c0=0.8, x0=1.0)
    with pytest.raises(DegenerateMarketError):
        kernel_law(p)


def test_kernel_mean_by_hermite_quadrature(base_market):
    law = kernel_law(base_market)
    t, w = np.polynomial.hermite.hermgauss(200)
    x = math.sqrt(2.0 * law.var) * t
    mean = float(np.sum(w / math.sqrt(math.pi) * np.exp(-law.a - x)))
    assert mean == pytest.approx(math.exp(-law.rr_integral), rel=1e-10)


def test_feasibility_trivial_bounds(base_market):
    rep = feasibility(base_market, theta=6.0, floor=0.0, epsilon=0.5)
    assert rep.lower == 0.0
    rep = feasibility(base_market, theta=6.0, floor=6.5, epsilon=1.0)
    assert rep.lower == 0.0


def test_feasibility_baseline_violates_upper(base_market):
    rep = feasibility(base_market, theta=6.0, floor=6.5, epsilon=0.01,
                      check_quadrature=True)
    assert rep.upper == pytest.approx(6.0 * math.exp(-0.8), rel=1e-12)
    assert rep.upper == pytest.approx(2.69597, abs=5e-5)
    assert rep.x_tilde0 == pytest.approx(1.0 + F0_BASELINE, rel=1e-12)
    assert rep.verdict is Feasibility.VIOLATES_UPPER


def test_feasibility_monotone_in_floor_and_epsilon(base_market):
    import dataclasses
    # position the budget between the two candidate lower bounds
    poor = dataclasses.replace(base_market, c0=0.0, x0=1.3)
    weak = feasibility(poor, theta=6.0, floor=5.0, epsilon=0.01)
    assert weak.verdict is Feasibility.FEASIBLE
    tight_floor = feasibility(poor, theta=6.0, floor=6.5, epsilon=0.01)
    assert tight_floor.lower > weak.lower
    assert tight_floor.verdict is Feasibility.VIOLATES_LOWER
    looser_eps = feasibility(poor, theta=6.0, floor=6.5, epsilon=0.2)
    assert looser_eps.lower < tight_floor.lower


def test_feasibility_closed_form_vs_quadrature(base_market):
    for eps in (0.01, 0.1, 0.5, 0.9):
        feasibility(base_market, theta=6.0, floor=6.5, epsilon=eps,
                    check_quadrature=True)  # raises if the identity fails


def test_back_transform_identity_scaling(base_market):
    # no contributions outstanding and zero wealth: pure index scaling
    pi_p, pi_s = back_transform(base_market, I_t=1.7, F_t=0.0, X_t=0.0,
                                pi_p_aux=2.0, pi_s_aux=3.0)
    assert pi_s == pytest.approx(1.7 * 3.0, rel=1e-14)
    assert pi_p == pytest.approx(1.7 * 2.0, rel=1e-14)


def test_back_transform_requires_positive_index(base_market):
    with pytest.raises(SingularTransformError):
        back_transform(base_market, I_t=0.0, F_t=1.0, X_t=1.0,
                       pi_p_aux=0.0, pi_s_aux=0.0)


@settings(max_examples=200, deadline=None)
@given(i_t=st.floats(0.05, 20.0), f_t=st.floats(0.0, 50.0), x_t=st.floats(0.0, 50.0),
       pi_p=st.floats(-30.0, 30.0), pi_s=st.floats(-30.0, 30.0))
def test_transform_round_trip(i_t, f_t, x_t, pi_p, pi_s):
    from conftest import BASE_MARKET
    p = MarketParams(**BASE_MARKET)
    aux_p, aux_s = forward_transform(p, i_t, f_t, x_t, pi_p, pi_s)
    back_p, back_s = back_transform(p, i_t, f_t, x_t, aux_p, aux_s)
    assert back_p == pytest.approx(pi_p, rel=1e-10, abs=1e-10)
    assert back_s == pytest.approx(pi_s, rel=1e-10, abs=1e-10)


def test_transform_equations_residual(base_market):
    # both defining relations hold to 1e-10 on random inputs
    rng = np.random.default_rng(3)
    p = base_market
    for _ in range(10_000):
        i_t, f_t, x_t = rng.uniform(0.1, 10.0), rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0)
        aux_p, aux_s = rng.normal(size=2) * 5.0
        pi_p, pi_s = back_transform(p, i_t, f_t, x_t, aux_p, aux_s)
        res_stock = aux_s * p.sigma_s2 - (pi_s * p.sigma_s2 + p.sigma_c2 * f_t) / i_t
        res_agg = (aux_p * p.sigma_i + aux_s * p.sigma_s1
                   - (pi_p * p.sigma_i + pi_s * p.sigma_s1 + p.sigma_c1 * f_t
                      - p.sigma_i * (x_t + f_t)) / i_t)
        assert abs(res_stock) < 1e-10
        assert abs(res_agg) < 1e-10
