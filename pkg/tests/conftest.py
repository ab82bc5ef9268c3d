"""Shared fixtures: the baseline market, preference pairs and the golden
feasible scenarios used by the multiplier and acceptance suites.

Golden scenarios pin the initial wealth at a recorded fraction of the
feasibility window (the published baseline parameters violate the window, so
every solvable configuration here is explicitly rescaled and the fraction is
part of the scenario definition).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import pytest

from omegavar.market import MarketParams, feasibility, kernel_law
from omegavar.multipliers import QuadratureSpec, solve_nu
from omegavar.preferences import PreferencePair

BASE_MARKET = dict(
    horizon=40.0, r_nominal=0.04, r_real=0.02,
    sigma_i=0.4, sigma_s1=0.3, sigma_s2=0.4,
    mu_c=0.1, sigma_c1=0.2, sigma_c2=0.3,
    lambda_i=0.2, lambda_s=0.3,
    i0=1.0, c0=0.8, x0=1.0,
)


@dataclass(frozen=True)
class GoldenScenario:
    name: str
    market: MarketParams
    gamma1: float
    gamma2: float
    scale: float
    theta: float
    floor: float
    epsilon: float
    window_fraction: float

    def pair(self) -> PreferencePair:
        return PreferencePair.power(self.gamma1, self.gamma2, self.scale)

    def x_tilde0(self) -> float:
        rep = feasibility(self.market, self.theta, self.floor, self.epsilon)
        return rep.lower + self.window_fraction * (rep.upper - rep.lower)


def _scenario(name, overrides, gamma1, gamma2, scale, theta, floor, epsilon, frac):
    return GoldenScenario(name=name, market=MarketParams(**{**BASE_MARKET, **overrides}),
                          gamma1=gamma1, gamma2=gamma2, scale=scale,
                          theta=theta, floor=floor, epsilon=epsilon,
                          window_fraction=frac)


GOLDEN_SCENARIOS = (
    _scenario("theta7-binding", {}, 0.3, 2.2, 1.0, 7.0, 6.5, 0.01, 0.5),
    _scenario("theta6-binding", {}, 0.3, 2.2, 1.0, 6.0, 6.5, 0.01, 0.5),
    _scenario("theta-eq-floor", {}, 0.3, 2.2, 1.0, 6.5, 6.5, 0.01, 0.5),
    _scenario("floor5-slack", {}, 0.3, 2.2, 1.0, 6.0, 5.0, 0.01, 0.65),
    _scenario("floor55-slack", {}, 0.3, 2.2, 1.0, 6.0, 5.5, 0.01, 0.65),
    _scenario("eps10-slack", {}, 0.3, 2.2, 1.0, 7.5, 6.0, 0.10, 0.5),
    _scenario("eps1-slack", {}, 0.3, 2.2, 1.0, 7.5, 6.0, 0.01, 0.5),
    _scenario("eps03-binding", {}, 0.3, 2.2, 1.0, 7.5, 6.0, 0.003, 0.5),
    _scenario("gamma2-low", {}, 0.3, 2.0, 1.0, 7.0, 6.5, 0.01, 0.5),
    _scenario("gamma2-high", {}, 0.3, 2.25, 1.0, 7.0, 6.5, 0.01, 0.5),
    _scenario("gamma1-low", {}, 0.25, 2.2, 1.0, 7.0, 6.5, 0.01, 0.5),
    _scenario("gamma1-high", {}, 0.35, 2.2, 1.0, 7.0, 6.5, 0.01, 0.5),
    _scenario("concave-slack", {}, 0.3, 0.8, 1.0, 6.0, 5.0, 0.05, 0.5),
    _scenario("concave-highfloor", {}, 0.3, 0.5, 1.0, 6.0, 7.0, 0.05, 0.5),
    _scenario("concave-binding", {}, 0.3, 0.8, 1.0, 6.0, 6.6, 0.01, 0.5),
    _scenario("penalty-scale2", {}, 0.3, 2.2, 2.0, 7.0, 6.5, 0.01, 0.5),
    _scenario("market-variant", {"lambda_s": 0.2, "sigma_i": 0.3}, 0.3, 2.2, 1.0,
              7.0, 6.5, 0.01, 0.5),
    _scenario("tabulated-rates",
              {"r_nominal": [0.04] * 20 + [0.03] * 20,
               "r_real": [0.02] * 25 + [0.025] * 15},
              0.3, 2.2, 1.0, 7.0, 6.5, 0.01, 0.5),
    _scenario("vacuous-eps1", {}, 0.3, 2.2, 1.0, 6.0, 5.0, 1.0, 0.5),
    _scenario("rich-window", {}, 0.3, 2.2, 1.0, 6.0, 5.0, 0.01, 0.85),
)


@pytest.fixture(scope="session")
def base_market() -> MarketParams:
    return MarketParams(**BASE_MARKET)


@pytest.fixture(scope="session")
def baseline_pair() -> PreferencePair:
    return PreferencePair.power(0.3, 2.2, 1.0)


@pytest.fixture(scope="session")
def quad() -> QuadratureSpec:
    return QuadratureSpec()


@pytest.fixture(scope="session")
def golden_solved(quad):
    """All golden scenarios solved once; keyed by name."""
    out = {}
    for sc in GOLDEN_SCENARIOS:
        law = kernel_law(sc.market)
        result = solve_nu(law, sc.pair(), sc.x_tilde0(), sc.theta, sc.floor,
                          sc.epsilon, quad)
        out[sc.name] = (sc, law, sc.x_tilde0(), result)
    return out
