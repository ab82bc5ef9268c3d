"""Financial market model: parameters, pricing-kernel law, contribution annuity,
auxiliary initial wealth and the feasibility window of the terminal problem.

The market has cash, an inflation-indexed zero-coupon bond and a stock, plus a
stochastic contribution stream. Short rates may be constants or per-year tables
(piecewise constant on [k, k+1)); every rate integral is evaluated exactly, so
no quadrature error enters the kernel law or the annuity.

All functions here are pure; nothing holds mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

Rate = Union[float, Sequence[float]]


class DegenerateMarketError(ValueError):
    """The risk-price structure makes the pricing kernel deterministic."""


class SingularTransformError(ValueError):
    """The strategy transform cannot be inverted (zero volatility or index)."""


def _as_rate(rate: Rate):
    if isinstance(rate, (int, float)):
        return float(rate)
    return tuple(float(r) for r in rate)


def rate_integral(rate: Rate, t0: float, t1: float) -> float:
    """Exact integral of a constant or per-year tabulated short rate over [t0, t1]."""
    if t1 < t0:
        return -rate_integral(rate, t1, t0)
    rate = _as_rate(rate)
    if isinstance(rate, float):
        return rate * (t1 - t0)
    total = 0.0
    k = int(math.floor(t0))
    t = t0
    while t < t1:
        seg_end = min(float(k + 1), t1)
        idx = min(k, len(rate) - 1)
        total += rate[idx] * (seg_end - t)
        t = seg_end
        k += 1
    return total


def rate_at(rate: Rate, t: float) -> float:
    """Instantaneous rate at time t (left-continuous lookup for tables)."""
    rate = _as_rate(rate)
    if isinstance(rate, float):
        return rate
    return rate[min(int(math.floor(t)), len(rate) - 1)]


@dataclass(frozen=True)
class MarketParams:
    """All market and contribution coefficients plus the horizon.

    Rates are per year and dimensionless; volatilities are loadings on the two
    independent Brownian factors (inflation factor and stock factor).
    """

    horizon: float            # years until retirement, T
    r_nominal: Rate           # nominal short rate
    r_real: Rate              # real short rate
    sigma_i: float            # inflation index volatility
    sigma_s1: float           # stock loading on the inflation factor
    sigma_s2: float           # stock loading on its own factor
    mu_c: float               # contribution drift
    sigma_c1: float           # contribution loading on the inflation factor
    sigma_c2: float           # contribution loading on the stock factor
    lambda_i: float           # market price of inflation risk
    lambda_s: float           # market price of stock risk
    i0: float = 1.0           # initial price index
    c0: float = 0.0           # initial contribution rate
    x0: float = 0.0           # initial nominal fund wealth

    def __post_init__(self):
        object.__setattr__(self, "r_nominal", _as_rate(self.r_nominal))
        object.__setattr__(self, "r_real", _as_rate(self.r_real))
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.sigma_i <= 0.0 or self.sigma_s2 <= 0.0:
            raise ValueError("sigma_i and sigma_s2 must be positive (market completeness)")
        if self.sigma_c1 < 0.0 or self.sigma_c2 < 0.0:
            raise ValueError("contribution volatilities must be non-negative")
        if self.i0 <= 0.0:
            raise ValueError("i0 must be positive")
        if self.c0 < 0.0 or self.x0 < 0.0:
            raise ValueError("c0 and x0 must be non-negative")


@dataclass(frozen=True)
class KernelLaw:
    """Terminal pricing-kernel law: H(T) = exp(-a - x) with x ~ N(0, var).

    ``rr_integral`` is the integrated real rate over [0, T], so the lognormal
    mean identity E[H(T)] = exp(-rr_integral) = exp(-a + var/2) holds.
    """

    a: float
    var: float
    rr_integral: float

    def __post_init__(self):
        if self.var <= 0.0:
            raise DegenerateMarketError("kernel variance must be positive")

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    @property
    def mean_kernel(self) -> float:
        return math.exp(-self.rr_integral)


class Feasibility(str, Enum):
    FEASIBLE = "feasible"
    VIOLATES_LOWER = "violates_lower"
    VIOLATES_UPPER = "violates_upper"


@dataclass(frozen=True)
class FeasibilityReport:
    """Feasibility window for the auxiliary initial wealth.

    Feasible means lower < x_tilde0 < upper strictly; violations are reported,
    never raised, so the tool still runs in diagnostic mode on bad inputs.
    """

    lower: float
    upper: float
    x_tilde0: float
    verdict: Feasibility

    @property
    def feasible(self) -> bool:
        return self.verdict is Feasibility.FEASIBLE


def contribution_annuity(p: MarketParams, t: float, c_t: float | None = None) -> float:
    """Market value at time t of the contributions still to be paid on [t, T].

    Equals c(t) * integral_t^T exp[(mu_c - sigma_c1*lambda_i - sigma_c2*lambda_s)(s-t)
    - int_t^s r_n du] ds, evaluated exactly per constant-rate segment. ``c_t``
    defaults to the initial contribution rate; pass the realized c(t) along a
    simulated path.
    """
    T = p.horizon
    if t < 0.0 or t > T:
        raise ValueError(f"t={t} outside [0, {T}]")
    if c_t is None:
        c_t = p.c0
    m = p.mu_c - p.sigma_c1 * p.lambda_i - p.sigma_c2 * p.lambda_s
    total = 0.0
    rn_acc = 0.0  # integral of r_n from t to current segment start
    s = t
    k = int(math.floor(t))
    while s < T:
        seg_end = min(float(k + 1), T)
        if seg_end > s:
            r = rate_at(p.r_nominal, s)
            rate = m - r
            width = seg_end - s
            front = math.exp(m * (s - t) - rn_acc)
            if abs(rate) < 1e-14:
                total += front * width
            else:
                total += front * math.expm1(rate * width) / rate
            rn_acc += r * width
            s = seg_end
        k += 1
    return c_t * total


def auxiliary_initial(p: MarketParams) -> float:
    """Initial value of the self-financing auxiliary wealth, (x0 + F(0)) / i0."""
    return (p.x0 + contribution_annuity(p, 0.0)) / p.i0


def kernel_law(p: MarketParams) -> KernelLaw:
    """Lognormal law of the terminal pricing kernel implied by the market."""
    var = ((p.lambda_i - p.sigma_i) ** 2 + p.lambda_s ** 2) * p.horizon
    if var <= 0.0:
        raise DegenerateMarketError(
            "both risk prices are degenerate (lambda_i == sigma_i and lambda_s == 0)")
    rr = rate_integral(p.r_real, 0.0, p.horizon)
    return KernelLaw(a=rr + 0.5 * var, var=var, rr_integral=rr)


def feasibility(p: MarketParams, theta: float, floor: float, epsilon: float,
                *, check_quadrature: bool = False) -> FeasibilityReport:
    """Evaluate the feasibility window for the problem (theta, floor, epsilon).

    Lower bound is the cost of paying ``floor`` on the cheapest (1-epsilon) mass
    of states, in closed form via the Gaussian Mill's-ratio identity; upper
    bound is the cost of paying ``theta`` surely. ``check_quadrature`` verifies
    the closed form against direct quadrature (debug aid).
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if floor < 0.0:
        raise ValueError("floor must be non-negative")
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    law = kernel_law(p)
    sd = law.sd
    q = sd * float(ndtri(epsilon))  # epsilon-quantile of N(0, var); +-inf at the ends
    if math.isinf(q) and q > 0:
        tail = 0.0
    else:
        tail = float(ndtr(-q / sd - sd))
    lower = floor * math.exp(-law.a + 0.5 * law.var) * tail
    if check_quadrature and floor > 0.0 and not (math.isinf(q) and q > 0):
        lo = q if math.isfinite(q) else -40.0 * sd
        nodes, weights = np.polynomial.legendre.leggauss(200)
        hi = max(lo, 0.0) + 40.0 * sd
        x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * weights
        pdf = np.exp(-0.5 * x * x / law.var) / math.sqrt(2.0 * math.pi * law.var)
        direct = floor * float(np.sum(w * np.exp(-law.a - x) * pdf))
        if abs(direct - lower) > 1e-10 * max(1.0, abs(lower)):
            raise AssertionError(f"lower-bound closed form {lower} vs quadrature {direct}")
    upper = math.exp(-law.rr_integral) * theta
    x0_tilde = auxiliary_initial(p)
    if x0_tilde >= upper:
        verdict = Feasibility.VIOLATES_UPPER
    elif x0_tilde <= lower:
        verdict = Feasibility.VIOLATES_LOWER
    else:
        verdict = Feasibility.FEASIBLE
    return FeasibilityReport(lower=lower, upper=upper, x_tilde0=x0_tilde, verdict=verdict)


def forward_transform(p: MarketParams, I_t: float, F_t: float, X_t: float,
                      pi_p: float, pi_s: float) -> tuple[float, float]:
    """Map nominal positions (pi_p, pi_s) to the auxiliary-wealth positions."""
    if I_t <= 0.0:
        raise SingularTransformError("index level must be positive")
    if p.sigma_s2 == 0.0 or p.sigma_i == 0.0:
        raise SingularTransformError("sigma_s2 and sigma_i must be non-zero")
    pi_s_aux = (pi_s * p.sigma_s2 + p.sigma_c2 * F_t) / (I_t * p.sigma_s2)
    agg = (pi_p * p.sigma_i + pi_s * p.sigma_s1 + p.sigma_c1 * F_t
           - p.sigma_i * (X_t + F_t)) / I_t
    pi_p_aux = (agg - pi_s_aux * p.sigma_s1) / p.sigma_i
    return pi_p_aux, pi_s_aux


def back_transform(p: MarketParams, I_t: float, F_t: float, X_t: float,
                   pi_p_aux: float, pi_s_aux: float) -> tuple[float, float]:
    """Invert the auxiliary substitution exactly: auxiliary positions to nominal."""
    if I_t <= 0.0:
        raise SingularTransformError("index level must be positive")
    if p.sigma_s2 == 0.0 or p.sigma_i == 0.0:
        raise SingularTransformError("sigma_s2 and sigma_i must be non-zero")
    pi_s = (I_t * pi_s_aux * p.sigma_s2 - p.sigma_c2 * F_t) / p.sigma_s2
    pi_p = (I_t * (pi_p_aux * p.sigma_i + pi_s_aux * p.sigma_s1)
            - pi_s * p.sigma_s1 - p.sigma_c1 * F_t + p.sigma_i * (X_t + F_t)) / p.sigma_i
    return pi_p, pi_s
