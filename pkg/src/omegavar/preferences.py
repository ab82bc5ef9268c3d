"""Reward/penalty preference pairs and the linearized gain-loss objective.

The workhorse is the power family U(x) = x**gamma1, D(x) = scale * x**gamma2
with analytic derivatives and inverse marginals. A generic pair built from
callables is supported with finite-difference derivatives and bisection
inverses; the closed-form replication layer requires the power family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .rootfind import bisect, BracketError


class PenaltyShape(str, Enum):
    CONVEX = "convex"
    CONCAVE = "concave"


def _fd_derivative(fn: Callable[[float], float]) -> Callable[[float], float]:
    # central differences, step h = x*1e-6 + 1e-9
    def deriv(x: float) -> float:
        h = abs(x) * 1e-6 + 1e-9
        return (fn(x + h) - fn(max(x - h, 0.0))) / (h + min(x, h))
    return deriv


def _bisect_inverse(deriv: Callable[[float], float]) -> Callable[[float], float]:
    # monotone-decreasing marginal assumed; solve deriv(x) = y to 1e-12 relative
    def inverse(y: float) -> float:
        if y <= 0.0:
            raise ValueError("marginal values must be positive")
        lo, hi = 1e-16, 1e-16
        while deriv(hi) > y:
            hi *= 8.0
            if hi > 1e18:
                return math.inf
        lo = hi / 8.0 if hi > 1e-16 else 1e-16
        while deriv(lo) < y:
            lo /= 8.0
            if lo < 1e-18:
                return 0.0
        return bisect(lambda x: deriv(x) - y, lo, hi, xtol=1e-12)
    return inverse


def _bisect_inverse_increasing(deriv: Callable[[float], float]) -> Callable[[float], float]:
    def inverse(y: float) -> float:
        if y <= 0.0:
            raise ValueError("marginal values must be positive")
        hi = 1.0
        while deriv(hi) < y:
            hi *= 8.0
            if hi > 1e18:
                return math.inf
        lo = hi / 8.0
        while deriv(lo) > y:
            lo /= 8.0
            if lo < 1e-18:
                return 0.0
        return bisect(lambda x: deriv(x) - y, lo, hi, xtol=1e-12)
    return inverse


@dataclass(frozen=True)
class PreferencePair:
    """Reward U and penalty D with derivatives and inverse marginals.

    ``inv_reward_prime`` is (U')^-1 and ``inv_penalty_prime`` is (D')^-1; for
    the power family these accept numpy arrays. Immutable after construction.
    """

    reward: Callable = field(repr=False)
    penalty: Callable = field(repr=False)
    reward_prime: Callable = field(repr=False)
    penalty_prime: Callable = field(repr=False)
    inv_reward_prime: Callable = field(repr=False)
    inv_penalty_prime: Callable = field(repr=False)
    shape: PenaltyShape = PenaltyShape.CONVEX
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None
    scale: Optional[float] = None

    @property
    def is_power(self) -> bool:
        return self.gamma1 is not None

    @classmethod
    def power(cls, gamma1: float, gamma2: float, scale: float = 1.0) -> "PreferencePair":
        """Power pair U(x) = x**gamma1, D(x) = scale * x**gamma2."""
        if gamma1 <= 0.0:
            raise ValueError("gamma1 must be positive")
        if gamma2 <= 0.0 or scale <= 0.0:
            raise ValueError("gamma2 and scale must be positive")
        g1, g2, A = float(gamma1), float(gamma2), float(scale)

        def U(x):
            return np.power(x, g1)

        def D(x):
            return A * np.power(x, g2)

        def U_prime(x):
            if np.isscalar(x) and x == 0.0:
                return math.inf if g1 < 1.0 else (g1 if g1 == 1.0 else 0.0)
            with np.errstate(divide="ignore"):
                return g1 * np.power(x, g1 - 1.0)

        def D_prime(x):
            if np.isscalar(x) and x == 0.0:
                return math.inf if g2 < 1.0 else (A * g2 if g2 == 1.0 else 0.0)
            with np.errstate(divide="ignore"):
                return A * g2 * np.power(x, g2 - 1.0)

        def I1(y):
            with np.errstate(divide="ignore", over="ignore"):
                return np.power(np.asarray(y, dtype=float) / g1, 1.0 / (g1 - 1.0)) \
                    if not np.isscalar(y) else float(np.power(y / g1, 1.0 / (g1 - 1.0)))

        def I2(y):
            if g2 == 1.0:
                raise ValueError("linear penalty has no inverse marginal")
            with np.errstate(divide="ignore", over="ignore"):
                return np.power(np.asarray(y, dtype=float) / (A * g2), 1.0 / (g2 - 1.0)) \
                    if not np.isscalar(y) else float(np.power(y / (A * g2), 1.0 / (g2 - 1.0)))

        shape = PenaltyShape.CONVEX if g2 > 1.0 else PenaltyShape.CONCAVE
        return cls(reward=U, penalty=D, reward_prime=U_prime, penalty_prime=D_prime,
                   inv_reward_prime=I1, inv_penalty_prime=I2, shape=shape,
                   gamma1=g1, gamma2=g2, scale=A)

    @classmethod
    def from_callables(cls, reward, penalty, *, reward_prime=None, penalty_prime=None,
                       inv_reward_prime=None, inv_penalty_prime=None,
                       shape: Optional[PenaltyShape] = None) -> "PreferencePair":
        """Generic pair; missing derivatives use central differences, missing
        inverses use monotone bisection to 1e-12."""
        up = reward_prime or _fd_derivative(reward)
        dp = penalty_prime or _fd_derivative(penalty)
        i1 = inv_reward_prime or _bisect_inverse(up)
        if inv_penalty_prime is None:
            probe = dp(2.0) - dp(1.0)
            i2 = _bisect_inverse_increasing(dp) if probe > 0 else _bisect_inverse(dp)
        else:
            i2 = inv_penalty_prime
        if shape is None:
            xs = np.logspace(-3, 3, 41)
            second = [penalty(float(a)) + penalty(float(b)) - 2.0 * penalty(0.5 * float(a + b))
                      for a, b in zip(xs[:-2], xs[2:])]
            shape = PenaltyShape.CONVEX if float(np.median(second)) > 0 else PenaltyShape.CONCAVE
        return cls(reward=reward, penalty=penalty, reward_prime=up, penalty_prime=dp,
                   inv_reward_prime=i1, inv_penalty_prime=i2, shape=shape)


def validate(pair: PreferencePair) -> list[str]:
    """Check monotonicity, Inada, concavity and asymptotic-elasticity assumptions.

    Returns the list of violated assumptions (empty when all pass). Power pairs
    are checked analytically; generic pairs are sampled on a 1000-point log grid,
    which is a heuristic (near-linear rewards may be flagged conservatively).
    """
    violations: list[str] = []
    if pair.is_power:
        g1 = pair.gamma1
        if abs(float(pair.reward(0.0))) > 1e-12 or abs(float(pair.penalty(0.0))) > 1e-12:
            violations.append("H1: U(0) = D(0) = 0 fails")
        if not 0.0 < g1:
            violations.append("H1: U not strictly increasing")
        if g1 >= 1.0 or g1 <= 0.0:
            if g1 == 1.0:
                violations.append("H2: U'(0+) finite (Inada fails)")
            else:
                violations.append("H2: Inada condition fails")
        if g1 >= 1.0:
            violations.append("H3: U not strictly concave")
        if not 0.0 < g1 < 1.0:
            violations.append("H4: asymptotic elasticity condition fails")
        return violations

    grid = np.logspace(-6.0, 6.0, 1000)
    u_vals = np.array([pair.reward(float(x)) for x in grid])
    d_vals = np.array([pair.penalty(float(x)) for x in grid])
    if abs(float(pair.reward(0.0))) > 1e-9 or abs(float(pair.penalty(0.0))) > 1e-9:
        violations.append("H1: U(0) = D(0) = 0 fails")
    if not (np.all(np.diff(u_vals) > 0) and np.all(np.diff(d_vals) > 0)):
        violations.append("H1: monotonicity fails on sampled grid")
    up_lo = float(pair.reward_prime(1e-12))
    up_hi = float(pair.reward_prime(1e12))
    if not (up_lo >= 10.0 and up_hi <= 0.1):
        violations.append("H2: sampled Inada limits fail")
    mids = np.array([pair.reward(0.5 * float(a + b)) for a, b in zip(grid[:-2], grid[2:])])
    if not np.all(mids * 2.0 >= u_vals[2:] + u_vals[:-2] - 1e-12 * np.abs(u_vals[2:])):
        violations.append("H3: sampled concavity fails")
    # relative risk aversion sampled at large x for the elasticity condition
    x_big = np.logspace(3, 9, 7)
    rra = np.array([-x * (pair.reward_prime(x * 1.000001) - pair.reward_prime(x))
                    / (1e-6 * x) / pair.reward_prime(x) for x in x_big])
    if not (np.all(rra > 1e-6) and np.all(rra < 1.0 + 1e-6)):
        violations.append("H4: sampled asymptotic elasticity fails")
    return violations


def inverse_marginals(pair: PreferencePair, y: float) -> tuple[float, float]:
    """Evaluate both inverse marginals ((U')^-1, (D')^-1) at y > 0."""
    if y <= 0.0:
        raise ValueError("y must be positive")
    return float(pair.inv_reward_prime(y)), float(pair.inv_penalty_prime(y))


@dataclass(frozen=True)
class LinearizedObjective:
    """Pointwise gain-loss objective with the floor bonus.

    f(x) = U((x-theta)+) - nu*D((theta-x)+) + lam*1{x >= floor}. ``nu`` is the
    fractional-programming weight, ``lam`` the dualized floor-probability bonus.
    """

    pair: PreferencePair
    nu: float
    lam: float
    theta: float
    floor: float

    def __post_init__(self):
        if self.nu < 0.0 or self.lam < 0.0:
            raise ValueError("nu and lam must be non-negative")
        if self.theta <= 0.0:
            raise ValueError("theta must be positive")
        if self.floor < 0.0:
            raise ValueError("floor must be non-negative")

    def value_base(self, x):
        """f without the floor bonus (the lam = 0 objective)."""
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr < 0.0):
            raise ValueError("x must be non-negative")
        gains = np.where(x_arr > self.theta, x_arr - self.theta, 0.0)
        losses = np.where(x_arr < self.theta, self.theta - x_arr, 0.0)
        out = np.where(x_arr >= self.theta, self.pair.reward(gains),
                       -self.nu * np.asarray(self.pair.penalty(losses), dtype=float))
        return float(out) if np.isscalar(x) else out

    def value(self, x):
        """Full objective including the floor bonus."""
        base = self.value_base(x)
        bonus = self.lam * (np.asarray(x, dtype=float) >= self.floor)
        out = base + bonus
        return float(out) if np.isscalar(x) else out


def eval_f(obj: LinearizedObjective, x) -> float:
    """Exact piecewise evaluation of the linearized objective at x >= 0."""
    return obj.value(x)
