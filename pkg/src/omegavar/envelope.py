"""Pointwise concavified solution of max_{x>=0} f(x) - y*x for the gain-loss
objective with a floor bonus.

The objective is piecewise concave (convex penalty) or S-shaped (concave
penalty), with an upward jump of size lam at the floor. Its concave envelope is
built from tangency and chord thresholds; the optimizer correspondence
y -> x*(y) is an ordered branch table over y-intervals with four branch kinds:

  gain   x = I1(y) + theta      (interior optimum above the reference level)
  loss   x = theta - I2(y/nu)   (interior optimum below it, convex penalty only)
  floor  x = L                  (probability mass parked exactly at the floor)
  zero   x = 0

The classifier walks the decision tree over the threshold comparisons; every
defining equation is solved by safeguarded bisection on a monotone residual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from .preferences import LinearizedObjective, PenaltyShape, PreferencePair
from .rootfind import (BracketError, NumericalFailure, bisect,
                       bisect_geometric, solve_decreasing)


class BranchKind(str, Enum):
    GAIN = "gain"
    LOSS = "loss"
    FLOOR = "floor"
    ZERO = "zero"


@dataclass(frozen=True)
class Branch:
    """One y-interval [y_lo, y_hi) of the optimizer correspondence."""

    y_lo: float
    y_hi: float
    kind: BranchKind


@dataclass(frozen=True)
class ThresholdSet:
    """Tangency/chord thresholds populated along the classifier path taken.

    Convex-penalty names follow the z1..z13 ladder of the case tree; z6_eq and
    z7_eq are the dedicated floor-equals-reference thresholds. Concave-penalty
    names are z_conc (the no-bonus tangency), l0, z_tilde0, z_hat and z_hat0.
    """

    k: Optional[float] = None
    z1: Optional[float] = None
    z2: Optional[float] = None
    z_prime: Optional[float] = None
    z3: Optional[float] = None
    z4: Optional[float] = None
    z5: Optional[float] = None
    z6: Optional[float] = None
    z7: Optional[float] = None
    z6_eq: Optional[float] = None
    z7_eq: Optional[float] = None
    z8: Optional[float] = None
    z9: Optional[float] = None
    z10: Optional[float] = None
    z11: Optional[float] = None
    z12: Optional[float] = None
    z13: Optional[float] = None
    z_conc: Optional[float] = None
    l0: Optional[float] = None
    z_tilde0: Optional[float] = None
    z_hat: Optional[float] = None
    z_hat0: Optional[float] = None
    reduced_from: Optional[str] = None


@dataclass(frozen=True)
class PiecewiseSolution:
    """Optimizer correspondence y -> x*(y) as an ordered branch table.

    Branch intervals partition (0, inf); x* is non-increasing. The table is
    stored with the left-closed/right-open convention of the case displays; at
    an exact interior breakpoint where the objective has two optimizers,
    evaluation returns the larger one (the left branch).
    """

    case: str
    branches: tuple[Branch, ...]
    objective: LinearizedObjective
    thresholds: ThresholdSet

    @property
    def pair(self) -> PreferencePair:
        return self.objective.pair

    @property
    def breakpoints(self) -> np.ndarray:
        """Interior breakpoints, strictly increasing."""
        return np.array([b.y_hi for b in self.branches[:-1]])

    def _branch_values(self, idx: int, y):
        br = self.branches[idx]
        obj = self.objective
        if br.kind is BranchKind.GAIN:
            return self.pair.inv_reward_prime(y) + obj.theta
        if br.kind is BranchKind.LOSS:
            return obj.theta - self.pair.inv_penalty_prime(np.asarray(y) / obj.nu)
        if br.kind is BranchKind.FLOOR:
            return np.full_like(np.asarray(y, dtype=float), obj.floor) \
                if not np.isscalar(y) else obj.floor
        return np.zeros_like(np.asarray(y, dtype=float)) if not np.isscalar(y) else 0.0

    def x_star(self, y):
        """Optimizer at price(s) y > 0; scalar in, scalar out."""
        if np.isscalar(y):
            if y <= 0.0:
                raise ValueError("y must be positive")
            idx = int(np.searchsorted(self.breakpoints, y, side="left"))
            return float(self._branch_values(idx, float(y)))
        y_arr = np.asarray(y, dtype=float)
        if np.any(y_arr <= 0.0):
            raise ValueError("y must be positive")
        idx = np.searchsorted(self.breakpoints, y_arr, side="left")
        out = np.empty_like(y_arr)
        for j in range(len(self.branches)):
            mask = idx == j
            if np.any(mask):
                out[mask] = self._branch_values(j, y_arr[mask])
        return out

    def floor_threshold_y(self, level: float) -> float:
        """sup{y : x*(y) >= level}; 0 if never reached, inf if reached for all y."""
        obj = self.objective
        if level <= 0.0:
            return math.inf
        for br in self.branches:
            if br.kind is BranchKind.GAIN:
                if level <= obj.theta:
                    continue
                hi_val = (self.pair.inv_reward_prime(br.y_hi) + obj.theta
                          if math.isfinite(br.y_hi) else obj.theta)
                if hi_val >= level:
                    continue
                y_cross = float(self.pair.reward_prime(level - obj.theta))
                return max(br.y_lo, min(y_cross, br.y_hi))
            elif br.kind is BranchKind.LOSS:
                if level >= obj.theta:
                    return br.y_lo
                hi_val = obj.theta - float(self.pair.inv_penalty_prime(br.y_hi / obj.nu))
                if hi_val >= level:
                    continue
                y_cross = obj.nu * float(self.pair.penalty_prime(obj.theta - level))
                return max(br.y_lo, min(y_cross, br.y_hi))
            elif br.kind is BranchKind.FLOOR:
                if obj.floor >= level:
                    continue
                return br.y_lo
            else:
                return br.y_lo
        return math.inf

    def to_json_dict(self) -> dict:
        obj = self.objective
        return {
            "case": self.case,
            "nu": obj.nu, "lam": obj.lam, "theta": obj.theta, "floor": obj.floor,
            "branches": [
                {"kind": b.kind.value, "y_lo": b.y_lo,
                 "y_hi": b.y_hi if math.isfinite(b.y_hi) else None}
                for b in self.branches
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# threshold equations
#
# Tangency points can hug the reference level to within one float ulp (the
# offset z - theta underflows long before the threshold stops mattering), so
# every tangency is solved for its *offset* from theta with geometric
# bisection, and marginals are evaluated from the offset directly.

def _two_sided_slope(obj: LinearizedObjective, bonus: float) -> float:
    """Slope s of the chord tangent to the loss curve at offset I2(s/nu) below
    theta and to the gain curve (raised by ``bonus``) at offset I1(s) above it.
    The residual is strictly decreasing in s."""
    pair, nu = obj.pair, obj.nu

    def resid(s: float) -> float:
        i1 = float(pair.inv_reward_prime(s))
        i2 = float(pair.inv_penalty_prime(s / nu))
        return (float(pair.reward(i1)) + bonus + nu * float(pair.penalty(i2))
                - s * (i1 + i2))

    try:
        return solve_decreasing(resid, seed=1.0, lo_cap=1e-12, hi_cap=1e12, xtol=1e-13)
    except BracketError as exc:
        raise NumericalFailure(f"two-sided tangency bracket failed: {exc}") from exc


def _gain_tangent(obj: LinearizedObjective, pivot: float, anchor_value: float,
                  lift: float = 0.0) -> float:
    """Offset w = z - theta of the tangency of the line through
    (pivot, anchor_value) with the gain curve raised by ``lift``.

    Requires pivot <= theta; the residual is strictly decreasing in w with a
    +inf limit at 0+, so a unique root exists for any anchor below the curve.
    """
    pair, theta = obj.pair, obj.theta
    base = theta - pivot

    def resid(w: float) -> float:
        return (float(pair.reward_prime(w)) * (base + w)
                - (float(pair.reward(w)) + lift) + anchor_value)

    lo = hi = 1.0
    if resid(1.0) >= 0.0:
        while True:
            hi *= 64.0
            if hi > 1e18:
                raise NumericalFailure("gain tangency bracket exceeded 1e18")
            if resid(hi) < 0.0:
                break
            lo = hi
    else:
        while True:
            lo /= 64.0
            if lo < 1e-300:
                raise NumericalFailure("gain tangency offset underflowed")
            if resid(lo) >= 0.0:
                break
            hi = lo
    return bisect_geometric(resid, lo, hi)


def _gain_tangent_below(obj: LinearizedObjective, pivot: float, anchor_value: float) -> float:
    """Offset w = z - theta in (0, pivot - theta] where the line through
    (pivot, anchor_value), anchored above the curve, is tangent to the gain
    curve; residual strictly increasing on the range."""
    pair, theta = obj.pair, obj.theta
    base = theta - pivot  # negative

    def resid(w: float) -> float:
        return (float(pair.reward_prime(w)) * (base + w)
                - float(pair.reward(w)) + anchor_value)

    w_max = pivot - theta
    if resid(w_max) <= 0.0:
        return w_max  # zero bonus: the tangency sits at the pivot itself
    lo = w_max / 2.0
    while resid(lo) >= 0.0:
        lo /= 64.0
        if lo < 1e-300:
            raise NumericalFailure("jump tangency offset underflowed")
    return bisect_geometric(resid, lo, w_max)


def _loss_tangent(obj: LinearizedObjective, pivot: float, anchor_value: float) -> float:
    """Offset v = theta - z of the tangency of the line through
    (pivot, anchor_value) with the loss curve (convex penalty); the residual is
    strictly increasing in v, positive at v = theta (the z = 0 end)."""
    pair, theta, nu = obj.pair, obj.theta, obj.nu

    def resid(v: float) -> float:
        return (nu * float(pair.penalty_prime(v)) * (pivot - theta + v)
                - nu * float(pair.penalty(v)) - anchor_value)

    r_top = resid(theta)
    if r_top < 0.0:
        raise NumericalFailure(
            f"loss tangency: residual negative at z=0 ({r_top}); classifier precondition broken")
    if r_top == 0.0:
        return theta
    v_lo = theta - pivot if pivot < theta else theta / 2.0
    if pivot < theta:
        if resid(v_lo) >= 0.0:
            return v_lo  # zero bonus: tangency at the pivot
    else:
        while resid(v_lo) >= 0.0:
            v_lo /= 64.0
            if v_lo < 1e-300:
                raise NumericalFailure("loss tangency offset underflowed")
    return bisect_geometric(resid, v_lo, theta)


# ---------------------------------------------------------------------------
# classifiers

def _finalize(case: str, raw: list[tuple[float, float, BranchKind]],
              obj: LinearizedObjective, tset: ThresholdSet) -> PiecewiseSolution:
    branches: list[Branch] = []
    for lo, hi, kind in raw:
        if not (math.isfinite(lo) and lo >= 0.0):
            raise NumericalFailure(f"non-finite breakpoint in case {case}: {raw}")
        if hi <= lo:
            continue
        if branches and branches[-1].kind is kind:
            branches[-1] = Branch(branches[-1].y_lo, hi, kind)
        else:
            branches.append(Branch(lo, hi, kind))
    if not branches or branches[0].y_lo != 0.0 or not math.isinf(branches[-1].y_hi):
        raise RuntimeError(f"internal classifier invariant violated in case {case}: {branches}")
    for prev, nxt in zip(branches, branches[1:]):
        if nxt.y_lo != prev.y_hi:
            raise RuntimeError(f"branch intervals do not partition (0, inf) in case {case}")
    return PiecewiseSolution(case=case, branches=tuple(branches),
                             objective=obj, thresholds=tset)


def _classify_convex(obj: LinearizedObjective) -> PiecewiseSolution:
    pair, nu, lam, theta, floor = obj.pair, obj.nu, obj.lam, obj.theta, obj.floor
    U, Up, D, Dp = pair.reward, pair.reward_prime, pair.penalty, pair.penalty_prime
    inf = math.inf

    s12 = _two_sided_slope(obj, bonus=0.0)
    v1 = float(pair.inv_penalty_prime(s12 / nu))   # theta - z1
    w2 = float(pair.inv_reward_prime(s12))         # z2 - theta
    z1, z2 = theta - v1, theta + w2
    d_theta = nu * float(Dp(theta))
    pen_theta = nu * float(D(theta))

    if lam == 0.0:
        if v1 <= theta:  # z1 >= 0
            tset = ThresholdSet(z1=z1, z2=z2)
            raw = [(0.0, s12, BranchKind.GAIN), (s12, d_theta, BranchKind.LOSS),
                   (d_theta, inf, BranchKind.ZERO)]
            return _finalize("Convex-I", raw, obj, tset)
        w_pr = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta)
        y_end = float(Up(w_pr))
        tset = ThresholdSet(z1=z1, z2=z2, z_prime=theta + w_pr)
        raw = [(0.0, y_end, BranchKind.GAIN), (y_end, inf, BranchKind.ZERO)]
        return _finalize("Convex-II", raw, obj, tset)

    f_at_floor = float(obj.value_base(floor))
    k = (f_at_floor + lam + pen_theta) / floor if floor > 0.0 else inf

    if theta - floor > v1:  # floor < z1
        s_floor = nu * float(Dp(theta - floor))
        if k > d_theta:
            tset = ThresholdSet(k=k, z1=z1, z2=z2)
            raw = [(0.0, s12, BranchKind.GAIN), (s12, s_floor, BranchKind.LOSS),
                   (s_floor, k, BranchKind.FLOOR), (k, inf, BranchKind.ZERO)]
            return _finalize("Convex-III", raw, obj, tset)
        v3 = _loss_tangent(obj, pivot=floor, anchor_value=f_at_floor + lam)
        s3 = nu * float(Dp(v3))
        tset = ThresholdSet(k=k, z1=z1, z2=z2, z3=theta - v3)
        raw = [(0.0, s12, BranchKind.GAIN), (s12, s_floor, BranchKind.LOSS),
               (s_floor, s3, BranchKind.FLOOR), (s3, d_theta, BranchKind.LOSS),
               (d_theta, inf, BranchKind.ZERO)]
        return _finalize("Convex-IV", raw, obj, tset)

    if floor < theta:
        w4 = _gain_tangent(obj, pivot=floor, anchor_value=-nu * float(D(theta - floor)))
        u4 = float(Up(w4))
        if k > d_theta:
            if k > u4:
                tset = ThresholdSet(k=k, z1=z1, z2=z2, z4=theta + w4)
                raw = [(0.0, u4, BranchKind.GAIN), (u4, k, BranchKind.FLOOR),
                       (k, inf, BranchKind.ZERO)]
                return _finalize("Convex-V", raw, obj, tset)
            w5 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta, lift=lam)
            u5 = float(Up(w5))
            tset = ThresholdSet(k=k, z1=z1, z2=z2, z4=theta + w4, z5=theta + w5)
            raw = [(0.0, u5, BranchKind.GAIN), (u5, inf, BranchKind.ZERO)]
            return _finalize("Convex-VI", raw, obj, tset)
        v3 = _loss_tangent(obj, pivot=floor, anchor_value=f_at_floor + lam)
        s3 = nu * float(Dp(v3))
        if s3 > u4:
            tset = ThresholdSet(k=k, z1=z1, z2=z2, z3=theta - v3, z4=theta + w4)
            raw = [(0.0, u4, BranchKind.GAIN), (u4, s3, BranchKind.FLOOR),
                   (s3, d_theta, BranchKind.LOSS), (d_theta, inf, BranchKind.ZERO)]
            return _finalize("Convex-VII", raw, obj, tset)
        s67 = _two_sided_slope(obj, bonus=lam)
        v6 = float(pair.inv_penalty_prime(s67 / nu))
        w7 = float(pair.inv_reward_prime(s67))
        if v6 >= theta:  # z6 <= 0
            w5 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta, lift=lam)
            u5 = float(Up(w5))
            tset = ThresholdSet(k=k, z1=z1, z2=z2, z3=theta - v3, z4=theta + w4,
                                z5=theta + w5, z6=theta - v6, z7=theta + w7,
                                reduced_from="Convex-VIII")
            raw = [(0.0, u5, BranchKind.GAIN), (u5, inf, BranchKind.ZERO)]
            return _finalize("Convex-VI", raw, obj, tset)
        tset = ThresholdSet(k=k, z1=z1, z2=z2, z3=theta - v3, z4=theta + w4,
                            z6=theta - v6, z7=theta + w7)
        raw = [(0.0, s67, BranchKind.GAIN), (s67, d_theta, BranchKind.LOSS),
               (d_theta, inf, BranchKind.ZERO)]
        return _finalize("Convex-VIII", raw, obj, tset)

    if floor == theta:
        s67 = _two_sided_slope(obj, bonus=lam)
        v6e = float(pair.inv_penalty_prime(s67 / nu))
        w7e = float(pair.inv_reward_prime(s67))
        if v6e >= theta:
            w5 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta, lift=lam)
            u5 = float(Up(w5))
            tset = ThresholdSet(k=k, z1=z1, z2=z2, z5=theta + w5,
                                z6_eq=theta - v6e, z7_eq=theta + w7e,
                                reduced_from="Convex-VIII(theta=floor)")
            raw = [(0.0, u5, BranchKind.GAIN), (u5, inf, BranchKind.ZERO)]
            return _finalize("Convex-VI", raw, obj, tset)
        tset = ThresholdSet(k=k, z1=z1, z2=z2, z6_eq=theta - v6e, z7_eq=theta + w7e,
                            reduced_from="theta=floor")
        raw = [(0.0, s67, BranchKind.GAIN), (s67, d_theta, BranchKind.LOSS),
               (d_theta, inf, BranchKind.ZERO)]
        return _finalize("Convex-VIII", raw, obj, tset)

    # floor > theta
    w_floor = floor - theta
    u_floor = float(Up(w_floor))
    w8 = _gain_tangent_below(obj, pivot=floor, anchor_value=float(U(w_floor)) + lam)
    u8 = float(Up(w8))
    if k > d_theta:
        if k >= u8:
            w10 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta)
            u10 = float(Up(w10))
            tset = ThresholdSet(k=k, z8=theta + w8, z10=theta + w10)
            raw = [(0.0, u_floor, BranchKind.GAIN), (u_floor, u8, BranchKind.FLOOR),
                   (u8, u10, BranchKind.GAIN), (u10, inf, BranchKind.ZERO)]
            return _finalize("Convex-XI", raw, obj, tset)
        if k >= u_floor:
            tset = ThresholdSet(k=k, z8=theta + w8)
            raw = [(0.0, u_floor, BranchKind.GAIN), (u_floor, k, BranchKind.FLOOR),
                   (k, inf, BranchKind.ZERO)]
            return _finalize("Convex-IX", raw, obj, tset)
        w9 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta, lift=lam)
        u9 = float(Up(w9))
        tset = ThresholdSet(k=k, z8=theta + w8, z9=theta + w9)
        raw = [(0.0, u9, BranchKind.GAIN), (u9, inf, BranchKind.ZERO)]
        return _finalize("Convex-X", raw, obj, tset)

    v11 = _loss_tangent(obj, pivot=floor, anchor_value=float(U(w_floor)) + lam)
    s11 = nu * float(Dp(v11))
    z11 = theta - v11
    if u8 >= s11 >= u_floor:
        tset = ThresholdSet(k=k, z8=theta + w8, z11=z11)
        raw = [(0.0, u_floor, BranchKind.GAIN), (u_floor, s11, BranchKind.FLOOR),
               (s11, d_theta, BranchKind.LOSS), (d_theta, inf, BranchKind.ZERO)]
        return _finalize("Convex-XII", raw, obj, tset)
    if s11 > u8:
        if w2 < w8 and v1 < theta:  # z2 < z8 and z1 > 0
            tset = ThresholdSet(k=k, z1=z1, z2=z2, z8=theta + w8, z11=z11)
            raw = [(0.0, u_floor, BranchKind.GAIN), (u_floor, u8, BranchKind.FLOOR),
                   (u8, s12, BranchKind.GAIN), (s12, d_theta, BranchKind.LOSS),
                   (d_theta, inf, BranchKind.ZERO)]
            return _finalize("Convex-XIII", raw, obj, tset)
        if w2 < w8:
            # loss tangency below zero: the chord from the origin replaces it
            w10 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta)
            u10 = float(Up(w10))
            tset = ThresholdSet(k=k, z1=z1, z2=z2, z8=theta + w8, z10=theta + w10,
                                z11=z11, reduced_from="Convex-XIII")
            raw = [(0.0, u_floor, BranchKind.GAIN), (u_floor, u8, BranchKind.FLOOR),
                   (u8, u10, BranchKind.GAIN), (u10, inf, BranchKind.ZERO)]
            return _finalize("Convex-XI", raw, obj, tset)
        # the curve-ride segment [z2, z8] is empty: bridge tangentially across
        return _convex_xiv(obj, k, theta + w8, z11, pen_theta, "Convex-XIII(z2>=z8)")
    return _convex_xiv(obj, k, theta + w8, z11, pen_theta, None)


def _convex_xiv(obj: LinearizedObjective, k: float, z8: float, z11: float,
                pen_theta: float, reduced: str | None) -> PiecewiseSolution:
    pair, nu, lam, theta = obj.pair, obj.nu, obj.lam, obj.theta
    inf = math.inf
    s1213 = _two_sided_slope(obj, bonus=lam)
    v12 = float(pair.inv_penalty_prime(s1213 / nu))
    w13 = float(pair.inv_reward_prime(s1213))
    if v12 >= theta:  # z12 <= 0: reduces to the two-branch form with z9
        w9 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta, lift=lam)
        u9 = float(pair.reward_prime(w9))
        tset = ThresholdSet(k=k, z8=z8, z9=theta + w9, z11=z11,
                            z12=theta - v12, z13=theta + w13,
                            reduced_from=reduced or "Convex-XIV")
        raw = [(0.0, u9, BranchKind.GAIN), (u9, inf, BranchKind.ZERO)]
        return _finalize("Convex-X", raw, obj, tset)
    if theta + w13 < obj.floor:
        raise RuntimeError("internal classifier invariant violated: z13 below the floor")
    d_theta = nu * float(pair.penalty_prime(theta))
    tset = ThresholdSet(k=k, z8=z8, z11=z11, z12=theta - v12, z13=theta + w13,
                        reduced_from=reduced)
    raw = [(0.0, s1213, BranchKind.GAIN), (s1213, d_theta, BranchKind.LOSS),
           (d_theta, inf, BranchKind.ZERO)]
    return _finalize("Convex-XIV", raw, obj, tset)


def _classify_concave_like(obj: LinearizedObjective, pen_theta: float,
                           pen_theta_floor: float, prefix: str) -> PiecewiseSolution:
    """Concave-penalty tree; also covers nu = 0 (both penalty values zero).

    Only penalty *values* enter here -- the loss side is always bridged by a
    chord, so no loss branch and no penalty inverse marginal are ever needed.
    """
    pair, lam, theta, floor = obj.pair, obj.lam, obj.theta, obj.floor
    U, Up = pair.reward, pair.reward_prime
    inf = math.inf

    w_conc = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta)
    u_conc = float(Up(w_conc))
    z_conc = theta + w_conc
    f_at_floor = float(U(floor - theta)) if floor >= theta else -pen_theta_floor
    k = (f_at_floor + lam + pen_theta) / floor if floor > 0.0 else inf

    if floor - theta >= w_conc:  # floor >= z_conc
        u_floor = float(Up(floor - theta))
        if k > u_conc:
            tset = ThresholdSet(k=k, z_conc=z_conc)
            raw = [(0.0, u_floor, BranchKind.GAIN), (u_floor, k, BranchKind.FLOOR),
                   (k, inf, BranchKind.ZERO)]
            return _finalize(f"{prefix}-I", raw, obj, tset)
        w_l0 = _gain_tangent_below(obj, pivot=floor, anchor_value=float(U(floor - theta)) + lam)
        u_l0 = float(Up(w_l0))
        tset = ThresholdSet(k=k, z_conc=z_conc, l0=theta + w_l0)
        raw = [(0.0, u_floor, BranchKind.GAIN), (u_floor, u_l0, BranchKind.FLOOR),
               (u_l0, u_conc, BranchKind.GAIN), (u_conc, inf, BranchKind.ZERO)]
        return _finalize(f"{prefix}-II", raw, obj, tset)

    if floor >= theta:
        u_floor = float(Up(floor - theta))
        if k >= u_floor:
            tset = ThresholdSet(k=k, z_conc=z_conc)
            raw = [(0.0, u_floor, BranchKind.GAIN), (u_floor, k, BranchKind.FLOOR),
                   (k, inf, BranchKind.ZERO)]
            return _finalize(f"{prefix}-III", raw, obj, tset)
        w_t0 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta, lift=lam)
        u_t0 = float(Up(w_t0))
        tset = ThresholdSet(k=k, z_conc=z_conc, z_tilde0=theta + w_t0)
        raw = [(0.0, u_t0, BranchKind.GAIN), (u_t0, inf, BranchKind.ZERO)]
        return _finalize(f"{prefix}-IV", raw, obj, tset)

    # floor < theta
    w_hat = _gain_tangent(obj, pivot=floor, anchor_value=-pen_theta_floor)
    u_hat = float(Up(w_hat))
    if k > u_hat:
        tset = ThresholdSet(k=k, z_conc=z_conc, z_hat=theta + w_hat)
        raw = [(0.0, u_hat, BranchKind.GAIN), (u_hat, k, BranchKind.FLOOR),
               (k, inf, BranchKind.ZERO)]
        return _finalize(f"{prefix}-V", raw, obj, tset)
    w_hat0 = _gain_tangent(obj, pivot=0.0, anchor_value=-pen_theta, lift=lam)
    u_hat0 = float(Up(w_hat0))
    tset = ThresholdSet(k=k, z_conc=z_conc, z_hat=theta + w_hat, z_hat0=theta + w_hat0)
    raw = [(0.0, u_hat0, BranchKind.GAIN), (u_hat0, inf, BranchKind.ZERO)]
    return _finalize(f"{prefix}-VI", raw, obj, tset)


def classify_and_solve(obj: LinearizedObjective) -> PiecewiseSolution:
    """Walk the case tree for the objective and return its branch table."""
    pair = obj.pair
    if obj.nu == 0.0:
        return _classify_concave_like(obj, 0.0, 0.0, "NoPenalty")
    if pair.shape is PenaltyShape.CONVEX:
        return _classify_convex(obj)
    nu = obj.nu
    pen_theta = nu * float(pair.penalty(obj.theta))
    pen_floor = nu * float(pair.penalty(obj.theta - obj.floor)) if obj.floor < obj.theta else 0.0
    return _classify_concave_like(obj, pen_theta, pen_floor, "Concave")


def thresholds(obj: LinearizedObjective) -> ThresholdSet:
    """Thresholds populated along the classifier path for this objective."""
    return classify_and_solve(obj).thresholds


def pointwise_opt(sol: PiecewiseSolution, y: float) -> float:
    """Optimizer x*(y) at a single price y > 0 from the branch table."""
    if y <= 0.0:
        raise ValueError("y must be positive")
    return sol.x_star(y)


def brute_force_oracle(obj: LinearizedObjective, y: float,
                       grid_step: float = 1e-4) -> float:
    """Grid argmax of f(x) - y*x over [0, x_max]; test oracle only.

    Candidates are a uniform grid of the given step near the origin, the
    problem points {0, floor, theta}, log-spaced points clustered at the kink
    x = theta (where the gain marginal blows up) and a log-spaced extension out
    to x_max = I1(y) + theta + 10 when that exceeds the uniform core. Nothing
    here depends on the branch-table construction.
    """
    if grid_step <= 0.0:
        raise ValueError("grid_step must be positive")
    theta, floor = obj.theta, obj.floor
    i1 = float(obj.pair.inv_reward_prime(y))
    x_max = i1 + theta + 10.0
    core_hi = min(x_max, max(20.0, 2.0 * max(theta, floor)))
    parts = [np.arange(0.0, core_hi + grid_step, grid_step)]
    if x_max > core_hi * (1.0 + 1e-12):
        n_tail = int(math.log(x_max / core_hi) * 1000.0) + 2
        parts.append(np.geomspace(core_hi, x_max, n_tail))
    span_hi = max(x_max - theta, theta)
    offsets = np.geomspace(1e-12, span_hi, int(920 * (12.0 + math.log10(span_hi + 1.0))))
    parts.append(theta + offsets[theta + offsets <= x_max])
    parts.append(np.clip(theta - offsets, 0.0, None))
    parts.append(np.array([0.0, theta, min(floor, x_max)]))
    cand = np.unique(np.concatenate(parts))
    cand = cand[(cand >= 0.0) & (cand <= x_max)]
    vals = obj.value(cand) - y * cand
    return float(cand[int(np.argmax(vals))])
