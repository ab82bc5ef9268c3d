"""Safeguarded scalar root finding for threshold and multiplier equations.

Every residual solved in this package is strictly monotone on its bracket, so
plain bisection is enough and keeps the solvers deterministic (no derivative
estimates, no history-dependent secant steps).
"""

from __future__ import annotations

import math
from typing import Callable


class BracketError(RuntimeError):
    """A sign-changing bracket could not be established."""


class NumericalFailure(RuntimeError):
    """An iteration failed to reach its tolerance or produced non-finite values."""


_EPS = 2.220446049250313e-16


def bisect(fn: Callable[[float], float], lo: float, hi: float,
           *, xtol: float = 1e-10, max_iter: int = 200) -> float:
    """Bisection root of ``fn`` on [lo, hi]; endpoint signs must differ.

    Terminates when the bracket width falls below ``xtol`` (absolute, with a
    floating-point relative floor so wide-magnitude brackets still converge).
    """
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.isnan(flo) or math.isnan(fhi):
        raise NumericalFailure(f"non-finite residual at bracket ends: f({lo})={flo}, f({hi})={fhi}")
    if (flo > 0.0) == (fhi > 0.0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if math.isnan(fmid):
            raise NumericalFailure(f"non-finite residual at x={mid}")
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= max(xtol, 8.0 * _EPS * abs(mid)):
            break
    return 0.5 * (lo + hi)


def bisect_geometric(fn: Callable[[float], float], lo: float, hi: float,
                     *, rel_tol: float = 1e-14, max_iter: int = 200) -> float:
    """Bisection in log-space for roots on (0, inf) whose magnitude is unknown
    by hundreds of decades (tangency offsets can underflow toward 0)."""
    if not (0.0 < lo < hi):
        raise ValueError(f"need 0 < lo < hi, got [{lo}, {hi}]")
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if math.isnan(fmid):
            raise NumericalFailure(f"non-finite residual at x={mid}")
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        if hi - lo <= rel_tol * hi:
            break
    return math.sqrt(lo * hi)


def bracket_decreasing(fn: Callable[[float], float], seed: float = 1.0,
                       *, lo_cap: float = 1e-12, hi_cap: float = 1e12,
                       factor: float = 8.0) -> tuple[float, float]:
    """Geometric bracket for a decreasing ``fn``: fn(lo) >= 0 >= fn(hi).

    Expands from ``seed`` by ``factor`` until the sign change is straddled or a
    cap is hit, in which case the caller's residual has no root in range.
    """
    lo = hi = seed
    f_seed = fn(seed)
    if f_seed >= 0.0:
        while True:
            hi *= factor
            if hi > hi_cap:
                raise BracketError(f"decreasing residual still {fn(hi / factor)} at cap {hi_cap}")
            if fn(hi) <= 0.0:
                return lo, hi
            lo = hi
    else:
        while True:
            lo /= factor
            if lo < lo_cap:
                raise BracketError(f"decreasing residual still {fn(lo * factor)} at cap {lo_cap}")
            if fn(lo) >= 0.0:
                return lo, hi
            hi = lo


def solve_decreasing(fn: Callable[[float], float], seed: float = 1.0,
                     *, lo_cap: float = 1e-12, hi_cap: float = 1e12,
                     xtol: float = 1e-10, max_iter: int = 200) -> float:
    """Root of a strictly decreasing residual on (0, inf), bracket found by expansion."""
    lo, hi = bracket_decreasing(fn, seed, lo_cap=lo_cap, hi_cap=hi_cap)
    return bisect(fn, lo, hi, xtol=xtol, max_iter=max_iter)
