"""Expectation functionals under the lognormal kernel law and the nested
multiplier solve.

Three nested layers, innermost first:

  budget weight   beta  -- bisection on the budget functional R(beta), which is
                           non-increasing because the pointwise optimizer is
                           non-increasing in its price argument;
  floor weight    lam   -- complementary slackness for the floor-probability
                           constraint P(Z >= L) >= 1 - eps, via a geometric
                           grid scan, golden-section refinement of sup S when
                           needed, and bisection on S = 1 - eps;
  ratio weight    nu    -- outer bisection on the linearized value v(nu), which
                           is non-increasing and convex with a unique root.

Expectations are evaluated by breakpoint-split Gauss-Legendre panels (plain
Gauss-Hermite available behind the split flag); the floor probability is a
Gaussian CDF in closed form. Power-family integrands are evaluated in log
space, so extreme exponents cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .envelope import BranchKind, PiecewiseSolution, classify_and_solve
from .market import KernelLaw
from .preferences import LinearizedObjective, PreferencePair
from .rootfind import NumericalFailure

TOL_BUDGET = 1e-9   # relative, on |R - x_tilde0|
TOL_V = 1e-8        # absolute, on the linearized value at nu*
TOL_SLACK = 1e-8    # absolute, on lam * (S - (1 - eps)) and S target

_LOG_EXP_MIN = -745.0


class BudgetInfeasible(RuntimeError):
    """R(beta) never straddles the initial wealth on the bracket range."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Node budget and scheme for kernel-law expectations.

    ``split`` integrates Gauss-Legendre panels between branch breakpoints
    mapped into the Gaussian coordinate (piecewise-smooth integrands, no Gibbs
    loss); disabling it falls back to plain Gauss-Hermite with ``nodes`` nodes.
    """

    nodes: int = 400
    split: bool = True

    def __post_init__(self):
        if self.nodes < 64:
            raise ValueError("need at least 64 quadrature nodes")


@lru_cache(maxsize=16)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=8)
def _hermgauss(n: int):
    return np.polynomial.hermite.hermgauss(n)


class SolveVerdict(str, Enum):
    SOLVED = "solved"
    VAR_INFEASIBLE = "var_infeasible"
    BUDGET_INFEASIBLE = "budget_infeasible"


@dataclass(frozen=True)
class SolverResult:
    """Outcome of the full nested solve with diagnostic residuals."""

    verdict: SolveVerdict
    nu_star: float
    lambda_star: float
    beta_star: float
    case: str
    residual_v: float
    residual_budget: float
    s_prob: float
    var_slack: float
    ratio_gain_loss: float
    p_sup: Optional[float] = None
    solution: Optional[PiecewiseSolution] = None

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "nu_star": self.nu_star,
            "lambda_star": self.lambda_star,
            "beta_star": self.beta_star,
            "case": self.case,
            "residuals": {
                "v": self.residual_v,
                "budget": self.residual_budget,
                "var_slack": self.var_slack,
            },
            "s_prob": self.s_prob,
            "ratio_gain_loss": self.ratio_gain_loss,
            "p_sup": self.p_sup,
        }


# ---------------------------------------------------------------------------
# integrand terms
#
# In the Gaussian coordinate x (kernel H = exp(-a - x), x ~ N(0, var)) every
# power-family branch integrand is a signed sum of exp(ln_coef + slope*u) with
# u = -a - x, so each node evaluation is a single exp of a clipped log term.

def _branch_terms_budget(sol: PiecewiseSolution, beta: float):
    pair, obj = sol.pair, sol.objective
    g1, g2, A = pair.gamma1, pair.gamma2, pair.scale
    terms = []
    for br in sol.branches:
        t = []
        if br.kind is BranchKind.GAIN:
            a1 = 1.0 / (g1 - 1.0)
            t.append((a1 * math.log(beta / g1), 1.0 + a1, 1.0))
            t.append((math.log(obj.theta), 1.0, 1.0))
        elif br.kind is BranchKind.LOSS:
            a2 = 1.0 / (g2 - 1.0)
            t.append((math.log(obj.theta), 1.0, 1.0))
            t.append((a2 * math.log(beta / (obj.nu * A * g2)), 1.0 + a2, -1.0))
        elif br.kind is BranchKind.FLOOR and obj.floor > 0.0:
            t.append((math.log(obj.floor), 1.0, 1.0))
        terms.append(t)
    return terms


def _branch_terms_gain(sol: PiecewiseSolution, beta: float):
    """Terms of U((Z - theta)+) per branch."""
    pair, obj = sol.pair, sol.objective
    g1 = pair.gamma1
    terms = []
    for br in sol.branches:
        t = []
        if br.kind is BranchKind.GAIN:
            a1 = 1.0 / (g1 - 1.0)
            t.append((g1 * a1 * math.log(beta / g1), g1 * a1, 1.0))
        elif br.kind is BranchKind.FLOOR and obj.floor > obj.theta:
            t.append((math.log(float(pair.reward(obj.floor - obj.theta))), 0.0, 1.0))
        terms.append(t)
    return terms


def _branch_terms_loss(sol: PiecewiseSolution, beta: float):
    """Terms of D((theta - Z)+) per branch."""
    pair, obj = sol.pair, sol.objective
    g2, A = pair.gamma2, pair.scale
    terms = []
    for br in sol.branches:
        t = []
        if br.kind is BranchKind.LOSS:
            a2 = 1.0 / (g2 - 1.0)
            t.append((math.log(A) + g2 * a2 * math.log(beta / (obj.nu * A * g2)), g2 * a2, 1.0))
        elif br.kind is BranchKind.FLOOR and obj.floor < obj.theta:
            val = float(pair.penalty(obj.theta - obj.floor))
            if val > 0.0:
                t.append((math.log(val), 0.0, 1.0))
        elif br.kind is BranchKind.ZERO:
            val = float(pair.penalty(obj.theta))
            if val > 0.0:
                t.append((math.log(val), 0.0, 1.0))
        terms.append(t)
    return terms


def _eval_terms(terms: list, x: np.ndarray, a: float) -> np.ndarray:
    u = -a - x
    out = np.zeros_like(x)
    for ln_coef, slope, sign in terms:
        out += sign * np.exp(np.maximum(ln_coef + slope * u, _LOG_EXP_MIN))
    return out


def _mapped_break_x(law: KernelLaw, sol: PiecewiseSolution, beta: float) -> np.ndarray:
    """Branch boundaries in the Gaussian coordinate, one row per branch [lo, hi]."""
    log_beta = math.log(beta)
    xs = []
    for br in sol.branches:
        x_hi = math.inf if br.y_lo == 0.0 else log_beta - law.a - math.log(br.y_lo)
        x_lo = -math.inf if math.isinf(br.y_hi) else log_beta - law.a - math.log(br.y_hi)
        xs.append((x_lo, x_hi))
    return np.array(xs)


def _max_abs_slope(*term_groups) -> float:
    worst = 1.0
    for groups in term_groups:
        for branch_terms in groups:
            for _, slope, _ in branch_terms:
                worst = max(worst, abs(slope))
    return worst


def _split_expectation(law: KernelLaw, sol: PiecewiseSolution, beta: float,
                       q: QuadratureSpec, terms) -> float:
    sd = law.sd
    box = _max_abs_slope(terms) * law.var + 13.0 * sd
    sub_nodes = max(8, q.nodes // 16)
    nodes, weights = _leggauss(sub_nodes)
    bounds = _mapped_break_x(law, sol, beta)
    norm = 1.0 / math.sqrt(2.0 * math.pi * law.var)
    total = 0.0
    max_width = 0.5 * sd
    for (x_lo, x_hi), branch_terms in zip(bounds, terms):
        if not branch_terms:
            continue
        lo, hi = max(x_lo, -box), min(x_hi, box)
        if hi <= lo:
            continue
        n_sub = max(1, int(math.ceil((hi - lo) / max_width)))
        edges = np.linspace(lo, hi, n_sub + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        w = (half[:, None] * weights[None, :]).ravel()
        pdf = norm * np.exp(-0.5 * x * x / law.var)
        total += float(np.sum(w * pdf * _eval_terms(branch_terms, x, law.a)))
    return total


def _hermite_expectation(law: KernelLaw, sol: PiecewiseSolution, beta: float,
                         q: QuadratureSpec, terms) -> float:
    t, w = _hermgauss(q.nodes)
    x = math.sqrt(2.0 * law.var) * t
    weight = w / math.sqrt(math.pi)
    y = beta * np.exp(np.maximum(-law.a - x, _LOG_EXP_MIN))
    idx = np.searchsorted(sol.breakpoints, y, side="left")
    total = 0.0
    for j, branch_terms in enumerate(terms):
        if not branch_terms:
            continue
        mask = idx == j
        if np.any(mask):
            total += float(np.sum(weight[mask] * _eval_terms(branch_terms, x[mask], law.a)))
    return total


def _generic_expectation(law: KernelLaw, sol: PiecewiseSolution, beta: float,
                         q: QuadratureSpec, kind: str) -> float:
    """Quadrature for non-power pairs: direct branch-formula evaluation."""
    pair, obj = sol.pair, sol.objective
    sd = law.sd
    box = law.var + 13.0 * sd
    sub_nodes = max(8, q.nodes // 16)
    nodes, weights = _leggauss(sub_nodes)
    bounds = _mapped_break_x(law, sol, beta)
    norm = 1.0 / math.sqrt(2.0 * math.pi * law.var)
    total = 0.0
    for j, ((x_lo, x_hi), br) in enumerate(zip(bounds, sol.branches)):
        lo, hi = max(x_lo, -box), min(x_hi, box)
        if hi <= lo:
            continue
        n_sub = max(1, int(math.ceil((hi - lo) / (0.5 * sd))))
        edges = np.linspace(lo, hi, n_sub + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        w = (half[:, None] * weights[None, :]).ravel()
        pdf = norm * np.exp(-0.5 * x * x / law.var)
        h = np.exp(-law.a - x)
        y = beta * h
        if kind == "budget":
            vals = np.array([sol._branch_values(j, float(yi)) for yi in y]) * h
        elif kind == "gain":
            if br.kind is BranchKind.GAIN:
                vals = np.array([float(pair.reward(float(pair.inv_reward_prime(yi)))) for yi in y])
            elif br.kind is BranchKind.FLOOR and obj.floor > obj.theta:
                vals = np.full_like(x, float(pair.reward(obj.floor - obj.theta)))
            else:
                continue
        else:
            if br.kind is BranchKind.LOSS:
                vals = np.array([float(pair.penalty(float(pair.inv_penalty_prime(yi / obj.nu))))
                                 for yi in y])
            elif br.kind is BranchKind.FLOOR and obj.floor < obj.theta:
                vals = np.full_like(x, float(pair.penalty(obj.theta - obj.floor)))
            elif br.kind is BranchKind.ZERO:
                vals = np.full_like(x, float(pair.penalty(obj.theta)))
            else:
                continue
        total += float(np.sum(w * pdf * vals))
    return total


def budget_R(law: KernelLaw, sol: PiecewiseSolution, beta: float,
             q: QuadratureSpec = QuadratureSpec()) -> float:
    """E[H * x*(beta * H)]: cost of the optimal payoff at budget weight beta."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    if not sol.pair.is_power:
        return _generic_expectation(law, sol, beta, q, "budget")
    terms = _branch_terms_budget(sol, beta)
    if q.split:
        value = _split_expectation(law, sol, beta, q, terms)
    else:
        value = _hermite_expectation(law, sol, beta, q, terms)
    if not math.isfinite(value):
        raise NumericalFailure(f"budget functional non-finite at beta={beta}")
    return value


def var_S(law: KernelLaw, sol: PiecewiseSolution, beta: float) -> float:
    """P[x*(beta * H) >= floor], exact: the event is an initial price segment."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    y_floor = sol.floor_threshold_y(sol.objective.floor)
    if y_floor == 0.0:
        return 0.0
    if math.isinf(y_floor):
        return 1.0
    return float(ndtr((law.a + math.log(y_floor) - math.log(beta)) / law.sd))


def gain_loss_parts(law: KernelLaw, sol: PiecewiseSolution, beta: float,
                    q: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """(E[U((Z-theta)+)], E[D((theta-Z)+)]) at Z = x*(beta*H)."""
    if not sol.pair.is_power:
        return (_generic_expectation(law, sol, beta, q, "gain"),
                _generic_expectation(law, sol, beta, q, "loss"))
    gain_terms = _branch_terms_gain(sol, beta)
    loss_terms = _branch_terms_loss(sol, beta)
    if q.split:
        eu = _split_expectation(law, sol, beta, q, gain_terms)
        ed = _split_expectation(law, sol, beta, q, loss_terms)
    else:
        eu = _hermite_expectation(law, sol, beta, q, gain_terms)
        ed = _hermite_expectation(law, sol, beta, q, loss_terms)
    return eu, ed


def value_v(law: KernelLaw, sol: PiecewiseSolution, beta: float,
            q: QuadratureSpec = QuadratureSpec()) -> float:
    """Linearized objective value E[U((Z-theta)+)] - nu*E[D((theta-Z)+)]."""
    eu, ed = gain_loss_parts(law, sol, beta, q)
    return eu - sol.objective.nu * ed


def solve_beta(law: KernelLaw, sol: PiecewiseSolution, x_tilde0: float,
               q: QuadratureSpec = QuadratureSpec(), seed: float = 1.0) -> float:
    """Unique beta* with R(beta*) = x_tilde0, by monotone bisection.

    The bracket is grown geometrically from ``seed`` (warm-startable); failure
    to straddle x_tilde0 within [1e-16, 1e16] raises BudgetInfeasible.
    """
    if x_tilde0 <= 0.0:
        raise ValueError("x_tilde0 must be positive")
    resid = lambda b: budget_R(law, sol, b, q) - x_tilde0
    lo = hi = min(max(seed, 1e-16), 1e16)
    r = resid(lo)
    if r >= 0.0:
        while True:
            hi *= 8.0
            if hi > 1e16:
                raise BudgetInfeasible(f"R({hi / 8.0:g}) still above x_tilde0={x_tilde0:g}")
            if resid(hi) <= 0.0:
                break
            lo = hi
    else:
        while True:
            lo /= 8.0
            if lo < 1e-16:
                raise BudgetInfeasible(f"R({lo * 8.0:g}) still below x_tilde0={x_tilde0:g}")
            if resid(lo) >= 0.0:
                break
            hi = lo
    tol = TOL_BUDGET * x_tilde0
    for _ in range(300):
        mid = math.sqrt(lo * hi)
        r = resid(mid)
        if abs(r) <= tol:
            return mid
        if r > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    mid = math.sqrt(lo * hi)
    if abs(resid(mid)) <= tol:
        return mid
    raise NumericalFailure(f"budget bisection stalled at beta={mid} residual={resid(mid)}")


@dataclass(frozen=True)
class LambdaSolve:
    """Inner floor-weight solve at fixed nu."""

    lam: float
    beta: float
    solution: PiecewiseSolution
    s_prob: float
    verdict: SolveVerdict
    p_sup: Optional[float] = None


def _solve_at_lambda(law: KernelLaw, pair: PreferencePair, nu: float, lam: float,
                     theta: float, floor: float, x_tilde0: float,
                     q: QuadratureSpec, beta_seed: float) -> tuple[PiecewiseSolution, float, float]:
    obj = LinearizedObjective(pair=pair, nu=nu, lam=lam, theta=theta, floor=floor)
    sol = classify_and_solve(obj)
    beta = solve_beta(law, sol, x_tilde0, q, seed=beta_seed)
    return sol, beta, var_S(law, sol, beta)


def solve_lambda(law: KernelLaw, pair: PreferencePair, nu: float, theta: float,
                 floor: float, x_tilde0: float, epsilon: float,
                 q: QuadratureSpec = QuadratureSpec()) -> LambdaSolve:
    """Floor weight lam* and budget weight beta* at fixed nu.

    If the unconstrained solution already meets the floor probability, lam* = 0.
    Otherwise S(lam, B(lam)) is scanned on a 60-point geometric grid; the first
    crossing gives a bisection bracket for S = 1 - eps, and when no crossing
    exists sup S is refined by golden section to report the achievable maximum.
    """
    target = 1.0 - epsilon
    sol0, b0, s0 = _solve_at_lambda(law, pair, nu, 0.0, theta, floor, x_tilde0, q, 1.0)
    if s0 >= target - 1e-12:
        return LambdaSolve(0.0, b0, sol0, s0, SolveVerdict.SOLVED)

    def s_at(lam: float, seed: float) -> tuple[PiecewiseSolution, float, float]:
        return _solve_at_lambda(law, pair, nu, lam, theta, floor, x_tilde0, q, seed)

    grid = np.geomspace(1e-6, 1e6, 60)
    prev_lam, seed = 0.0, b0
    scanned: list[tuple[float, float]] = [(0.0, s0)]
    bracket = None
    for lam_g in grid:
        _, beta_g, s_g = s_at(float(lam_g), seed)
        seed = beta_g
        scanned.append((float(lam_g), s_g))
        if s_g >= target:
            bracket = (prev_lam, float(lam_g))
            break
        prev_lam = float(lam_g)
    p_sup = None
    if bracket is None:
        lams = np.array([p[0] for p in scanned])
        svals = np.array([p[1] for p in scanned])
        i_best = int(np.argmax(svals))
        lo = lams[max(i_best - 1, 0)]
        hi = lams[min(i_best + 1, len(lams) - 1)]
        lo = max(lo, 1e-9)
        p_sup = float(svals[i_best])
        lam_best = float(lams[i_best])
        # golden-section refinement of sup S on [lo, hi] in log space
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        a_log, b_log = math.log(lo), math.log(max(hi, lo * (1.0 + 1e-9)))
        c = b_log - invphi * (b_log - a_log)
        d = a_log + invphi * (b_log - a_log)
        _, _, fc = s_at(math.exp(c), seed)
        _, _, fd = s_at(math.exp(d), seed)
        for _ in range(48):
            if fc > fd:
                b_log, d, fd = d, c, fc
                c = b_log - invphi * (b_log - a_log)
                _, _, fc = s_at(math.exp(c), seed)
                cand_lam, cand_s = math.exp(c), fc
            else:
                a_log, c, fc = c, d, fd
                d = a_log + invphi * (b_log - a_log)
                _, _, fd = s_at(math.exp(d), seed)
                cand_lam, cand_s = math.exp(d), fd
            if cand_s > p_sup:
                p_sup, lam_best = cand_s, cand_lam
            if b_log - a_log < 1e-10:
                break
        if p_sup < target:
            sol_b, beta_b, s_b = s_at(lam_best, seed) if lam_best > 0 else (sol0, b0, s0)
            return LambdaSolve(lam_best, beta_b, sol_b, s_b,
                               SolveVerdict.VAR_INFEASIBLE, p_sup=p_sup)
        bracket = (prev_lam if prev_lam < lam_best else 0.0, lam_best)

    lo, hi = bracket
    lo = max(lo, 0.0)
    sol_hi, beta_hi, s_hi = s_at(hi, seed)
    best = (hi, beta_hi, sol_hi, s_hi)
    for _ in range(200):
        # geometric descent while the lower end is still pinned at lam = 0
        mid = 0.5 * (lo + hi) if lo > 0.0 else max(hi / 8.0, 1e-300)
        sol_m, beta_m, s_m = s_at(mid, seed)
        seed = beta_m
        if abs(s_m - target) <= TOL_SLACK:
            return LambdaSolve(mid, beta_m, sol_m, s_m, SolveVerdict.SOLVED)
        if s_m >= target:
            hi = mid
            best = (mid, beta_m, sol_m, s_m)
        else:
            lo = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    lam_b, beta_b, sol_b, s_b = best
    if s_b >= target - TOL_SLACK:
        # S jumped across the target within a vanishing lam interval; the
        # constraint holds with the smallest lam on the feasible side
        return LambdaSolve(lam_b, beta_b, sol_b, s_b, SolveVerdict.SOLVED)
    return LambdaSolve(lam_b, beta_b, sol_b, s_b, SolveVerdict.VAR_INFEASIBLE,
                       p_sup=p_sup if p_sup is not None else s_b)


def solve_nu(law: KernelLaw, pair: PreferencePair, x_tilde0: float, theta: float,
             floor: float, epsilon: float,
             q: QuadratureSpec = QuadratureSpec()) -> SolverResult:
    """Full nested solve: outer bisection of v(nu) to its unique root.

    v is non-increasing and convex with v(0) > 0 and v -> -inf, so sign
    bisection from the bracket [0, nu_hi] is valid; nu_hi is found by doubling.
    The returned nu* is the attained gain-loss ratio of the problem.
    """
    def eval_at(nu: float) -> tuple[float, LambdaSolve, float, float]:
        inner = solve_lambda(law, pair, nu, theta, floor, x_tilde0, epsilon, q)
        if inner.verdict is not SolveVerdict.SOLVED:
            return math.nan, inner, math.nan, math.nan
        eu, ed = gain_loss_parts(law, inner.solution, inner.beta, q)
        return eu - nu * ed, inner, eu, ed

    def result_from(nu: float, v: float, inner: LambdaSolve, eu: float, ed: float,
                    verdict: SolveVerdict) -> SolverResult:
        r = budget_R(law, inner.solution, inner.beta, q)
        return SolverResult(
            verdict=verdict,
            nu_star=nu, lambda_star=inner.lam, beta_star=inner.beta,
            case=inner.solution.case,
            residual_v=v,
            residual_budget=abs(r - x_tilde0),
            s_prob=inner.s_prob,
            var_slack=inner.lam * (inner.s_prob - (1.0 - epsilon)),
            ratio_gain_loss=eu / ed if ed > 0.0 else math.inf,
            p_sup=inner.p_sup,
            solution=inner.solution,
        )

    lo, hi = 0.0, 1.0
    try:
        v_hi, inner_hi, eu_hi, ed_hi = eval_at(hi)
    except BudgetInfeasible:
        return SolverResult(SolveVerdict.BUDGET_INFEASIBLE, math.nan, math.nan, math.nan,
                            "", math.nan, math.nan, math.nan, math.nan, math.nan)
    if inner_hi.verdict is not SolveVerdict.SOLVED:
        return result_from(hi, math.nan, inner_hi, math.nan, math.nan, inner_hi.verdict)
    while v_hi > 0.0:
        lo = hi
        hi *= 2.0
        if hi > 1e6:
            raise NumericalFailure("no sign change of v(nu) below nu = 1e6")
        v_hi, inner_hi, eu_hi, ed_hi = eval_at(hi)
        if inner_hi.verdict is not SolveVerdict.SOLVED:
            return result_from(hi, math.nan, inner_hi, math.nan, math.nan, inner_hi.verdict)
    if abs(v_hi) <= TOL_V:
        return result_from(hi, v_hi, inner_hi, eu_hi, ed_hi, SolveVerdict.SOLVED)
    best = (hi, v_hi, inner_hi, eu_hi, ed_hi)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        v_m, inner_m, eu_m, ed_m = eval_at(mid)
        if inner_m.verdict is not SolveVerdict.SOLVED:
            return result_from(mid, math.nan, inner_m, math.nan, math.nan, inner_m.verdict)
        if abs(v_m) <= TOL_V:
            return result_from(mid, v_m, inner_m, eu_m, ed_m, SolveVerdict.SOLVED)
        if v_m > 0.0:
            lo = mid
        else:
            hi = mid
            best = (mid, v_m, inner_m, eu_m, ed_m)
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    nu_b, v_b, inner_b, eu_b, ed_b = best
    raise NumericalFailure(f"nu bisection stalled at nu={nu_b} with v={v_b}")


def diagnostic_eval(law: KernelLaw, pair: PreferencePair, theta: float, floor: float,
                    nu: float, lam: float, beta: float,
                    q: QuadratureSpec = QuadratureSpec()) -> dict:
    """Evaluate R, S, v and the case label at a user-supplied multiplier triple.

    Exploration aid for infeasible configurations; makes no optimality claim.
    """
    obj = LinearizedObjective(pair=pair, nu=nu, lam=lam, theta=theta, floor=floor)
    sol = classify_and_solve(obj)
    eu, ed = gain_loss_parts(law, sol, beta, q)
    return {
        "nu": nu, "lam": lam, "beta": beta,
        "case": sol.case,
        "budget_R": budget_R(law, sol, beta, q),
        "var_S": var_S(law, sol, beta),
        "gain_part": eu, "loss_part": ed,
        "value_v": eu - nu * ed,
    }


def mc_estimates(law: KernelLaw, sol: PiecewiseSolution, beta: float,
                 n_paths: int, seed: int, batch: int = 1 << 20) -> dict:
    """Monte Carlo cross-check of R, S and the gain/loss parts.

    Fixed batch size and sequential reduction keep the result independent of
    any parallel execution of other scenarios; per-branch evaluation avoids
    the absolute-coordinate rounding of x* near theta.
    """
    pair, obj = sol.pair, sol.objective
    rng = np.random.default_rng(seed)
    sums = {k: 0.0 for k in ("R", "R2", "S", "EU", "EU2", "ED", "ED2", "V", "V2")}
    done = 0
    breaks = sol.breakpoints
    while done < n_paths:
        m = min(batch, n_paths - done)
        x = rng.normal(0.0, law.sd, size=m)
        h = np.exp(-law.a - x)
        y = beta * h
        idx = np.searchsorted(breaks, y, side="left")
        z_cost = np.zeros(m)
        gain = np.zeros(m)
        loss = np.zeros(m)
        above = np.zeros(m, dtype=bool)
        for j, br in enumerate(sol.branches):
            mask = idx == j
            if not np.any(mask):
                continue
            if br.kind is BranchKind.GAIN:
                i1 = np.asarray(pair.inv_reward_prime(y[mask]), dtype=float)
                z_cost[mask] = h[mask] * (i1 + obj.theta)
                gain[mask] = np.asarray(pair.reward(i1), dtype=float)
                above[mask] = i1 + obj.theta >= obj.floor
            elif br.kind is BranchKind.LOSS:
                i2 = np.asarray(pair.inv_penalty_prime(y[mask] / obj.nu), dtype=float)
                z_cost[mask] = h[mask] * (obj.theta - i2)
                loss[mask] = np.asarray(pair.penalty(i2), dtype=float)
                above[mask] = obj.theta - i2 >= obj.floor
            elif br.kind is BranchKind.FLOOR:
                z_cost[mask] = h[mask] * obj.floor
                if obj.floor > obj.theta:
                    gain[mask] = float(pair.reward(obj.floor - obj.theta))
                elif obj.floor < obj.theta:
                    loss[mask] = float(pair.penalty(obj.theta - obj.floor))
                above[mask] = True
            else:
                loss[mask] = float(pair.penalty(obj.theta))
                above[mask] = obj.floor <= 0.0
        v = gain - obj.nu * loss
        sums["R"] += float(z_cost.sum()); sums["R2"] += float((z_cost ** 2).sum())
        sums["S"] += float(above.sum())
        sums["EU"] += float(gain.sum()); sums["EU2"] += float((gain ** 2).sum())
        sums["ED"] += float(loss.sum()); sums["ED2"] += float((loss ** 2).sum())
        sums["V"] += float(v.sum()); sums["V2"] += float((v ** 2).sum())
        done += m

    def stat(key: str) -> tuple[float, float]:
        mean = sums[key] / n_paths
        var = max(sums[key + "2"] / n_paths - mean * mean, 0.0)
        return mean, math.sqrt(var / n_paths)

    s_mean = sums["S"] / n_paths
    return {
        "R": stat("R"),
        "S": (s_mean, math.sqrt(max(s_mean * (1.0 - s_mean), 0.0) / n_paths)),
        "EU": stat("EU"),
        "ED": stat("ED"),
        "v": stat("V"),
        "n": n_paths,
    }
