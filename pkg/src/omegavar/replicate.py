"""Closed-form wealth and strategy replication for the power family, plus the
hedged-SDE simulation oracle that verifies them.

The optimal payoff is a sum of atoms g * H(T)**alpha + b supported on kernel
intervals [h_lo, h_hi); conditioning on H(t) gives the wealth process and its
kernel sensitivity (the Psi aggregate) in terms of the normal CDF, and matching
diffusions gives the nominal positions in the indexed bond and the stock.

The bond-position formula is implemented in two variants: ``stock_vol``
divides the bracket by the stock's inflation loading (the printed form) and
``inflation_vol`` divides by the index volatility (the form implied by
diffusion matching). The simulation oracle adjudicates which one replicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .envelope import BranchKind, PiecewiseSolution
from .market import KernelLaw, MarketParams, contribution_annuity, forward_transform, rate_at, rate_integral
from .preferences import LinearizedObjective

PI_P_VARIANTS = ("stock_vol", "inflation_vol")

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


@dataclass(frozen=True)
class PayoffAtom:
    """One power term of the terminal payoff, active when H(T) is in [h_lo, h_hi).

    Intervals are in kernel units (the budget weight is absorbed into ``g``),
    so an atom set is self-contained: payoff(H) = sum (g*H**alpha + b) over
    active atoms.
    """

    g: float
    alpha: float
    b: float
    h_lo: float
    h_hi: float
    kind: BranchKind


def atoms_from_solution(sol: PiecewiseSolution, beta_star: float) -> tuple[PayoffAtom, ...]:
    """Convert the branch table at budget weight beta* into payoff atoms."""
    pair, obj = sol.pair, sol.objective
    if not pair.is_power:
        raise ValueError("closed-form replication requires the power preference family")
    if beta_star <= 0.0:
        raise ValueError("beta_star must be positive")
    g1, g2, A = pair.gamma1, pair.gamma2, pair.scale
    atoms = []
    for br in sol.branches:
        h_lo = br.y_lo / beta_star
        h_hi = br.y_hi / beta_star
        if br.kind is BranchKind.GAIN:
            a1 = 1.0 / (g1 - 1.0)
            atoms.append(PayoffAtom(g=(beta_star / g1) ** a1, alpha=a1, b=obj.theta,
                                    h_lo=h_lo, h_hi=h_hi, kind=br.kind))
        elif br.kind is BranchKind.LOSS:
            a2 = 1.0 / (g2 - 1.0)
            atoms.append(PayoffAtom(g=-((beta_star / (obj.nu * A * g2)) ** a2), alpha=a2,
                                    b=obj.theta, h_lo=h_lo, h_hi=h_hi, kind=br.kind))
        elif br.kind is BranchKind.FLOOR:
            atoms.append(PayoffAtom(g=0.0, alpha=0.0, b=obj.floor,
                                    h_lo=h_lo, h_hi=h_hi, kind=br.kind))
        else:
            atoms.append(PayoffAtom(g=0.0, alpha=0.0, b=0.0,
                                    h_lo=h_lo, h_hi=h_hi, kind=br.kind))
    return tuple(atoms)


def payoff_at(atoms: Sequence[PayoffAtom], h):
    """Terminal payoff at kernel value(s) h; atoms partition (0, inf)."""
    h_arr = np.asarray(h, dtype=float)
    edges = np.array([a.h_lo for a in atoms[1:]])
    idx = np.searchsorted(edges, h_arr, side="right")
    out = np.zeros_like(h_arr)
    for j, atom in enumerate(atoms):
        mask = idx == j
        if np.any(mask):
            if atom.g != 0.0:
                out[mask] = atom.g * np.power(h_arr[mask], atom.alpha) + atom.b
            else:
                out[mask] = atom.b
    return float(out) if np.isscalar(h) else out


def _time_factors(law: KernelLaw, market: MarketParams, t: float) -> tuple[float, float]:
    """(R(t), Sigma(t)): residual log-discount and residual kernel variance."""
    T = market.horizon
    if not 0.0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    r_t = -rate_integral(market.r_real, t, T)
    sigma2_t = law.var * (T - t) / T
    return r_t, sigma2_t


def _atom_bounds(atom: PayoffAtom, log_h, r_t: float, sigma2_t: float):
    sd = math.sqrt(sigma2_t)
    lo = (-np.inf if atom.h_lo == 0.0
          else (math.log(atom.h_lo) - log_h + 0.5 * sigma2_t - r_t) / sd)
    hi = (np.inf if math.isinf(atom.h_hi)
          else (math.log(atom.h_hi) - log_h + 0.5 * sigma2_t - r_t) / sd)
    return lo, hi


def wealth_t(atoms: Sequence[PayoffAtom], law: KernelLaw, market: MarketParams,
             t: float, h_t):
    """Replicating real wealth at time t given kernel value(s) H(t) = h_t."""
    T = market.horizon
    if T - t < 1e-8:
        return payoff_at(atoms, h_t)
    h_arr = np.asarray(h_t, dtype=float)
    if np.any(h_arr <= 0.0):
        raise ValueError("kernel values must be positive")
    r_t, sigma2_t = _time_factors(law, market, t)
    sd = math.sqrt(sigma2_t)
    log_h = np.log(h_arr)
    total = np.zeros_like(h_arr)
    for atom in atoms:
        if atom.g == 0.0 and atom.b == 0.0:
            continue
        b1, b2 = _atom_bounds(atom, log_h, r_t, sigma2_t)
        if atom.g != 0.0:
            a = atom.alpha
            scale = math.exp((a + 1.0) * r_t + 0.5 * a * (a + 1.0) * sigma2_t)
            total += (atom.g * np.exp(a * log_h) * scale
                      * (ndtr(b2 - (a + 1.0) * sd) - ndtr(b1 - (a + 1.0) * sd)))
        if atom.b != 0.0:
            total += atom.b * math.exp(r_t) * (ndtr(b2 - sd) - ndtr(b1 - sd))
    return float(total) if np.isscalar(h_t) else total


def psi(atom: PayoffAtom, law: KernelLaw, market: MarketParams, t: float, h_t):
    """Kernel-sensitivity contribution of one atom:
    -H(t) * d/dH(t) of its conditional-value term."""
    T = market.horizon
    if T - t < 1e-8:
        raise ValueError("psi is undefined at maturity; use the payoff directly")
    h_arr = np.asarray(h_t, dtype=float)
    r_t, sigma2_t = _time_factors(law, market, t)
    sd = math.sqrt(sigma2_t)
    log_h = np.log(h_arr)
    b1, b2 = _atom_bounds(atom, log_h, r_t, sigma2_t)
    total = np.zeros_like(h_arr)
    if atom.g != 0.0:
        a = atom.alpha
        scale = math.exp((a + 1.0) * r_t + 0.5 * a * (a + 1.0) * sigma2_t)
        shift = (a + 1.0) * sd
        total += (atom.g * np.exp(a * log_h) * scale
                  * (a * (ndtr(b1 - shift) - ndtr(b2 - shift))
                     + (_phi(b2 - shift) - _phi(b1 - shift)) / sd))
    if atom.b != 0.0:
        total += atom.b * math.exp(r_t) * (_phi(b2 - sd) - _phi(b1 - sd)) / sd
    return float(total) if np.isscalar(h_t) else total


def psi_total(atoms: Sequence[PayoffAtom], law: KernelLaw, market: MarketParams,
              t: float, h_t):
    """Aggregate kernel sensitivity driving the replicating diffusion."""
    h_arr = np.asarray(h_t, dtype=float)
    total = np.zeros_like(h_arr)
    for atom in atoms:
        if atom.g == 0.0 and atom.b == 0.0:
            continue
        total += psi(atom, law, market, t, h_arr)
    return float(total) if np.isscalar(h_t) else total


def strategy(atoms: Sequence[PayoffAtom], law: KernelLaw, market: MarketParams,
             t: float, h_t, i_t, f_t, x_tilde_t,
             variant: str = "stock_vol"):
    """Nominal positions (bond, stock) replicating the payoff at time t.

    ``variant`` selects the bond-position divisor: "stock_vol" is the printed
    form (divide by sigma_s1), "inflation_vol" the diffusion-matched form
    (divide by sigma_i).
    """
    if variant not in PI_P_VARIANTS:
        raise ValueError(f"unknown pi_p variant {variant!r}")
    if market.sigma_s2 <= 0.0 or market.sigma_i <= 0.0:
        raise ValueError("volatilities must be non-zero for replication")
    if variant == "stock_vol" and market.sigma_s1 == 0.0:
        raise ValueError("the printed bond formula divides by sigma_s1, which is zero here")
    psi_sum = psi_total(atoms, law, market, t, h_t)
    pi_s = (market.lambda_s * i_t * psi_sum - market.sigma_c2 * f_t) / market.sigma_s2
    bracket = ((market.lambda_i - market.sigma_i) * i_t * psi_sum
               + market.sigma_i * i_t * x_tilde_t
               - market.sigma_s1 * pi_s - market.sigma_c1 * f_t)
    divisor = market.sigma_s1 if variant == "stock_vol" else market.sigma_i
    return bracket / divisor, pi_s


@dataclass(frozen=True)
class HedgePlan:
    """Replication inputs: payoff atoms, the kernel law and the bond-formula variant."""

    atoms: tuple[PayoffAtom, ...]
    law: KernelLaw
    variant: str = "stock_vol"


@dataclass(frozen=True)
class PathStats:
    """Terminal statistics of the hedged-SDE simulation."""

    terminal_wealth: np.ndarray
    target_payoff: np.ndarray
    rms_rel_error: float
    p_floor: Optional[float]
    ratio_gain_loss: Optional[float]
    n_paths: int
    n_steps: int


AuxPolicy = Callable[[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray],
                     tuple[np.ndarray, np.ndarray]]


def simulate_paths(market: MarketParams, plan: Optional[HedgePlan], n_paths: int,
                   n_steps: int, seed: int,
                   objective: Optional[LinearizedObjective] = None,
                   policy: Optional[AuxPolicy] = None) -> PathStats:
    """Euler simulation of the hedged auxiliary wealth under the two factors.

    The kernel, index and contribution follow exact lognormal per-step updates;
    only the hedged wealth is Euler-discretized, so the oracle carries no
    avoidable bias. ``policy`` overrides the closed-form strategy chain and
    maps (t, H, I, F, X_aux) to the two auxiliary diffusion loadings directly.
    """
    if n_paths < 1 or n_steps < 1:
        raise ValueError("n_paths and n_steps must be at least 1")
    if plan is None and policy is None:
        raise ValueError("either a hedge plan or an explicit policy is required")
    T = market.horizon
    dt = T / n_steps
    rng = np.random.default_rng(seed)
    sig_h2 = ((market.lambda_i - market.sigma_i) ** 2 + market.lambda_s ** 2)
    lam_i, lam_s, sig_i = market.lambda_i, market.lambda_s, market.sigma_i

    ln_h = np.zeros(n_paths)
    ln_i = np.full(n_paths, math.log(market.i0))
    ln_c = (np.full(n_paths, math.log(market.c0)) if market.c0 > 0.0
            else np.full(n_paths, -np.inf))
    annuity_unit = np.array([contribution_annuity(market, k * dt, 1.0)
                             for k in range(n_steps + 1)])
    x_aux = np.full(n_paths, (market.x0 + market.c0 * annuity_unit[0]) / market.i0)

    sqrt_dt = math.sqrt(dt)
    for k in range(n_steps):
        t = k * dt
        r_n, r_r = rate_at(market.r_nominal, t), rate_at(market.r_real, t)
        h = np.exp(ln_h)
        i_lvl = np.exp(ln_i)
        f_val = np.where(np.isfinite(ln_c), np.exp(ln_c) * annuity_unit[k], 0.0)
        if policy is not None:
            u1, u2 = policy(t, h, i_lvl, f_val, x_aux)
        else:
            pi_p, pi_s = strategy(plan.atoms, plan.law, market, t, h, i_lvl, f_val,
                                  x_aux, variant=plan.variant)
            x_nom = i_lvl * x_aux - f_val
            aux_p, aux_s = forward_transform_vec(market, i_lvl, f_val, x_nom, pi_p, pi_s)
            u1 = aux_p * sig_i + aux_s * market.sigma_s1
            u2 = aux_s * market.sigma_s2
        dw_i = rng.normal(0.0, sqrt_dt, n_paths)
        dw_s = rng.normal(0.0, sqrt_dt, n_paths)
        x_aux = (x_aux + (r_r * x_aux + u1 * (lam_i - sig_i) + u2 * lam_s) * dt
                 + u1 * dw_i + u2 * dw_s)
        ln_h += (-r_r - 0.5 * sig_h2) * dt - (lam_i - sig_i) * dw_i - lam_s * dw_s
        ln_i += (r_n - r_r + sig_i * lam_i - 0.5 * sig_i ** 2) * dt + sig_i * dw_i
        if market.c0 > 0.0:
            ln_c += ((market.mu_c - 0.5 * (market.sigma_c1 ** 2 + market.sigma_c2 ** 2)) * dt
                     + market.sigma_c1 * dw_i + market.sigma_c2 * dw_s)

    h_term = np.exp(ln_h)
    if plan is not None:
        target = payoff_at(plan.atoms, h_term)
        denom = math.sqrt(float(np.mean(np.square(target)))) or 1.0
        rms = math.sqrt(float(np.mean(np.square(x_aux - target)))) / denom
    else:
        target = np.full(n_paths, np.nan)
        rms = math.nan
    p_floor = ratio = None
    if objective is not None:
        p_floor = float(np.mean(x_aux >= objective.floor))
        clipped = np.clip(x_aux, 0.0, None)
        gains = np.where(clipped > objective.theta, clipped - objective.theta, 0.0)
        losses = np.where(clipped < objective.theta, objective.theta - clipped, 0.0)
        eu = float(np.mean(objective.pair.reward(gains)))
        ed = float(np.mean(objective.pair.penalty(losses)))
        ratio = eu / ed if ed > 0.0 else math.inf
    return PathStats(terminal_wealth=x_aux, target_payoff=target, rms_rel_error=rms,
                     p_floor=p_floor, ratio_gain_loss=ratio,
                     n_paths=n_paths, n_steps=n_steps)


def forward_transform_vec(market: MarketParams, i_t, f_t, x_t, pi_p, pi_s):
    """Vectorized auxiliary-position transform (same algebra as the scalar one)."""
    pi_s_aux = (pi_s * market.sigma_s2 + market.sigma_c2 * f_t) / (i_t * market.sigma_s2)
    agg = (pi_p * market.sigma_i + pi_s * market.sigma_s1 + market.sigma_c1 * f_t
           - market.sigma_i * (x_t + f_t)) / i_t
    pi_p_aux = (agg - pi_s_aux * market.sigma_s1) / market.sigma_i
    return pi_p_aux, pi_s_aux


def martingale_check(atoms: Sequence[PayoffAtom], law: KernelLaw, market: MarketParams,
                     t: float, n_samples: int, seed: int) -> tuple[float, float]:
    """(mean, standard error) of H(t) * wealth_t over sampled kernel values.

    The deflated replicating wealth is a martingale, so the mean must equal the
    time-zero wealth within sampling error.
    """
    rng = np.random.default_rng(seed)
    sig_h2 = law.var / market.horizon
    mean_ln = -rate_integral(market.r_real, 0.0, t) - 0.5 * sig_h2 * t
    ln_h = rng.normal(mean_ln, math.sqrt(sig_h2 * t), n_samples)
    h = np.exp(ln_h)
    vals = h * wealth_t(atoms, law, market, t, h)
    return float(np.mean(vals)), float(np.std(vals) / math.sqrt(n_samples))


def strategy_timeseries(plan: HedgePlan, market: MarketParams,
                        objective: Optional[LinearizedObjective] = None,
                        n_points: int = 81) -> list[dict]:
    """Deterministic median-path time series of wealth and positions (CSV rows)."""
    T = market.horizon
    sig_h2 = plan.law.var / T
    rows = []
    for k in range(n_points):
        t = T * k / n_points  # strictly before maturity; psi degenerates at T
        h = math.exp(-rate_integral(market.r_real, 0.0, t) - 0.5 * sig_h2 * t)
        i_lvl = market.i0 * math.exp(
            (rate_integral(market.r_nominal, 0.0, t) - rate_integral(market.r_real, 0.0, t))
            + market.sigma_i * market.lambda_i * t - 0.5 * market.sigma_i ** 2 * t)
        c_med = market.c0 * math.exp(
            (market.mu_c - 0.5 * (market.sigma_c1 ** 2 + market.sigma_c2 ** 2)) * t)
        f_val = contribution_annuity(market, t, c_med)
        x_tilde = float(wealth_t(plan.atoms, plan.law, market, t, h))
        pi_p, pi_s = strategy(plan.atoms, plan.law, market, t, h, i_lvl, f_val,
                              x_tilde, variant=plan.variant)
        rows.append({"t": t, "kernel": h, "wealth_real": x_tilde,
                     "pi_bond": float(pi_p), "pi_stock": float(pi_s)})
    return rows
