"""Scenario ingestion, pipeline orchestration and artifact emission.

A scenario is a JSON document (schema in the README): market block, preference
block, objective block (reference level, floor, tail probability), optional
quadrature overrides, optional rescaling directive, optional sweep axis and
optional diagnostic multiplier triples.

Subcommands: ``solve`` runs one scenario, ``sweep`` runs the configured axis
with a common feasibility rescaling, ``compare`` runs the no-floor-constraint
mode against the pinned-ratio mode. Exit codes: 0 solved, 2 infeasibility
reported, 3 numerical failure. All artifacts are byte-deterministic: reruns
with the same config and seed reproduce them exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .envelope import classify_and_solve, PiecewiseSolution
from .market import (Feasibility, FeasibilityReport, KernelLaw, MarketParams,
                     auxiliary_initial, feasibility, kernel_law)
from .multipliers import (QuadratureSpec, SolveVerdict, SolverResult, TOL_BUDGET,
                          TOL_SLACK, TOL_V, BudgetInfeasible, diagnostic_eval,
                          solve_lambda, solve_nu)
from .preferences import LinearizedObjective, PreferencePair
from .replicate import HedgePlan, atoms_from_solution, strategy_timeseries
from .rootfind import NumericalFailure

EXIT_SOLVED = 0
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

SWEEPABLE = ("theta", "floor", "epsilon", "gamma1", "gamma2", "scale")


class ConfigError(ValueError):
    """Configuration document failed validation; message carries the field path."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully resolved scenario plus optional sweep axis and outputs."""

    market: MarketParams
    gamma1: float
    gamma2: float
    scale: float
    theta: float
    floor: float
    epsilon: float
    quadrature: QuadratureSpec = QuadratureSpec()
    rescale: Optional[object] = None      # None | numeric scale | "auto[:frac]"
    sweep_parameter: Optional[str] = None
    sweep_values: tuple = ()
    pi_p_variant: str = "stock_vol"
    diagnostic_triples: tuple = ()
    seed: int = 0
    curve_points: int = 1000
    curve_spread: float = 4.0
    outdir: Optional[str] = None

    def pair(self) -> PreferencePair:
        return PreferencePair.power(self.gamma1, self.gamma2, self.scale)

    def to_json_dict(self) -> dict:
        m = self.market
        doc = {
            "market": {
                "horizon": m.horizon,
                "r_nominal": list(m.r_nominal) if isinstance(m.r_nominal, tuple) else m.r_nominal,
                "r_real": list(m.r_real) if isinstance(m.r_real, tuple) else m.r_real,
                "sigma_i": m.sigma_i, "sigma_s1": m.sigma_s1, "sigma_s2": m.sigma_s2,
                "mu_c": m.mu_c, "sigma_c1": m.sigma_c1, "sigma_c2": m.sigma_c2,
                "lambda_i": m.lambda_i, "lambda_s": m.lambda_s,
                "i0": m.i0, "c0": m.c0, "x0": m.x0,
            },
            "preferences": {"gamma1": self.gamma1, "gamma2": self.gamma2, "scale": self.scale},
            "objective": {"theta": self.theta, "floor": self.floor, "epsilon": self.epsilon},
            "quadrature": {"nodes": self.quadrature.nodes, "split": self.quadrature.split},
            "pi_p_variant": self.pi_p_variant,
            "seed": self.seed,
            "curve": {"points": self.curve_points, "spread": self.curve_spread},
        }
        if self.rescale is not None:
            doc["rescale"] = self.rescale
        if self.sweep_parameter is not None:
            doc["sweep"] = {"parameter": self.sweep_parameter,
                            "values": list(self.sweep_values)}
        if self.diagnostic_triples:
            doc["diagnostic_triples"] = [list(t) for t in self.diagnostic_triples]
        if self.outdir is not None:
            doc["outdir"] = self.outdir
        return doc


def _need(block: dict, key: str, path: str, kind=(int, float)):
    if key not in block:
        raise ConfigError(f"{path}.{key}: missing required field")
    val = block[key]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got {val!r}")
    return val


def parse_config(doc: dict) -> ScenarioConfig:
    """Validate a config document; raises ConfigError naming the bad field."""
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    mkt = doc.get("market")
    if not isinstance(mkt, dict):
        raise ConfigError("market: missing or not an object")
    rates = {}
    for key in ("r_nominal", "r_real"):
        val = mkt.get(key)
        if isinstance(val, list):
            rates[key] = tuple(float(v) for v in val)
        elif isinstance(val, (int, float)) and not isinstance(val, bool):
            rates[key] = float(val)
        else:
            raise ConfigError(f"market.{key}: expected number or per-year list")
    try:
        market = MarketParams(
            horizon=float(_need(mkt, "horizon", "market")),
            r_nominal=rates["r_nominal"], r_real=rates["r_real"],
            sigma_i=float(_need(mkt, "sigma_i", "market")),
            sigma_s1=float(_need(mkt, "sigma_s1", "market")),
            sigma_s2=float(_need(mkt, "sigma_s2", "market")),
            mu_c=float(_need(mkt, "mu_c", "market")),
            sigma_c1=float(_need(mkt, "sigma_c1", "market")),
            sigma_c2=float(_need(mkt, "sigma_c2", "market")),
            lambda_i=float(_need(mkt, "lambda_i", "market")),
            lambda_s=float(_need(mkt, "lambda_s", "market")),
            i0=float(mkt.get("i0", 1.0)), c0=float(mkt.get("c0", 0.0)),
            x0=float(mkt.get("x0", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"market: {exc}") from exc
    prefs = doc.get("preferences")
    if not isinstance(prefs, dict):
        raise ConfigError("preferences: missing or not an object")
    objective = doc.get("objective")
    if not isinstance(objective, dict):
        raise ConfigError("objective: missing or not an object")
    quad = doc.get("quadrature", {})
    if not isinstance(quad, dict):
        raise ConfigError("quadrature: expected an object")
    try:
        qspec = QuadratureSpec(nodes=int(quad.get("nodes", 400)),
                               split=bool(quad.get("split", True)))
    except ValueError as exc:
        raise ConfigError(f"quadrature: {exc}") from exc
    rescale = doc.get("rescale")
    if rescale is not None and not isinstance(rescale, (int, float, str)):
        raise ConfigError("rescale: expected a number, 'auto' or 'auto:<fraction>'")
    if isinstance(rescale, str):
        if rescale != "auto" and not rescale.startswith("auto:"):
            raise ConfigError(f"rescale: unrecognized directive {rescale!r}")
        if rescale.startswith("auto:"):
            try:
                frac = float(rescale.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"rescale: bad fraction in {rescale!r}") from exc
            if not 0.0 < frac < 1.0:
                raise ConfigError("rescale: fraction must lie in (0, 1)")
    sweep = doc.get("sweep")
    sweep_param, sweep_vals = None, ()
    if sweep is not None:
        if not isinstance(sweep, dict) or "parameter" not in sweep or "values" not in sweep:
            raise ConfigError("sweep: expected {parameter, values}")
        sweep_param = sweep["parameter"]
        if sweep_param not in SWEEPABLE:
            raise ConfigError(f"sweep.parameter: {sweep_param!r} not one of {SWEEPABLE}")
        if not isinstance(sweep["values"], list) or not sweep["values"]:
            raise ConfigError("sweep.values: expected a non-empty list")
        sweep_vals = tuple(float(v) for v in sweep["values"])
    variant = doc.get("pi_p_variant", "stock_vol")
    if variant not in ("stock_vol", "inflation_vol"):
        raise ConfigError(f"pi_p_variant: unknown variant {variant!r}")
    triples = doc.get("diagnostic_triples", [])
    if not isinstance(triples, list):
        raise ConfigError("diagnostic_triples: expected a list of [nu, lam, beta]")
    parsed_triples = []
    for i, t in enumerate(triples):
        if not (isinstance(t, list) and len(t) == 3):
            raise ConfigError(f"diagnostic_triples[{i}]: expected [nu, lam, beta]")
        parsed_triples.append(tuple(float(v) for v in t))
    curve = doc.get("curve", {})
    if not isinstance(curve, dict):
        raise ConfigError("curve: expected an object")
    try:
        cfg = ScenarioConfig(
            market=market,
            gamma1=float(_need(prefs, "gamma1", "preferences")),
            gamma2=float(_need(prefs, "gamma2", "preferences")),
            scale=float(prefs.get("scale", 1.0)),
            theta=float(_need(objective, "theta", "objective")),
            floor=float(_need(objective, "floor", "objective")),
            epsilon=float(_need(objective, "epsilon", "objective")),
            quadrature=qspec,
            rescale=rescale,
            sweep_parameter=sweep_param,
            sweep_values=sweep_vals,
            pi_p_variant=variant,
            diagnostic_triples=tuple(parsed_triples),
            seed=int(doc.get("seed", 0)),
            curve_points=int(curve.get("points", 1000)),
            curve_spread=float(curve.get("spread", 4.0)),
            outdir=doc.get("outdir"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not 0.0 <= cfg.epsilon <= 1.0:
        raise ConfigError("objective.epsilon: must lie in [0, 1]")
    if cfg.theta <= 0.0 or cfg.floor < 0.0:
        raise ConfigError("objective: theta must be positive and floor non-negative")
    if not 0.0 < cfg.gamma1 < 1.0:
        raise ConfigError("preferences.gamma1: must lie in (0, 1)")
    if cfg.gamma2 <= 0.0 or cfg.scale <= 0.0:
        raise ConfigError("preferences: gamma2 and scale must be positive")
    return cfg


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(doc)


def _with_sweep_value(cfg: ScenarioConfig, value: float) -> ScenarioConfig:
    name = cfg.sweep_parameter
    stripped = dataclasses.replace(cfg, sweep_parameter=None, sweep_values=())
    return dataclasses.replace(stripped, **{name: value})


def _apply_scale(cfg: ScenarioConfig, scale: float) -> ScenarioConfig:
    market = dataclasses.replace(cfg.market, x0=cfg.market.x0 * scale,
                                 c0=cfg.market.c0 * scale)
    return dataclasses.replace(cfg, market=market, rescale=None)


def resolve_rescale(cfg: ScenarioConfig) -> tuple[float, dict]:
    """Resolve the rescale directive to a multiplicative (x0, c0) scale.

    "auto[:frac]" targets the given fraction of the feasibility window,
    intersected over all sweep values so every sweep point shares one initial
    wealth (the identical-curve claims need a common budget).
    """
    if cfg.rescale is None:
        return 1.0, {"mode": "none"}
    if isinstance(cfg.rescale, (int, float)):
        return float(cfg.rescale), {"mode": "explicit", "scale": float(cfg.rescale)}
    frac = 0.5
    if cfg.rescale.startswith("auto:"):
        frac = float(cfg.rescale.split(":", 1)[1])
    points = ([_with_sweep_value(cfg, v) for v in cfg.sweep_values]
              if cfg.sweep_parameter else [cfg])
    lo = -math.inf
    hi = math.inf
    for point in points:
        rep = feasibility(point.market, point.theta, point.floor, point.epsilon)
        lo, hi = max(lo, rep.lower), min(hi, rep.upper)
    if not lo < hi:
        raise NumericalFailure(f"empty joint feasibility window: lower={lo} upper={hi}")
    x_now = auxiliary_initial(cfg.market)
    target = lo + frac * (hi - lo)
    scale = target / x_now
    return scale, {"mode": "auto", "fraction": frac, "window_lower": lo,
                   "window_upper": hi, "target": target, "scale": scale}


def _fmt(value: float) -> str:
    return format(value, ".17g")


def emit_curve(sol: PiecewiseSolution, beta_star: float, law: KernelLaw,
               points: int, spread: float) -> tuple[list[str], dict]:
    """CSV rows (kernel value, payoff) on a log-spaced kernel grid, plus the
    branch-table sidecar annotating region boundaries."""
    sd = law.sd
    h = np.exp(np.linspace(-law.a - spread * sd, -law.a + spread * sd, points))
    z = sol.x_star(beta_star * h)
    rows = ["kernel,payoff"]
    rows += [f"{_fmt(hv)},{_fmt(zv)}" for hv, zv in zip(h, z)]
    sidecar = sol.to_json_dict()
    sidecar["beta_star"] = beta_star
    sidecar["regions"] = len(sol.branches)
    sidecar["breakpoints_kernel"] = [b.y_hi / beta_star for b in sol.branches[:-1]]
    return rows, sidecar


def _write(outdir: Path, name: str, text: str) -> str:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    path.write_text(text)
    return str(path)


def _json_text(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_scenario(cfg: ScenarioConfig, outdir: Path, *, diagnostic: bool = False,
                 scale_override: Optional[float] = None,
                 notes: Optional[dict] = None) -> tuple[int, Optional[SolverResult]]:
    """Feasibility gate, nested solve and artifact emission for one scenario."""
    if scale_override is not None:
        scale, scale_info = scale_override, {"mode": "sweep-common", "scale": scale_override}
    else:
        scale, scale_info = resolve_rescale(cfg)
    original_x = auxiliary_initial(cfg.market)
    run_cfg = _apply_scale(cfg, scale) if scale != 1.0 else dataclasses.replace(cfg, rescale=None)
    rep = feasibility(run_cfg.market, run_cfg.theta, run_cfg.floor, run_cfg.epsilon)
    law = kernel_law(run_cfg.market)
    pair = run_cfg.pair()
    manifest = {
        "tool": {"name": "omegavar", "version": __version__},
        "config": run_cfg.to_json_dict(),
        "rescale_applied": dict(scale_info, original_x_tilde0=original_x),
        "feasibility": {"lower": rep.lower, "upper": rep.upper,
                        "x_tilde0": rep.x_tilde0, "verdict": rep.verdict.value},
        "tolerances": {"budget_rel": TOL_BUDGET, "value_abs": TOL_V, "slack_abs": TOL_SLACK},
    }
    if notes:
        manifest["notes"] = notes
    artifacts = {}

    def finish(code: int, result: Optional[SolverResult]) -> tuple[int, Optional[SolverResult]]:
        manifest["artifacts"] = artifacts
        manifest["exit_code"] = code
        _write(outdir, "manifest.json", _json_text(manifest))
        return code, result

    if diagnostic or cfg.diagnostic_triples:
        diags = [diagnostic_eval(law, pair, run_cfg.theta, run_cfg.floor, nu, lam, beta,
                                 run_cfg.quadrature)
                 for (nu, lam, beta) in cfg.diagnostic_triples]
        if diags:
            artifacts["diagnostics"] = _write(outdir, "diagnostics.json", _json_text(
                {"triples": diags, "note": "exploratory values; no optimality claim"}))
    if not rep.feasible:
        manifest["error"] = (f"infeasible: x_tilde0={rep.x_tilde0:.6g} outside "
                             f"({rep.lower:.6g}, {rep.upper:.6g}); verdict {rep.verdict.value}. "
                             "Rescale x0/c0 (e.g. \"rescale\": \"auto\") to enter the window.")
        return finish(EXIT_INFEASIBLE, None)

    try:
        result = solve_nu(law, pair, rep.x_tilde0, run_cfg.theta, run_cfg.floor,
                          run_cfg.epsilon, run_cfg.quadrature)
    except (NumericalFailure, BudgetInfeasible) as exc:
        manifest["error"] = f"numerical failure: {exc}"
        return finish(EXIT_NUMERICAL, None)
    artifacts["solver"] = _write(outdir, "solver.json", _json_text(result.to_json_dict()))
    if result.verdict is not SolveVerdict.SOLVED:
        manifest["error"] = f"no optimal multipliers: {result.verdict.value}"
        return finish(EXIT_INFEASIBLE, result)

    rows, sidecar = emit_curve(result.solution, result.beta_star, law,
                               run_cfg.curve_points, run_cfg.curve_spread)
    artifacts["curve"] = _write(outdir, "curve.csv", "\n".join(rows) + "\n")
    artifacts["curve_regions"] = _write(outdir, "curve_regions.json", _json_text(sidecar))
    atoms = atoms_from_solution(result.solution, result.beta_star)
    plan = HedgePlan(atoms=atoms, law=law, variant=run_cfg.pi_p_variant)
    ts = strategy_timeseries(plan, run_cfg.market, result.solution.objective)
    srows = ["t,kernel,wealth_real,pi_bond,pi_stock"]
    srows += [",".join(_fmt(r[k]) for k in ("t", "kernel", "wealth_real", "pi_bond", "pi_stock"))
              for r in ts]
    artifacts["strategy"] = _write(outdir, "strategy.csv", "\n".join(srows) + "\n")
    return finish(EXIT_SOLVED, result)


def run_sweep(cfg: ScenarioConfig, outdir: Path, *, diagnostic: bool = False) -> int:
    """Run every sweep point with a common rescale; emit a sweep summary."""
    if cfg.sweep_parameter is None:
        raise ConfigError("sweep: config has no sweep axis")
    scale, scale_info = resolve_rescale(cfg)
    summary = {"parameter": cfg.sweep_parameter, "rescale": scale_info, "points": []}
    worst = EXIT_SOLVED
    for value in cfg.sweep_values:
        point_cfg = _with_sweep_value(cfg, value)
        sub = outdir / f"{cfg.sweep_parameter}={value:g}"
        code, result = run_scenario(point_cfg, sub, diagnostic=diagnostic,
                                    scale_override=scale)
        entry = {"value": value, "exit_code": code, "dir": sub.name}
        if result is not None:
            entry.update({"case": result.case, "nu_star": result.nu_star,
                          "lambda_star": result.lambda_star,
                          "beta_star": result.beta_star, "s_prob": result.s_prob,
                          "verdict": result.verdict.value})
        summary["points"].append(entry)
        worst = max(worst, code)
    _write(outdir, "sweep_summary.json", _json_text(summary))
    return worst


def run_compare(cfg: ScenarioConfig, outdir: Path) -> int:
    """Compare the unconstrained-ratio mode with the pinned-ratio floor mode.

    Mode (i) drops the floor-probability constraint (epsilon = 1) and solves
    the full ratio problem; mode (ii) pins the ratio weight at 1 and solves
    only the floor/budget layers (the piecewise-utility problem).
    """
    law = kernel_law(cfg.market)
    pair = cfg.pair()
    scale, scale_info = resolve_rescale(cfg)
    run_cfg = _apply_scale(cfg, scale) if scale != 1.0 else cfg
    rep = feasibility(run_cfg.market, run_cfg.theta, run_cfg.floor, run_cfg.epsilon)
    summary = {"rescale": scale_info,
               "feasibility": {"lower": rep.lower, "upper": rep.upper,
                               "x_tilde0": rep.x_tilde0, "verdict": rep.verdict.value}}
    if not rep.feasible:
        summary["error"] = "infeasible configuration; rescale to compare"
        _write(outdir, "compare_summary.json", _json_text(summary))
        return EXIT_INFEASIBLE
    try:
        free = solve_nu(law, pair, rep.x_tilde0, run_cfg.theta, run_cfg.floor, 1.0,
                        run_cfg.quadrature)
        pinned = solve_lambda(law, pair, 1.0, run_cfg.theta, run_cfg.floor,
                              rep.x_tilde0, run_cfg.epsilon, run_cfg.quadrature)
    except (NumericalFailure, BudgetInfeasible) as exc:
        summary["error"] = f"numerical failure: {exc}"
        _write(outdir, "compare_summary.json", _json_text(summary))
        return EXIT_NUMERICAL
    rows_i, side_i = emit_curve(free.solution, free.beta_star, law,
                                run_cfg.curve_points, run_cfg.curve_spread)
    _write(outdir, "curve_ratio_mode.csv", "\n".join(rows_i) + "\n")
    _write(outdir, "curve_ratio_mode_regions.json", _json_text(side_i))
    summary["ratio_mode"] = {"case": free.case, "nu_star": free.nu_star,
                             "lambda_star": free.lambda_star, "beta_star": free.beta_star}
    if pinned.verdict is SolveVerdict.SOLVED:
        rows_ii, side_ii = emit_curve(pinned.solution, pinned.beta, law,
                                      run_cfg.curve_points, run_cfg.curve_spread)
        _write(outdir, "curve_pinned_mode.csv", "\n".join(rows_ii) + "\n")
        _write(outdir, "curve_pinned_mode_regions.json", _json_text(side_ii))
        summary["pinned_mode"] = {"case": pinned.solution.case, "nu": 1.0,
                                  "lambda_star": pinned.lam, "beta_star": pinned.beta,
                                  "s_prob": pinned.s_prob}
        code = EXIT_SOLVED
    else:
        summary["pinned_mode"] = {"verdict": pinned.verdict.value, "p_sup": pinned.p_sup}
        code = EXIT_INFEASIBLE
    _write(outdir, "compare_summary.json", _json_text(summary))
    return code


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="omegavar",
        description="Gain-loss ratio terminal-wealth solver with a floor-probability constraint")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("solve", "solve one scenario"),
                           ("sweep", "run the configured sweep axis"),
                           ("compare", "compare constraint modes")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="path to the scenario JSON document")
        p.add_argument("--outdir", default=None, help="artifact directory")
        p.add_argument("--quadrature-nodes", type=int, default=None, metavar="N")
        p.add_argument("--seed", type=int, default=None, metavar="S")
        p.add_argument("--diagnostic", action="store_true",
                       help="evaluate configured multiplier triples even when infeasible")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.quadrature_nodes is not None:
        cfg = dataclasses.replace(cfg, quadrature=QuadratureSpec(
            nodes=args.quadrature_nodes, split=cfg.quadrature.split))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    outdir = Path(args.outdir or cfg.outdir or "omegavar-out")
    try:
        if args.command == "solve":
            code, result = run_scenario(cfg, outdir, diagnostic=args.diagnostic)
            if result is not None:
                print(f"verdict={result.verdict.value} case={result.case} "
                      f"nu*={result.nu_star:.8g} lambda*={result.lambda_star:.8g} "
                      f"beta*={result.beta_star:.8g}")
            return code
        if args.command == "sweep":
            return run_sweep(cfg, outdir, diagnostic=args.diagnostic)
        return run_compare(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (NumericalFailure, BudgetInfeasible) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
