"""Gain-loss (Omega) ratio terminal-wealth solver with a floor-probability
constraint, for a pension fund facing inflation and stochastic contributions.

Pipeline: market model and pricing-kernel law -> pointwise concavified
optimizer branch table -> nested multiplier solve (budget, floor probability,
ratio weight) -> closed-form replication of wealth and strategies, verified by
a hedged-SDE simulation oracle.
"""

__version__ = "0.1.0"

from .envelope import (Branch, BranchKind, PiecewiseSolution, ThresholdSet,
                       brute_force_oracle, classify_and_solve, pointwise_opt,
                       thresholds)
from .market import (DegenerateMarketError, Feasibility, FeasibilityReport,
                     KernelLaw, MarketParams, SingularTransformError,
                     auxiliary_initial, back_transform, contribution_annuity,
                     feasibility, forward_transform, kernel_law)
from .multipliers import (BudgetInfeasible, QuadratureSpec, SolveVerdict,
                          SolverResult, budget_R, diagnostic_eval,
                          gain_loss_parts, mc_estimates, solve_beta,
                          solve_lambda, solve_nu, value_v, var_S)
from .preferences import (LinearizedObjective, PenaltyShape, PreferencePair,
                          eval_f, inverse_marginals, validate)
from .replicate import (HedgePlan, PathStats, PayoffAtom, atoms_from_solution,
                        martingale_check, payoff_at, psi, psi_total,
                        simulate_paths, strategy, strategy_timeseries, wealth_t)
from .rootfind import BracketError, NumericalFailure

__all__ = [name for name in dir() if not name.startswith("_")]
