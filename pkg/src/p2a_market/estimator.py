"""Estimator-style front end over the equilibrium engine.

The objects follow scikit-learn conventions: constructor arguments are stored
unchanged, ``fit`` does the work and sets trailing-underscore attributes, and
``get_params``/``set_params``/``clone`` behave as usual. The "data" passed to
``fit`` is a scenario (path, :class:`ScenarioData`, mapping of columns or a
``(T, 4)`` array).
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import replace
from os import PathLike

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .equilibrium import SolverConfig, certify_epsilon_ne, iterate_to_equilibrium
from .model import (
    SCENARIO_COLUMNS,
    DecisionProfile,
    MarketParams,
    ScenarioData,
    TimeGrid,
    load_scenario,
)
from .report import aggregate_revenues, average_prices
from .solvers import BnbBudget, InfeasibleError, solve_exact_miqp
from .subproblems import build_cooperative_problem, cooperative_cost, unpack


def check_scenario(scenario, dt: float = 1.0) -> ScenarioData:
    """Coerce supported scenario inputs to :class:`ScenarioData`."""
    if isinstance(scenario, ScenarioData):
        return scenario
    if isinstance(scenario, (str, PathLike)):
        return load_scenario(scenario)
    if isinstance(scenario, Mapping) or hasattr(scenario, "columns"):
        cols = SCENARIO_COLUMNS[1:]
        missing = [c for c in cols if c not in scenario]
        if missing:
            raise ValueError(f"scenario is missing columns {missing}")
        arrays = [np.asarray(scenario[c], dtype=float) for c in cols]
        return ScenarioData(*arrays, TimeGrid(len(arrays[0]), dt))
    arr = check_array(scenario, dtype=float, ensure_min_samples=1)
    if arr.shape[1] != 4:
        raise ValueError(
            f"scenario array needs 4 columns (wind, solar, ammonia price, backup price), got {arr.shape[1]}"
        )
    return ScenarioData(*arr.T, TimeGrid(arr.shape[0], dt))


def _market_params(params, hsb_enabled) -> MarketParams:
    base = params if params is not None else MarketParams()
    if not isinstance(base, MarketParams):
        raise TypeError("params must be a MarketParams instance or None")
    return base.with_hsb(bool(hsb_enabled))


class MarketEquilibrium(BaseEstimator):
    """Penalized-clearing market equilibrium between the three stakeholders.

    ``hsb_enabled=False`` is the no-standby setting (M1), ``True`` the standby
    setting (M2).

    Attributes set by ``fit``: ``result_``, ``profile_``, ``prices_``,
    ``revenues_``, ``total_revenue_``, ``n_iter_``, ``converged_``, ``gaps_``.
    """

    def __init__(
        self,
        params: MarketParams | None = None,
        hsb_enabled: bool = True,
        rho: float = 10.0,
        max_iters: int = 500,
        g1: float | None = None,
        g2: float | None = None,
        eps_bar: float = 1e-4,
        market_weights=(1.0, 1.0, 1.0),
        electricity_ref_price: float = 300.0,
        ra_response: str = "approx",
        bnb_max_nodes: int = 20_000,
        bnb_time_limit: float = 120.0,
        compute_gaps: bool = True,
    ):
        self.params = params
        self.hsb_enabled = hsb_enabled
        self.rho = rho
        self.max_iters = max_iters
        self.g1 = g1
        self.g2 = g2
        self.eps_bar = eps_bar
        self.market_weights = market_weights
        self.electricity_ref_price = electricity_ref_price
        self.ra_response = ra_response
        self.bnb_max_nodes = bnb_max_nodes
        self.bnb_time_limit = bnb_time_limit
        self.compute_gaps = compute_gaps

    @classmethod
    def from_config(cls, cfg: SolverConfig, params: MarketParams | None = None, **overrides):
        kw = dict(
            params=params,
            rho=cfg.rho,
            max_iters=cfg.max_iters,
            g1=cfg.g1,
            g2=cfg.g2,
            eps_bar=cfg.eps_bar,
            market_weights=cfg.market_weights,
            electricity_ref_price=cfg.electricity_ref_price,
            ra_response=cfg.ra_response,
            bnb_max_nodes=cfg.bnb_budget.max_nodes,
            bnb_time_limit=cfg.bnb_budget.time_limit,
            compute_gaps=cfg.compute_gaps,
        )
        kw.update(overrides)
        return cls(**kw)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            rho=self.rho,
            max_iters=self.max_iters,
            g1=self.g1,
            g2=self.g2,
            eps_bar=self.eps_bar,
            market_weights=tuple(self.market_weights),
            electricity_ref_price=self.electricity_ref_price,
            ra_response=self.ra_response,
            bnb_budget=BnbBudget(self.bnb_max_nodes, self.bnb_time_limit),
            compute_gaps=self.compute_gaps,
        )

    def fit(self, scenario, y=None, initial_prices=None):
        scenario = check_scenario(scenario)
        params = _market_params(self.params, self.hsb_enabled)
        cfg = self.solver_config()
        if initial_prices is not None:
            cfg = replace(cfg, initial_prices=initial_prices)
        result = iterate_to_equilibrium(scenario, params, cfg)
        self.scenario_ = scenario
        self.params_ = params
        self.config_ = cfg
        self.result_ = result
        self.profile_ = result.x
        # prices the final responses were computed against; the post-update
        # vector stays available as result_.prices
        self.prices_ = result.br_prices
        self.revenues_ = result.revenues
        self.total_revenue_ = aggregate_revenues(self.revenues_)
        self.average_prices_ = average_prices(result.x, self.prices_)
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.gaps_ = dict(result.gaps)
        return self

    def certify(self, eps: float | None = None):
        """Check the fitted point against ``eps`` (default: relative threshold at the final potential)."""
        check_is_fitted(self, "result_")
        if eps is None:
            eps = self.config_.eps_bar * abs(self.result_.potential)
        return certify_epsilon_ne(self.profile_, self.prices_, eps, self.scenario_, self.params_, self.config_)

    def score(self, scenario=None, y=None) -> float:
        """Total stakeholder revenue of the fitted point (higher is better)."""
        check_is_fitted(self, "result_")
        return self.total_revenue_


class CooperativeBenchmark(BaseEstimator):
    """Joint optimum of all three stakeholders with markets cleared exactly (M3)."""

    def __init__(self, params: MarketParams | None = None, time_limit: float = 600.0, gap_tol: float = 1e-7):
        self.params = params
        self.time_limit = time_limit
        self.gap_tol = gap_tol

    def fit(self, scenario, y=None):
        scenario = check_scenario(scenario)
        params = _market_params(self.params, True)
        problem = build_cooperative_problem(params, scenario)
        res = solve_exact_miqp(problem, BnbBudget(max_nodes=10**9, time_limit=self.time_limit, gap_tol=self.gap_tol))
        if not res.usable:
            raise InfeasibleError(f"cooperative problem is {res.kind.value}")
        x = unpack(problem, res.primal, DecisionProfile.zeros(scenario.T, params.ra.initial_state))
        self.scenario_ = scenario
        self.params_ = params
        self.status_ = res
        self.profile_ = x
        self.total_cost_ = cooperative_cost(x, scenario, params)
        self.total_revenue_ = -self.total_cost_
        return self

    def score(self, scenario=None, y=None) -> float:
        check_is_fitted(self, "profile_")
        return self.total_revenue_

