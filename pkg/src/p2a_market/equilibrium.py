"""Gauss-Seidel best-response iteration with price updates and gap certification."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import (
    STAKEHOLDERS,
    AsySchedule,
    DecisionProfile,
    MarketParams,
    PriceVector,
    ScenarioData,
    clearing_residual,
    market_blocks,
    validate_asy_schedule,
)
from .solvers import (
    DEFAULT_TOL,
    BnbBudget,
    InfeasibleError,
    SolveStatus,
    round_and_repair,
    schedule_from_solution,
    solve_exact_miqp,
    solve_fixed_binaries,
    solve_qp,
    solve_relaxed,
)
from .subproblems import (
    build_own_problem,
    build_subproblem,
    clearing_penalty,
    evaluate_cost,
    evaluate_potential,
    unpack,
)

log = logging.getLogger(__name__)

CONVERGED = "Converged"
ITER_LIMIT = "IterLimit"


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 10.0
    max_iters: int = 500
    g1: float | None = None
    g2: float | None = None
    eps_bar: float = 1e-4
    eps_floor: float = 1e-6
    initial_prices: PriceVector | None = None
    electricity_ref_price: float = 300.0
    market_weights: tuple = (1.0, 1.0, 1.0)
    bnb_budget: BnbBudget = field(default_factory=BnbBudget)
    qp_tol: float = DEFAULT_TOL
    ra_response: str = "approx"
    compute_gaps: bool = True
    cooperative_time_limit: float = 600.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.eps_bar > 0:
            raise ValueError("eps_bar must be positive")
        for name in ("g1", "g2"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        w = tuple(float(v) for v in self.market_weights)
        if len(w) != 3 or min(w) <= 0:
            raise ValueError("market_weights must be three positive numbers")
        object.__setattr__(self, "market_weights", w)
        if not self.cooperative_time_limit > 0:
            raise ValueError("cooperative_time_limit must be positive")
        if self.ra_response not in ("approx", "exact"):
            raise ValueError("ra_response must be 'approx' or 'exact'")

    def eps_threshold(self, phi_value: float) -> float:
        return max(self.eps_bar * abs(phi_value), self.eps_floor)

    def default_prices(self, scenario: ScenarioData, params: MarketParams) -> PriceVector:
        if self.initial_prices is not None:
            return self.initial_prices
        return PriceVector.flat(
            scenario.T, self.electricity_ref_price, scenario.ammonia_price / params.ra.h2_per_nh3
        )


@dataclass
class BestResponse:
    x: DecisionProfile
    penalized_cost: float
    eps: float
    path: str
    lower_bound: float


@dataclass
class EquilibriumResult:
    x: DecisionProfile
    prices: PriceVector
    phi_trace: list
    residual_trace: list
    costs: dict
    iterations: int
    status: str
    g1: float
    g2: float
    gaps: dict = field(default_factory=dict)
    gap_exact: dict = field(default_factory=dict)
    eps_certified: float = float("nan")
    records: list = field(default_factory=list)
    substeps: list = field(default_factory=list)
    br_prices: PriceVector | None = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def potential(self) -> float:
        return self.phi_trace[-1]

    @property
    def revenues(self) -> dict:
        return {k: -v for k, v in self.costs.items()}


def _raise_infeasible(k: str, res: SolveStatus):
    blocks = {
        "rg": "supply balance / battery dynamics",
        "hp": "electrolyzer balance / hydrogen storage / battery dynamics",
        "ra": "ASY state logic / production window / ramping / hydrogen buffer / NH3 storage",
    }[k]
    raise InfeasibleError(f"{k} best response is {res.kind.value}; check constraint blocks: {blocks}")


def best_response(
    k: str,
    x: DecisionProfile,
    prices: PriceVector,
    scenario: ScenarioData,
    params: MarketParams,
    cfg: SolverConfig,
    phi_value: float | None = None,
) -> BestResponse:
    """Best response of ``k`` to the opponents in ``x`` at fixed prices.

    RG and HP are convex QPs. RA solves the relaxation, rounds and repairs its
    schedule, re-optimizes the continuous part, and keeps that point if it is
    within the acceptance threshold of the relaxed bound; otherwise it runs
    branch and bound seeded with the rounded point.
    """
    problem = build_subproblem(k, params, scenario, prices, x, cfg.rho, cfg.market_weights)
    if k != "ra":
        res = solve_qp(problem, cfg.qp_tol)
        if not res.ok:
            _raise_infeasible(k, res)
        eps = cfg.qp_tol * max(1.0, abs(res.objective))
        return BestResponse(unpack(problem, res.primal, x), res.objective, eps, "exact", res.objective - eps)

    relaxed = solve_relaxed(problem, cfg.qp_tol)
    if not relaxed.ok:
        _raise_infeasible(k, relaxed)
    incumbent = None
    if cfg.ra_response == "approx":
        if phi_value is None:
            phi_value = evaluate_potential(x, prices, scenario, params, cfg.rho, cfg.market_weights)
        threshold = cfg.eps_threshold(phi_value)
        for sched in _ra_candidates(problem, relaxed.primal, x.ra.schedule, params.ra):
            fixed = solve_fixed_binaries(problem, sched, cfg.qp_tol)
            if fixed.ok and (incumbent is None or fixed.objective < incumbent.objective):
                incumbent = fixed
        if incumbent is not None:
            err = max(0.0, incumbent.objective - relaxed.objective)
            if err <= threshold:
                return BestResponse(
                    unpack(problem, incumbent.primal, x), incumbent.objective, err, "approx", relaxed.objective
                )
    exact = solve_exact_miqp(problem, cfg.bnb_budget, cfg.qp_tol, incumbent=incumbent)
    if not exact.usable:
        _raise_infeasible(k, exact)
    lower = max(exact.bound, relaxed.objective) if np.isfinite(exact.bound) else relaxed.objective
    eps = max(0.0, exact.objective - lower)
    path = "exact" if exact.ok else "budget"
    return BestResponse(unpack(problem, exact.primal, x), exact.objective, eps, path, lower)


def _ra_candidates(problem, relaxed_x, current: AsySchedule, p) -> list:
    """Schedules worth a fixed-binary solve, most informed first.

    Besides the plain rounding, steps where the relaxation makes ammonia are
    forced to Production (fractional ``pro`` there usually means "run at low
    load"), and the current schedule is kept so the response never gets worse.
    """
    init = p.initial_state
    frac = schedule_from_solution(problem, relaxed_x, init)
    rows = np.column_stack([frac.pro, frac.by, frac.off])
    out = [round_and_repair(rows, p, init)]
    making = np.asarray(relaxed_x)[problem.base.columns("ra.nh3_prod")] > 1e-6
    if np.any(making):
        forced = rows.copy()
        forced[making, 0] = 2.0
        out.append(round_and_repair(forced, p, init))
    if validate_asy_schedule(current, p).ok:
        out.append(current)
    unique = []
    for s in out:
        if not any(np.array_equal(s.states(), u.states()) for u in unique):
            unique.append(s)
    return unique


def update_prices(prices: PriceVector, phi, rho: float, weights=(1.0, 1.0, 1.0)) -> PriceVector:
    """Move each price against its market's residual.

    The residual is offered minus purchased quantity, so oversupply lowers the
    price and shortage raises it.
    """
    w = np.asarray(weights, dtype=float).reshape(1, 3)
    step = rho * w * market_blocks(phi)
    cur = market_blocks(prices.stacked())
    return PriceVector.from_stacked(cur - step)


def initial_profile(scenario: ScenarioData, params: MarketParams, prices: PriceVector, cfg: SolverConfig) -> DecisionProfile:
    """Each stakeholder's own optimum at the starting prices, ignoring clearing."""
    x = DecisionProfile.zeros(scenario.T, params.ra.initial_state)
    for k in STAKEHOLDERS:
        problem = build_own_problem(k, params, scenario, prices)
        if k == "ra":
            # the current schedule is a valid starting incumbent for the search
            start = None
            if validate_asy_schedule(x.ra.schedule, params.ra).ok:
                start = solve_fixed_binaries(problem, x.ra.schedule, cfg.qp_tol)
            res = solve_exact_miqp(problem, cfg.bnb_budget, cfg.qp_tol, incumbent=start)
            if not res.usable:
                _raise_infeasible(k, res)
        else:
            res = solve_qp(problem, cfg.qp_tol)
            if not res.ok:
                _raise_infeasible(k, res)
        x = unpack(problem, res.primal, x)
    return x


def _volume_scale(x: DecisionProfile, scenario: ScenarioData) -> float:
    offers = np.concatenate([x.rg.sell_hp, x.rg.sell_ra, x.hp.sell_ra])
    return max(1.0, float(np.linalg.norm(offers)), float(np.linalg.norm(scenario.renewable_avail())))


def _penalized_costs(x, prices, scenario, params, cfg):
    pen = clearing_penalty(x, cfg.rho, cfg.market_weights)
    return {k: evaluate_cost(k, x, prices, scenario, params) + pen for k in STAKEHOLDERS}


def iterate_to_equilibrium(
    scenario: ScenarioData,
    params: MarketParams,
    cfg: SolverConfig | None = None,
    callback=None,
    x0: DecisionProfile | None = None,
) -> EquilibriumResult:
    """Run the iterative best-response scheme until the stop test holds.

    ``callback(iteration, k, x_before, x_after, prices, response)`` is invoked
    after every best-response sub-step.
    """
    cfg = cfg or SolverConfig()
    rho, w = cfg.rho, cfg.market_weights
    prices = cfg.default_prices(scenario, params)
    x = x0 if x0 is not None else initial_profile(scenario, params, prices, cfg)

    phi_val = evaluate_potential(x, prices, scenario, params, rho, w)
    resid_norm = float(np.linalg.norm(clearing_residual(x)))
    g1 = cfg.g1 if cfg.g1 is not None else max(1e-4 * abs(phi_val), cfg.eps_floor)
    g2 = cfg.g2 if cfg.g2 is not None else 1e-3 * _volume_scale(x, scenario)
    phi_trace = [phi_val]
    residual_trace = [resid_norm]
    J0 = _penalized_costs(x, prices, scenario, params, cfg)
    records = [
        dict(iteration=0, phi=phi_val, delta_phi=None, residual_norm=resid_norm,
             **{f"J_{k}": J0[k] for k in STAKEHOLDERS},
             **{f"eps_{k}": None for k in STAKEHOLDERS}, ra_path="init")
    ]
    substeps = []
    status = ITER_LIMIT
    br_prices = prices
    it = 0
    for it in range(1, cfg.max_iters + 1):
        br_prices = prices
        eps = {}
        path = ""
        for k in STAKEHOLDERS:
            before = x
            phi_before = evaluate_potential(x, prices, scenario, params, rho, w)
            resp = best_response(k, x, prices, scenario, params, cfg, phi_value=phi_before)
            x = resp.x
            phi_after = evaluate_potential(x, prices, scenario, params, rho, w)
            eps[k] = resp.eps
            if k == "ra":
                path = resp.path
            tol = 1e-7 * max(1.0, abs(phi_before))
            if phi_after > phi_before + resp.eps + tol:
                log.warning("iteration %d: potential rose by %.3g after %s response", it, phi_after - phi_before, k)
            substeps.append(dict(iteration=it, player=k, phi_before=phi_before, phi_after=phi_after,
                                 eps=resp.eps, path=resp.path))
            if callback is not None:
                callback(it, k, before, x, prices, resp)
        phi_new = evaluate_potential(x, prices, scenario, params, rho, w)
        phi = clearing_residual(x)
        resid_norm = float(np.linalg.norm(phi))
        J = _penalized_costs(x, prices, scenario, params, cfg)
        delta = phi_new - phi_trace[-1]
        phi_trace.append(phi_new)
        residual_trace.append(resid_norm)
        records.append(
            dict(iteration=it, phi=phi_new, delta_phi=delta, residual_norm=resid_norm,
                 **{f"J_{k}": J[k] for k in STAKEHOLDERS},
                 **{f"eps_{k}": eps[k] for k in STAKEHOLDERS}, ra_path=path)
        )
        prices = update_prices(prices, phi, rho, w)
        log.debug("iteration %d: phi=%.6g dphi=%.3g |res|=%.3g", it, phi_new, delta, resid_norm)
        if abs(delta) < g1 and resid_norm < g2:
            status = CONVERGED
            break

    costs = {k: evaluate_cost(k, x, br_prices, scenario, params) for k in STAKEHOLDERS}
    result = EquilibriumResult(
        x=x,
        prices=prices,
        phi_trace=phi_trace,
        residual_trace=residual_trace,
        costs=costs,
        iterations=it,
        status=status,
        g1=g1,
        g2=g2,
        records=records,
        substeps=substeps,
        br_prices=br_prices,
    )
    if cfg.compute_gaps:
        # gaps are taken at the prices the last responses were computed against
        report = equilibrium_gap(x, br_prices, scenario, params, cfg)
        result.gaps = report.gaps
        result.gap_exact = report.exact
        result.eps_certified = max(report.gaps.values())
    return result


@dataclass
class GapReport:
    gaps: dict
    exact: dict
    current: dict
    best: dict

    @property
    def max_gap(self) -> float:
        return max(self.gaps.values())


def equilibrium_gap(
    x: DecisionProfile, prices: PriceVector, scenario: ScenarioData, params: MarketParams, cfg: SolverConfig | None = None
) -> GapReport:
    """How much each stakeholder could still gain by deviating unilaterally.

    RA's best deviation comes from branch and bound; if the budget runs out the
    lower bound is used and the gap is flagged as an upper bound.
    """
    cfg = cfg or SolverConfig()
    gaps, exact, current, best = {}, {}, {}, {}
    for k in STAKEHOLDERS:
        problem = build_subproblem(k, params, scenario, prices, x, cfg.rho, cfg.market_weights)
        J_now = evaluate_cost(k, x, prices, scenario, params) + clearing_penalty(x, cfg.rho, cfg.market_weights)
        if k == "ra":
            # the current schedule is a valid starting incumbent for the search
            start = None
            if validate_asy_schedule(x.ra.schedule, params.ra).ok:
                start = solve_fixed_binaries(problem, x.ra.schedule, cfg.qp_tol)
            res = solve_exact_miqp(problem, cfg.bnb_budget, cfg.qp_tol, incumbent=start)
            if not res.usable:
                _raise_infeasible(k, res)
            if res.ok:
                floor, exact[k] = res.objective, True
            else:
                floor, exact[k] = res.bound, False
        else:
            res = solve_qp(problem, cfg.qp_tol)
            if not res.ok:
                _raise_infeasible(k, res)
            floor, exact[k] = res.objective, True
        current[k] = J_now
        best[k] = floor
        gaps[k] = max(0.0, J_now - floor)
    return GapReport(gaps, exact, current, best)


@dataclass
class Certificate:
    certified: bool
    eps: float
    margins: dict
    gaps: dict
    exact: dict

    def __bool__(self) -> bool:
        return self.certified


def certify_epsilon_ne(
    x: DecisionProfile,
    prices: PriceVector,
    eps: float,
    scenario: ScenarioData,
    params: MarketParams,
    cfg: SolverConfig | None = None,
    report: GapReport | None = None,
) -> Certificate:
    """Check that no stakeholder can improve its penalized cost by more than ``eps``."""
    if not eps >= 0:
        raise ValueError("eps must be nonnegative")
    if report is None:
        report = equilibrium_gap(x, prices, scenario, params, cfg)
    margins = {k: eps - d for k, d in report.gaps.items()}
    return Certificate(all(m >= 0 for m in margins.values()), eps, margins, report.gaps, report.exact)
