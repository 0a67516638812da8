"""Convex QP solves and mixed-binary handling for the canonical problems."""

from __future__ import annotations

import enum
import heapq
import itertools
import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import AsySchedule, AsyState, RaParams, derive_transitions, downtime_window
from .subproblems import SCHEDULE_FIELDS, CanonicalMIQP, CanonicalQP

DEFAULT_TOL = 1e-9
INT_TOL = 1e-6


class SolveKind(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITER_LIMIT = "IterLimit"
    UNBOUNDED = "Unbounded"


class InfeasibleError(RuntimeError):
    """A subproblem has no feasible point."""


@dataclass
class SolveStatus:
    kind: SolveKind
    objective: float = float("nan")
    primal: np.ndarray | None = None
    dual_residual: float = float("nan")
    primal_residual: float = float("nan")
    iterations: int = 0
    bound: float = float("nan")
    gap: float = 0.0
    nodes: int = 0
    tree: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.kind == SolveKind.OPTIMAL

    @property
    def usable(self) -> bool:
        """Carries a feasible point (optimal, or an incumbent at a budget limit)."""
        return self.primal is not None and self.kind in (SolveKind.OPTIMAL, SolveKind.ITER_LIMIT)


@dataclass(frozen=True)
class BnbBudget:
    max_nodes: int = 20_000
    time_limit: float = 120.0
    gap_tol: float = 1e-7

    def __post_init__(self):
        if not (self.max_nodes > 0 and self.time_limit > 0 and self.gap_tol > 0):
            raise ValueError("BnbBudget fields must be positive")


_STATUS = {
    "Solved": SolveKind.OPTIMAL,
    "AlmostSolved": SolveKind.OPTIMAL,
    "PrimalInfeasible": SolveKind.INFEASIBLE,
    "AlmostPrimalInfeasible": SolveKind.INFEASIBLE,
    "DualInfeasible": SolveKind.UNBOUNDED,
    "AlmostDualInfeasible": SolveKind.UNBOUNDED,
    "MaxIterations": SolveKind.ITER_LIMIT,
    "MaxTime": SolveKind.ITER_LIMIT,
}


def _conic_form(p: CanonicalQP):
    n = p.n
    lb, ub = p.lb, p.ub
    fixed = np.isfinite(lb) & (lb == ub)
    lo = np.isfinite(lb) & ~fixed
    hi = np.isfinite(ub) & ~fixed
    eye = sp.identity(n, format="csr")
    eq_blocks = [p.E, eye[fixed]]
    eq_rhs = [p.d, lb[fixed]]
    in_blocks = [p.A, -eye[lo], eye[hi]]
    in_rhs = [p.b, -lb[lo], ub[hi]]
    A_eq = sp.vstack(eq_blocks, format="csr")
    A_in = sp.vstack(in_blocks, format="csr")
    A = sp.vstack([A_eq, A_in], format="csc")
    b = np.concatenate(eq_rhs + in_rhs)
    cones = []
    if A_eq.shape[0]:
        cones.append(clarabel.ZeroConeT(A_eq.shape[0]))
    if A_in.shape[0]:
        cones.append(clarabel.NonnegativeConeT(A_in.shape[0]))
    return A, b, cones


def solve_qp(p: CanonicalQP, tol: float = DEFAULT_TOL) -> SolveStatus:
    """Solve a convex QP with the Clarabel interior-point method."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if np.any(p.lb > p.ub + 1e-12):
        return SolveStatus(SolveKind.INFEASIBLE)
    A, b, cones = _conic_form(p)
    P = sp.triu(p.P, format="csc")
    if not cones:
        # unconstrained: add a vacuous row so the solver has a cone
        A = sp.csc_matrix((1, p.n))
        b = np.zeros(1)
        cones = [clarabel.NonnegativeConeT(1)]
    # Ruiz equilibration stops early on these problems (storage levels near 1e5
    # next to penalty curvatures near 1e-3), so it is only a fallback.
    for equilibrate in (False, True):
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_threads = 1
        settings.equilibrate_enable = equilibrate
        settings.tol_gap_abs = tol
        settings.tol_gap_rel = tol
        settings.tol_feas = tol
        settings.max_iter = 400
        sol = clarabel.DefaultSolver(P, p.q, A, b, cones, settings).solve()
        kind = _STATUS.get(str(sol.status).split(".")[-1], SolveKind.ITER_LIMIT)
        if kind != SolveKind.ITER_LIMIT:
            break
    if kind != SolveKind.OPTIMAL:
        return SolveStatus(kind, iterations=sol.iterations)
    x = np.asarray(sol.x, dtype=float)
    obj = p.objective(x)
    return SolveStatus(
        SolveKind.OPTIMAL,
        objective=obj,
        primal=x,
        dual_residual=float(sol.r_dual),
        primal_residual=p.max_violation(x),
        iterations=sol.iterations,
        bound=obj,
    )


def solve_relaxed(p: CanonicalMIQP, tol: float = DEFAULT_TOL) -> SolveStatus:
    """Solve with every binary column boxed to [0, 1]."""
    return solve_qp(p.relaxed(), tol)


def schedule_values(p: CanonicalMIQP, s: AsySchedule) -> np.ndarray:
    """Binary column values (ordered like ``p.binary_idx``) taken from a schedule."""
    full = np.full(p.base.n, np.nan)
    for f in SCHEDULE_FIELDS:
        full[p.base.columns("ra." + f)] = getattr(s, f)
    vals = full[p.binary_idx]
    if np.any(np.isnan(vals)):
        raise ValueError("problem has binaries that are not schedule columns")
    return vals


def _solve_pinned(p: CanonicalMIQP, vals, tol: float) -> SolveStatus:
    res = solve_qp(p.fixed(vals), tol)
    if res.primal is not None:
        # the interior-point solve leaves pinned columns a hair off their values
        res.primal[p.binary_idx] = vals
    return res


def solve_fixed_binaries(p: CanonicalMIQP, s: AsySchedule, tol: float = DEFAULT_TOL) -> SolveStatus:
    """Optimize the continuous part with the ASY schedule pinned."""
    return _solve_pinned(p, schedule_values(p, s), tol)


def round_and_repair(fractional, p: RaParams, initial_state=None) -> AsySchedule:
    """Turn relaxed (pro, by, off) values into a feasible schedule.

    ``fractional`` is a (T, 3) array of rows, a ``(pro, by, off)`` tuple of
    series, or a relaxed :class:`AsySchedule`. Each step
    takes the largest indicator (ties prefer Production, then HSB); Idle blocks
    shorter than the minimum downtime become HSB, or Production without HSB.
    """
    if initial_state is None:
        initial_state = p.initial_state
    initial_state = AsyState.parse(initial_state)
    if isinstance(fractional, AsySchedule):
        fractional = (fractional.pro, fractional.by, fractional.off)
    if isinstance(fractional, tuple):
        F = np.column_stack([np.asarray(v, dtype=float) for v in fractional])
    else:
        F = np.asarray(fractional, dtype=float).reshape(-1, 3)
    F = np.round(F, 9)
    states = np.argmax(F, axis=1)
    if not p.hsb_enabled:
        states[states == AsyState.HSB] = AsyState.PRODUCTION
    filler = AsyState.HSB if p.hsb_enabled else AsyState.PRODUCTION
    T = states.shape[0]
    prev_idle = initial_state == AsyState.IDLE
    t = 0
    while t < T:
        if states[t] != AsyState.IDLE:
            prev_idle = False
            t += 1
            continue
        end = t
        while end < T and states[end] == AsyState.IDLE:
            end += 1
        if not prev_idle and end - t < downtime_window(t, T, p.min_downtime):
            states[t:end] = filler
            prev_idle = False
        else:
            prev_idle = True
        t = end
    return AsySchedule.from_states(states, initial_state)


def _integrality_gap(x):
    return np.abs(x - np.round(x))


def _solve_milp(p: CanonicalMIQP, budget: BnbBudget) -> SolveStatus:
    qp = p.base
    integrality = np.zeros(qp.n)
    integrality[p.binary_idx] = 1
    rel = p.relaxed()
    cons = []
    if qp.A.shape[0]:
        cons.append(LinearConstraint(qp.A, -np.inf, qp.b))
    if qp.E.shape[0]:
        cons.append(LinearConstraint(qp.E, qp.d, qp.d))
    res = milp(
        qp.q,
        integrality=integrality,
        bounds=Bounds(rel.lb, rel.ub),
        constraints=cons,
        options={"mip_rel_gap": budget.gap_tol, "time_limit": budget.time_limit, "presolve": True},
    )
    if res.status == 2:
        return SolveStatus(SolveKind.INFEASIBLE)
    if res.status == 3 or (res.status == 4 and res.x is None):
        return SolveStatus(SolveKind.UNBOUNDED)
    if res.x is None:
        return SolveStatus(SolveKind.ITER_LIMIT)
    x = np.asarray(res.x, dtype=float)
    x[p.binary_idx] = np.round(x[p.binary_idx])
    # re-solve the continuous part at the chosen binaries for a clean point
    polished = _solve_pinned(p, x[p.binary_idx], DEFAULT_TOL)
    if polished.ok:
        x = polished.primal
    obj = qp.objective(x)
    bound = float(getattr(res, "mip_dual_bound", obj)) + qp.c0 if res.status == 0 else float("nan")
    bound = min(bound, obj) if np.isfinite(bound) else obj
    gap = (obj - bound) / max(1.0, abs(obj))
    kind = SolveKind.OPTIMAL if res.status == 0 else SolveKind.ITER_LIMIT
    return SolveStatus(kind, obj, x, 0.0, qp.max_violation(x), 0, bound, gap)


def solve_exact_miqp(
    p: CanonicalMIQP,
    budget: BnbBudget | None = None,
    tol: float = DEFAULT_TOL,
    incumbent: SolveStatus | None = None,
    record: bool = False,
) -> SolveStatus:
    """Best-first branch and bound over the binary columns.

    Problems without a quadratic term go to the HiGHS MILP solver. Otherwise
    every node solves the continuous relaxation with its branching bounds; the
    most fractional branching column is split first (lowest index on ties).
    Returns ``IterLimit`` with the incumbent and its gap if the budget runs out.
    """
    budget = budget or BnbBudget()
    if p.base.P.nnz == 0 or not np.any(p.base.P.data):
        if not record:
            return _solve_milp(p, budget)
    started = time.monotonic()
    root_qp = p.relaxed()
    counter = itertools.count()
    best = incumbent if incumbent is not None and incumbent.usable else None
    tree = []

    def gap_abs(obj):
        return budget.gap_tol * max(1.0, abs(obj))

    def node_solve(lb, ub):
        return solve_qp(root_qp.with_bounds(lb, ub), tol)

    def try_candidate(x):
        vals = x[p.binary_idx].copy()
        is_branch = np.isin(p.binary_idx, p.branch_idx)
        vals[is_branch] = np.round(vals[is_branch])
        vals[~is_branch] = np.clip(np.ceil(vals[~is_branch] - INT_TOL), 0, 1)
        res = _solve_pinned(p, vals, tol)
        return res if res.ok else None

    root = node_solve(root_qp.lb, root_qp.ub)
    if root.kind in (SolveKind.INFEASIBLE, SolveKind.UNBOUNDED):
        return root
    if not root.ok:
        return SolveStatus(SolveKind.ITER_LIMIT)
    rid = next(counter)
    if record:
        tree.append((rid, None, root.objective))
    heap = [(root.objective, rid, root_qp.lb, root_qp.ub, root)]
    pruned_min = np.inf
    nodes = 0
    exhausted = False
    while heap:
        bound, nid, lb, ub, res = heapq.heappop(heap)
        if best is not None and bound >= best.objective - gap_abs(best.objective):
            pruned_min = min(pruned_min, bound)
            continue
        if nodes >= budget.max_nodes or time.monotonic() - started > budget.time_limit:
            heapq.heappush(heap, (bound, nid, lb, ub, res))
            exhausted = True
            break
        nodes += 1
        x = res.primal
        if np.all(_integrality_gap(x[p.branch_idx]) <= INT_TOL):
            cand = try_candidate(x)
            if cand is not None:
                if best is None or cand.objective < best.objective:
                    best = cand
                continue
            cols = p.binary_idx[_integrality_gap(x[p.binary_idx]) > INT_TOL]
            if cols.size == 0:
                continue
        else:
            cols = p.branch_idx
        j = int(cols[int(np.argmax(_integrality_gap(x[cols])))])
        for v in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = v
            child = node_solve(clb, cub)
            if not child.ok:
                continue
            cid = next(counter)
            if record:
                tree.append((cid, nid, child.objective))
            cb = max(child.objective, bound)
            if best is not None and cb >= best.objective - gap_abs(best.objective):
                pruned_min = min(pruned_min, cb)
                continue
            heapq.heappush(heap, (cb, cid, clb, cub, child))
    if best is None:
        kind = SolveKind.ITER_LIMIT if exhausted else SolveKind.INFEASIBLE
        return SolveStatus(kind, nodes=nodes, tree=tree)
    lower = min([best.objective, pruned_min] + [h[0] for h in heap])
    gap = max(0.0, best.objective - lower) / max(1.0, abs(best.objective))
    return SolveStatus(
        SolveKind.ITER_LIMIT if exhausted else SolveKind.OPTIMAL,
        best.objective,
        best.primal,
        best.dual_residual,
        best.primal_residual,
        best.iterations,
        lower,
        gap,
        nodes,
        tree,
    )


def schedule_from_solution(p: CanonicalMIQP, x, initial_state) -> AsySchedule:
    vals = {f: np.asarray(x)[p.base.columns("ra." + f)] for f in SCHEDULE_FIELDS}
    return AsySchedule(**vals, initial_state=initial_state)


def enumerate_schedules(T: int, p: RaParams, initial_state=None):
    """Every feasible integral schedule for ``T`` steps (3**T candidates)."""
    from .model import validate_asy_schedule

    initial_state = p.initial_state if initial_state is None else initial_state
    # without HSB the plant is held in Production
    allowed = list(AsyState) if p.hsb_enabled else [AsyState.PRODUCTION]
    for seq in itertools.product(allowed, repeat=T):
        s = AsySchedule.from_states(seq, initial_state)
        if validate_asy_schedule(s, p).ok:
            yield s


__all__ = [
    "BnbBudget",
    "InfeasibleError",
    "SolveKind",
    "SolveStatus",
    "derive_transitions",
    "enumerate_schedules",
    "round_and_repair",
    "schedule_from_solution",
    "schedule_values",
    "solve_exact_miqp",
    "solve_fixed_binaries",
    "solve_qp",
    "solve_relaxed",
]
