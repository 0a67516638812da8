"""Stakeholder best-response problems in canonical quadratic form.

Every problem is ``min 1/2 x'Px + q'x + c0`` subject to ``A x <= b``,
``E x = d`` and ``lb <= x <= ub``. Columns are grouped in blocks of length
``T`` whose names (``"rg.sell_hp"``, ``"ra.pro"``, ...) are recorded in
``var_map``; :func:`pack` and :func:`unpack` move between column vectors and
:class:`~p2a_market.model.DecisionProfile` objects.

The penalized cost of player ``k`` is its bare cost plus
``rho/2 * sum_m w_m * ||phi_m||^2`` over the three markets ``m``. Prices
enter as fixed parameters, so a player's move changes only its own bare cost
and the shared penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .model import (
    AsySchedule,
    DecisionProfile,
    HpDecision,
    HpParams,
    MarketParams,
    PriceVector,
    RaDecision,
    RaParams,
    RgDecision,
    RgParams,
    ScenarioData,
    clearing_residual,
    downtime_window,
    market_blocks,
    series_fields,
)

SCHEDULE_FIELDS = ("pro", "by", "off", "su", "sd")
_DECISION_TYPES = {"rg": RgDecision, "hp": HpDecision, "ra": RaDecision}


@dataclass(frozen=True)
class CanonicalQP:
    n: int
    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    E: sp.csr_matrix
    d: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    var_map: dict = field(default_factory=dict)
    c0: float = 0.0
    T: int = 0

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.P @ x) + self.q @ x + self.c0)

    def columns(self, name: str) -> np.ndarray:
        start, stop = self.var_map[name]
        return np.arange(start, stop)

    def with_bounds(self, lb=None, ub=None) -> "CanonicalQP":
        return replace(
            self,
            lb=self.lb if lb is None else np.asarray(lb, dtype=float),
            ub=self.ub if ub is None else np.asarray(ub, dtype=float),
        )

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        v = [0.0]
        if self.A.shape[0]:
            v.append(float(np.max(self.A @ x - self.b, initial=0.0)))
        if self.E.shape[0]:
            v.append(float(np.max(np.abs(self.E @ x - self.d))))
        v.append(float(np.max(self.lb - x, initial=0.0)))
        v.append(float(np.max(x - self.ub, initial=0.0)))
        return max(v)


@dataclass(frozen=True)
class CanonicalMIQP:
    """A :class:`CanonicalQP` with some columns restricted to {0, 1}.

    ``branch_idx`` lists the binaries that determine all others: once they are
    integral, the remaining binaries can be rounded without loss (the RA
    startup/shutdown indicators follow from the state indicators).
    """

    base: CanonicalQP
    binary_idx: np.ndarray
    branch_idx: np.ndarray = None

    def __post_init__(self):
        bi = np.unique(np.asarray(self.binary_idx, dtype=int))
        if bi.size and (bi[0] < 0 or bi[-1] >= self.base.n):
            raise ValueError("binary_idx out of range")
        object.__setattr__(self, "binary_idx", bi)
        br = bi if self.branch_idx is None else np.unique(np.asarray(self.branch_idx, dtype=int))
        object.__setattr__(self, "branch_idx", br)

    def relaxed(self) -> CanonicalQP:
        lb = self.base.lb.copy()
        ub = self.base.ub.copy()
        lb[self.binary_idx] = np.maximum(lb[self.binary_idx], 0.0)
        ub[self.binary_idx] = np.minimum(ub[self.binary_idx], 1.0)
        return self.base.with_bounds(lb, ub)

    def fixed(self, values) -> CanonicalQP:
        """Pin every binary column to ``values`` (indexed like ``binary_idx``)."""
        vals = np.asarray(values, dtype=float)
        lb = self.base.lb.copy()
        ub = self.base.ub.copy()
        lb[self.binary_idx] = vals
        ub[self.binary_idx] = vals
        return self.base.with_bounds(lb, ub)


class _Builder:
    def __init__(self, T: int):
        self.T = T
        self.n = 0
        self.var_map: dict[str, tuple[int, int]] = {}
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._rows = {"eq": [[], [], [], []], "ineq": [[], [], [], []]}
        self._m = {"eq": 0, "ineq": 0}
        self.q: np.ndarray | None = None
        self.pdiag: np.ndarray | None = None
        self.c0 = 0.0
        self._q_parts: dict[str, np.ndarray] = {}
        self._p_parts: dict[str, np.ndarray] = {}

    def var(self, name, lb=0.0, ub=np.inf):
        start = self.n
        self.n += self.T
        self.var_map[name] = (start, self.n)
        self._lb.append(np.broadcast_to(np.asarray(lb, dtype=float), (self.T,)).copy())
        self._ub.append(np.broadcast_to(np.asarray(ub, dtype=float), (self.T,)).copy())

    def col(self, name, t):
        return self.var_map[name][0] + np.asarray(t, dtype=int)

    def rows(self, kind, rhs, *terms):
        """Add ``len(rhs)`` rows. Each term is ``(name, coef, t_idx[, row_idx])``."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        m = rhs.shape[0]
        r0 = self._m[kind]
        ri, ci, vi, bi = self._rows[kind]
        for term in terms:
            name, coef, tidx = term[:3]
            tidx = np.atleast_1d(np.asarray(tidx, dtype=int))
            rows = np.arange(m) if len(term) < 4 else np.atleast_1d(np.asarray(term[3], dtype=int))
            coef = np.broadcast_to(np.asarray(coef, dtype=float), tidx.shape)
            ri.append(r0 + rows)
            ci.append(self.col(name, tidx))
            vi.append(coef)
        bi.append(rhs)
        self._m[kind] += m

    def linear(self, name, coef):
        arr = np.broadcast_to(np.asarray(coef, dtype=float), (self.T,))
        self._q_parts[name] = self._q_parts.get(name, 0.0) + arr

    def quadratic(self, name, coef):
        arr = np.broadcast_to(np.asarray(coef, dtype=float), (self.T,))
        self._p_parts[name] = self._p_parts.get(name, 0.0) + arr

    def storage(self, level, init, flows, dt):
        """``level_t = level_{t-1} + dt * sum(c * flow_t)`` with ``level_{T-1} = init``."""
        T = self.T
        t = np.arange(T)
        rhs = np.zeros(T)
        rhs[0] = init
        terms = [(level, 1.0, t), (level, -1.0, t[:-1], t[1:])]
        terms += [(name, -dt * c, t) for name, c in flows]
        self.rows("eq", rhs, *terms)
        self.rows("eq", [init], (level, 1.0, [T - 1]))

    def build(self) -> CanonicalQP:
        q = np.zeros(self.n)
        pd = np.zeros(self.n)
        for name, arr in self._q_parts.items():
            s, e = self.var_map[name]
            q[s:e] += arr
        for name, arr in self._p_parts.items():
            s, e = self.var_map[name]
            pd[s:e] += arr
        mats = {}
        for kind in ("eq", "ineq"):
            ri, ci, vi, bi = self._rows[kind]
            m = self._m[kind]
            if m:
                M = sp.coo_matrix(
                    (np.concatenate(vi), (np.concatenate(ri), np.concatenate(ci))), shape=(m, self.n)
                ).tocsr()
                M.sum_duplicates()
                M.eliminate_zeros()
                rhs = np.concatenate(bi)
            else:
                M = sp.csr_matrix((0, self.n))
                rhs = np.zeros(0)
            mats[kind] = (M, rhs)
        return CanonicalQP(
            n=self.n,
            P=sp.diags(pd, format="csc"),
            q=q,
            A=mats["ineq"][0],
            b=mats["ineq"][1],
            E=mats["eq"][0],
            d=mats["eq"][1],
            lb=np.concatenate(self._lb) if self._lb else np.zeros(0),
            ub=np.concatenate(self._ub) if self._ub else np.zeros(0),
            var_map=dict(self.var_map),
            c0=float(self.c0),
            T=self.T,
        )


def _weights(weights) -> np.ndarray:
    w = np.ones(3) if weights is None else np.asarray(weights, dtype=float).reshape(3)
    if np.any(w <= 0):
        raise ValueError("market weights must be positive")
    return w


def _bes(b: _Builder, pre: str, p, dt: float):
    b.var(pre + "bes_charge", 0.0, p.bes_power_cap)
    b.var(pre + "bes_discharge", 0.0, p.bes_power_cap)
    b.var(pre + "bes_soc", 0.0, p.bes_energy_cap)
    b.storage(
        pre + "bes_soc",
        p.bes_soc_init * p.bes_energy_cap,
        [(pre + "bes_charge", p.bes_eff_charge), (pre + "bes_discharge", -1.0 / p.bes_eff_discharge)],
        dt,
    )


def _rg_block(b: _Builder, p: RgParams, s: ScenarioData, prices: PriceVector):
    dt = s.dt
    t = np.arange(s.T)
    avail = np.minimum(s.wind_avail, p.rated_wind) + np.minimum(s.solar_avail, p.rated_solar)
    for name in ("rg.sell_hp", "rg.sell_ra"):
        b.var(name)
    _bes(b, "rg.", p, dt)
    b.var("rg.curtail")
    b.rows(
        "eq",
        avail,
        ("rg.sell_hp", 1.0, t),
        ("rg.sell_ra", 1.0, t),
        ("rg.bes_charge", 1.0, t),
        ("rg.curtail", 1.0, t),
        ("rg.bes_discharge", -1.0, t),
    )
    b.linear("rg.sell_hp", -prices.e_rg_hp * dt)
    b.linear("rg.sell_ra", -prices.e_rg_ra * dt)
    b.linear("rg.bes_discharge", p.deg_cost * dt)


def _hp_block(b: _Builder, p: HpParams, s: ScenarioData, prices: PriceVector):
    dt = s.dt
    t = np.arange(s.T)
    b.var("hp.buy_rg")
    b.var("hp.elz_power", p.elz_min_load * p.elz_power_cap, p.elz_power_cap)
    b.var("hp.h2_prod")
    b.var("hp.h2_store", 0.0, p.h2_store_cap)
    b.var("hp.sell_ra", 0.0, p.h2_delivery_cap)
    _bes(b, "hp.", p, dt)
    b.rows(
        "eq",
        np.zeros(s.T),
        ("hp.buy_rg", 1.0, t),
        ("hp.bes_discharge", 1.0, t),
        ("hp.elz_power", -1.0, t),
        ("hp.bes_charge", -1.0, t),
    )
    b.rows("eq", np.zeros(s.T), ("hp.h2_prod", 1.0, t), ("hp.elz_power", -1.0 / p.elz_spec_consumption, t))
    b.storage("hp.h2_store", p.h2_store_init * p.h2_store_cap, [("hp.h2_prod", 1.0), ("hp.sell_ra", -1.0)], dt)
    b.linear("hp.buy_rg", prices.e_rg_hp * dt)
    b.linear("hp.bes_discharge", p.deg_cost * dt)
    b.linear("hp.sell_ra", -prices.h_hp_ra * dt)


def _ra_block(b: _Builder, p: RaParams, s: ScenarioData, prices: PriceVector):
    dt = s.dt
    T = s.T
    t = np.arange(T)
    cap = p.cap_series(T)
    for name in ("ra.buy_hp", "ra.buy_rg", "ra.back_power", "ra.asy_power", "ra.nh3_prod", "ra.nh3_sell"):
        b.var(name)
    b.var("ra.h2_buf", 0.0, p.h2_buf_cap)
    b.var("ra.nh3_store", 0.0, p.nh3_store_cap)
    if p.hsb_enabled:
        b.var("ra.pro", 0.0, 1.0)
        b.var("ra.by", 0.0, 1.0)
    else:
        b.var("ra.pro", 1.0, 1.0)
        b.var("ra.by", 0.0, 0.0)
    b.var("ra.off", 0.0, 1.0)
    b.var("ra.su", 0.0, 1.0)
    b.var("ra.sd", 0.0, 1.0)

    # backup + purchased electricity covers synthesis load and standby load
    b.rows(
        "eq",
        np.zeros(T),
        ("ra.back_power", 1.0, t),
        ("ra.buy_rg", 1.0, t),
        ("ra.asy_power", -1.0, t),
        ("ra.by", -p.hsb_power, t),
    )
    b.rows("eq", np.zeros(T), ("ra.asy_power", 1.0, t), ("ra.nh3_prod", -p.elec_per_nh3, t))
    b.storage("ra.h2_buf", p.h2_buf_init * p.h2_buf_cap, [("ra.buy_hp", 1.0), ("ra.nh3_prod", -p.h2_per_nh3)], dt)
    b.storage(
        "ra.nh3_store", p.nh3_store_init * p.nh3_store_cap, [("ra.nh3_prod", 1.0), ("ra.nh3_sell", -1.0)], dt
    )
    b.rows("eq", np.ones(T), ("ra.pro", 1.0, t), ("ra.by", 1.0, t), ("ra.off", 1.0, t))

    # production window while producing, zero otherwise
    b.rows("ineq", np.zeros(T), ("ra.nh3_prod", 1.0, t), ("ra.pro", -p.load_max * cap, t))
    b.rows("ineq", np.zeros(T), ("ra.nh3_prod", -1.0, t), ("ra.pro", p.load_min * cap, t))

    # ramping between consecutive producing steps; released on entry to / exit from Production
    if T > 1:
        t1 = t[1:]
        big = p.load_max * np.maximum(cap[1:], cap[:-1])
        lim = p.ramp_limit * cap[1:] + big
        r = np.arange(T - 1)
        b.rows("ineq", lim, ("ra.nh3_prod", 1.0, t1), ("ra.nh3_prod", -1.0, t1 - 1), ("ra.pro", big, t1 - 1, r))
        b.rows("ineq", lim, ("ra.nh3_prod", -1.0, t1), ("ra.nh3_prod", 1.0, t1 - 1), ("ra.pro", big, t1, r))

    off0 = 1.0 if p.initial_state.name == "IDLE" else 0.0
    on0 = 1.0 - off0
    # startup: pro_t + by_t + off_{t-1} - 1 <= su_t
    rhs = np.ones(T)
    rhs[0] -= off0
    b.rows(
        "ineq",
        rhs,
        ("ra.pro", 1.0, t),
        ("ra.by", 1.0, t),
        ("ra.off", 1.0, t[:-1], t[1:]),
        ("ra.su", -1.0, t),
    )
    # shutdown: pro_{t-1} + by_{t-1} + off_t - 1 <= sd_t
    rhs = np.ones(T)
    rhs[0] -= on0
    b.rows(
        "ineq",
        rhs,
        ("ra.pro", 1.0, t[:-1], t[1:]),
        ("ra.by", 1.0, t[:-1], t[1:]),
        ("ra.off", 1.0, t),
        ("ra.sd", -1.0, t),
    )
    # minimum downtime, window truncated at the horizon
    D = p.min_downtime
    for tt in range(T):
        L = downtime_window(tt, T, D)
        if L <= 1:
            continue
        win = np.arange(tt, tt + L)
        terms = [("ra.off", -1.0, win, np.zeros(L, dtype=int)), ("ra.off", float(L), [tt], [0])]
        if tt == 0:
            b.rows("ineq", [L * off0], *terms)
        else:
            b.rows("ineq", [0.0], *terms, ("ra.off", -float(L), [tt - 1], [0]))

    b.linear("ra.buy_hp", prices.h_hp_ra * dt)
    b.linear("ra.buy_rg", prices.e_rg_ra * dt)
    b.linear("ra.back_power", s.backup_price * dt)
    b.linear("ra.nh3_sell", -s.ammonia_price * dt)
    b.linear("ra.su", p.startup_cost)


def _check_others(others: DecisionProfile, T: int):
    if others.T != T or others.ra.schedule.T != T:
        raise ValueError(f"opponent series have length {others.T}, expected T={T}")


def _penalize(b: _Builder, own: str, other_value: np.ndarray, w: float, rho: float):
    # (own - other)^2 in either orientation expands to the same quadratic in `own`
    b.quadratic(own, rho * w)
    b.linear(own, -rho * w * other_value)
    b.c0 += 0.5 * rho * w * float(other_value @ other_value)


def _market_penalty_const(b: _Builder, resid: np.ndarray, w: float, rho: float):
    b.c0 += 0.5 * rho * w * float(resid @ resid)


def build_rg_subproblem(
    p: RgParams, s: ScenarioData, prices: PriceVector, others: DecisionProfile, rho: float, weights=None
) -> CanonicalQP:
    """RG's penalized best response against the opponents in ``others``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    _check_others(others, s.T)
    w = _weights(weights)
    b = _Builder(s.T)
    _rg_block(b, p, s, prices)
    _penalize(b, "rg.sell_hp", others.hp.buy_rg, w[0], rho)
    _penalize(b, "rg.sell_ra", others.ra.buy_rg, w[1], rho)
    _market_penalty_const(b, others.hp.sell_ra - others.ra.buy_hp, w[2], rho)
    return b.build()


def build_hp_subproblem(
    p: HpParams, s: ScenarioData, prices: PriceVector, others: DecisionProfile, rho: float, weights=None
) -> CanonicalQP:
    if not rho > 0:
        raise ValueError("rho must be positive")
    _check_others(others, s.T)
    w = _weights(weights)
    b = _Builder(s.T)
    _hp_block(b, p, s, prices)
    _penalize(b, "hp.buy_rg", others.rg.sell_hp, w[0], rho)
    _market_penalty_const(b, others.rg.sell_ra - others.ra.buy_rg, w[1], rho)
    _penalize(b, "hp.sell_ra", others.ra.buy_hp, w[2], rho)
    return b.build()


def _ra_miqp(b: _Builder) -> CanonicalMIQP:
    qp = b.build()
    binaries = np.concatenate([qp.columns("ra." + f) for f in SCHEDULE_FIELDS])
    branch = np.concatenate([qp.columns("ra." + f) for f in ("pro", "by", "off")])
    return CanonicalMIQP(qp, binaries, branch)


def build_ra_subproblem(
    p: RaParams, s: ScenarioData, prices: PriceVector, others: DecisionProfile, rho: float, weights=None
) -> CanonicalMIQP:
    if not rho > 0:
        raise ValueError("rho must be positive")
    _check_others(others, s.T)
    w = _weights(weights)
    b = _Builder(s.T)
    _ra_block(b, p, s, prices)
    _market_penalty_const(b, others.rg.sell_hp - others.hp.buy_rg, w[0], rho)
    _penalize(b, "ra.buy_rg", others.rg.sell_ra, w[1], rho)
    _penalize(b, "ra.buy_hp", others.hp.sell_ra, w[2], rho)
    return _ra_miqp(b)


def build_own_problem(k: str, params: MarketParams, s: ScenarioData, prices: PriceVector):
    """Stakeholder ``k``'s unpenalized problem at fixed prices."""
    b = _Builder(s.T)
    {"rg": _rg_block, "hp": _hp_block, "ra": _ra_block}[k](b, params.for_player(k), s, prices)
    return _ra_miqp(b) if k == "ra" else b.build()


def build_subproblem(k: str, params: MarketParams, s: ScenarioData, prices, others, rho, weights=None):
    fn = {"rg": build_rg_subproblem, "hp": build_hp_subproblem, "ra": build_ra_subproblem}[k]
    return fn(params.for_player(k), s, prices, others, rho, weights)


def build_cooperative_problem(params: MarketParams, s: ScenarioData) -> CanonicalMIQP:
    """Joint cost minimization with both markets cleared exactly.

    Internal transfers cancel, so only degradation, backup power, startup cost
    and ammonia revenue remain in the objective.
    """
    zero = PriceVector(np.zeros(s.T), np.zeros(s.T), np.zeros(s.T))
    b = _Builder(s.T)
    _rg_block(b, params.rg, s, zero)
    _hp_block(b, params.hp, s, zero)
    _ra_block(b, params.ra, s, zero)
    t = np.arange(s.T)
    z = np.zeros(s.T)
    b.rows("eq", z, ("rg.sell_hp", 1.0, t), ("hp.buy_rg", -1.0, t))
    b.rows("eq", z, ("rg.sell_ra", 1.0, t), ("ra.buy_rg", -1.0, t))
    b.rows("eq", z, ("hp.sell_ra", 1.0, t), ("ra.buy_hp", -1.0, t))
    return _ra_miqp(b)


# --------------------------------------------------------------------------
# packing


def pack(problem, x: DecisionProfile) -> np.ndarray:
    """Column vector of ``problem`` filled from the matching fields of ``x``."""
    qp = problem.base if isinstance(problem, CanonicalMIQP) else problem
    vec = np.zeros(qp.n)
    for name, (s, e) in qp.var_map.items():
        k, f = name.split(".")
        dec = getattr(x, k)
        vec[s:e] = getattr(dec.schedule, f) if f in SCHEDULE_FIELDS else getattr(dec, f)
    return vec


def unpack(problem, vec, base: DecisionProfile | None = None) -> DecisionProfile:
    """Write the columns of ``vec`` back into a profile (other players from ``base``)."""
    qp = problem.base if isinstance(problem, CanonicalMIQP) else problem
    vec = np.asarray(vec, dtype=float)
    if base is None:
        base = DecisionProfile.zeros(qp.T)
    by_player: dict[str, dict[str, np.ndarray]] = {}
    for name, (s, e) in qp.var_map.items():
        k, f = name.split(".")
        by_player.setdefault(k, {})[f] = vec[s:e].copy()
    out = base
    for k, vals in by_player.items():
        old = getattr(base, k)
        kwargs = {f: vals.get(f, getattr(old, f)) for f in series_fields(_DECISION_TYPES[k])}
        if k == "ra":
            sched = old.schedule
            kwargs["schedule"] = AsySchedule(
                *(vals.get(f, getattr(sched, f)) for f in SCHEDULE_FIELDS),
                initial_state=sched.initial_state,
            )
        out = out.replace_player(k, _DECISION_TYPES[k](**kwargs))
    return out


# --------------------------------------------------------------------------
# evaluation


def evaluate_cost(k: str, x_k, prices: PriceVector, scenario: ScenarioData, params) -> float:
    """Bare cost (negative profit) of stakeholder ``k`` in CNY, no penalty."""
    dt = scenario.dt
    if isinstance(x_k, DecisionProfile):
        x_k = getattr(x_k, k)
    if isinstance(params, MarketParams):
        params = params.for_player(k)
    if k == "rg":
        flow = -x_k.sell_hp * prices.e_rg_hp - x_k.sell_ra * prices.e_rg_ra + params.deg_cost * x_k.bes_discharge
        return float(np.sum(flow) * dt)
    if k == "hp":
        flow = x_k.buy_rg * prices.e_rg_hp + params.deg_cost * x_k.bes_discharge - x_k.sell_ra * prices.h_hp_ra
        return float(np.sum(flow) * dt)
    if k == "ra":
        flow = (
            x_k.buy_hp * prices.h_hp_ra
            + x_k.buy_rg * prices.e_rg_ra
            + x_k.back_power * scenario.backup_price
            - x_k.nh3_sell * scenario.ammonia_price
        )
        return float(np.sum(flow) * dt + params.startup_cost * np.sum(x_k.schedule.su))
    raise KeyError(f"unknown stakeholder {k!r}")


def clearing_penalty(x: DecisionProfile, rho: float, weights=None) -> float:
    w = _weights(weights)
    phi = market_blocks(clearing_residual(x))
    return float(0.5 * rho * np.sum(w * np.sum(phi * phi, axis=0)))


def evaluate_penalized_cost(
    k: str, x: DecisionProfile, prices: PriceVector, scenario: ScenarioData, params: MarketParams, rho: float, weights=None
) -> float:
    if not rho > 0:
        raise ValueError("rho must be positive")
    return evaluate_cost(k, x, prices, scenario, params) + clearing_penalty(x, rho, weights)


def evaluate_potential(
    x: DecisionProfile, prices: PriceVector, scenario: ScenarioData, params: MarketParams, rho: float, weights=None
) -> float:
    if not rho > 0:
        raise ValueError("rho must be positive")
    total = sum(evaluate_cost(k, x, prices, scenario, params) for k in ("rg", "hp", "ra"))
    return total + clearing_penalty(x, rho, weights)


def cooperative_cost(x: DecisionProfile, scenario: ScenarioData, params: MarketParams) -> float:
    """Sum of bare costs with internal transfers removed (exact when markets clear)."""
    zero = PriceVector(np.zeros(scenario.T), np.zeros(scenario.T), np.zeros(scenario.T))
    return sum(evaluate_cost(k, x, zero, scenario, params) for k in ("rg", "hp", "ra"))


def var_map_table(problem) -> dict:
    qp = problem.base if isinstance(problem, CanonicalMIQP) else problem
    return {name: [int(s), int(e)] for name, (s, e) in qp.var_map.items()}


def dump_problem(problem, path) -> None:
    """Write a problem as plain-text coordinate lists for external cross-checks.

    Sections: ``n``, ``c0``, ``P`` (i j v), ``q``, ``A`` (i j v), ``b``,
    ``E`` (i j v), ``d``, ``lb``, ``ub``, ``binary``; each header line is
    followed by its entries, one per line, and ``end``.
    """
    qp = problem.base if isinstance(problem, CanonicalMIQP) else problem
    binaries = problem.binary_idx if isinstance(problem, CanonicalMIQP) else np.zeros(0, dtype=int)

    def triplets(M):
        C = sp.coo_matrix(M)
        return [f"{i} {j} {v!r}" for i, j, v in zip(C.row, C.col, C.data)]

    def vec(v):
        return [repr(float(a)) for a in v]

    sections = [
        ("n", [str(qp.n)]),
        ("c0", [repr(qp.c0)]),
        ("P", triplets(qp.P)),
        ("q", vec(qp.q)),
        ("A", triplets(qp.A)),
        ("b", vec(qp.b)),
        ("E", triplets(qp.E)),
        ("d", vec(qp.d)),
        ("lb", vec(qp.lb)),
        ("ub", vec(qp.ub)),
        ("binary", [str(int(i)) for i in binaries]),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        for name, lines in sections:
            fh.write(f"{name} {len(lines)}\n")
            fh.writelines(line + "\n" for line in lines)
            fh.write("end\n")
