"""Domain types for the renewable power-to-ammonia market.

Three stakeholders trade in three markets:

* ``rg -> hp`` electricity (MW), priced by ``PriceVector.e_rg_hp``
* ``rg -> ra`` electricity (MW), priced by ``PriceVector.e_rg_ra``
* ``hp -> ra`` hydrogen (Nm3/h), priced by ``PriceVector.h_hp_ra``

The ammonia synthesis unit (ASY) inside RA moves between three states,
Production, HSB (hot standby) and Idle, with startup/shutdown actions and a
minimum downtime once it goes Idle.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

STAKEHOLDERS = ("rg", "hp", "ra")
MARKETS = ("e_rg_hp", "e_rg_ra", "h_hp_ra")
SCENARIO_COLUMNS = (
    "t",
    "wind_mw",
    "solar_mw",
    "ammonia_price_cny_per_t",
    "backup_price_cny_per_mwh",
)


class ScenarioError(ValueError):
    """Raised when a scenario file or series fails validation."""


class AsyState(enum.IntEnum):
    PRODUCTION = 0
    HSB = 1
    IDLE = 2

    @classmethod
    def parse(cls, value) -> "AsyState":
        if isinstance(value, AsyState):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().upper()
        aliases = {"PRO": "PRODUCTION", "BY": "HSB", "OFF": "IDLE", "STANDBY": "HSB"}
        return cls[aliases.get(key, key)]


def _series(values, name: str, length: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name}: expected length {length}, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    T: int
    dt: float = 1.0

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"TimeGrid.T must be a positive integer, got {self.T}")
        if not self.dt > 0:
            raise ValueError(f"TimeGrid.dt must be positive, got {self.dt}")

    @property
    def horizon(self) -> float:
        return self.T * self.dt


@dataclass(frozen=True)
class ScenarioData:
    """Exogenous series. Renewable availability is in MW, prices in CNY."""

    wind_avail: np.ndarray
    solar_avail: np.ndarray
    ammonia_price: np.ndarray
    backup_price: np.ndarray
    grid: TimeGrid = None

    def __post_init__(self):
        n = np.asarray(self.wind_avail).reshape(-1).shape[0]
        grid = self.grid if self.grid is not None else TimeGrid(n)
        object.__setattr__(self, "grid", grid)
        for f in ("wind_avail", "solar_avail", "ammonia_price", "backup_price"):
            arr = _series(getattr(self, f), f, grid.T)
            if not np.all(np.isfinite(arr)):
                raise ScenarioError(f"{f}: non-finite values")
            bad = np.flatnonzero(arr < 0)
            if bad.size:
                raise ScenarioError(f"{f}: negative value at index {bad[0]}")
            object.__setattr__(self, f, arr)

    @property
    def T(self) -> int:
        return self.grid.T

    @property
    def dt(self) -> float:
        return self.grid.dt

    def renewable_avail(self) -> np.ndarray:
        return self.wind_avail + self.solar_avail


@dataclass(frozen=True)
class RgParams:
    rated_wind: float = float("inf")
    rated_solar: float = float("inf")
    bes_energy_cap: float = 0.0
    bes_power_cap: float = 0.0
    bes_eff_charge: float = 0.95
    bes_eff_discharge: float = 0.95
    bes_soc_init: float = 0.5
    deg_cost: float = 20.0

    def __post_init__(self):
        _check_bes(self, "RgParams")
        if self.rated_wind < 0 or self.rated_solar < 0:
            raise ValueError("RgParams: rated capacities must be >= 0")


@dataclass(frozen=True)
class HpParams:
    elz_power_cap: float = 100.0
    elz_min_load: float = 0.0
    elz_spec_consumption: float = 0.005  # MWh per Nm3 (5.0 kWh/Nm3)
    h2_store_cap: float = 100_000.0
    h2_store_init: float = 0.5
    h2_delivery_cap: float = 30_000.0
    bes_energy_cap: float = 0.0
    bes_power_cap: float = 0.0
    bes_eff_charge: float = 0.95
    bes_eff_discharge: float = 0.95
    bes_soc_init: float = 0.5
    deg_cost: float = 20.0

    def __post_init__(self):
        _check_bes(self, "HpParams")
        if min(self.elz_power_cap, self.h2_store_cap, self.h2_delivery_cap) < 0:
            raise ValueError("HpParams: capacities must be >= 0")
        if not 0 <= self.elz_min_load < 1:
            raise ValueError("HpParams: elz_min_load must lie in [0, 1)")
        if not self.elz_spec_consumption > 0:
            raise ValueError("HpParams: elz_spec_consumption must be > 0")
        if not 0 <= self.h2_store_init <= 1:
            raise ValueError("HpParams: h2_store_init must lie in [0, 1]")


@dataclass(frozen=True)
class RaParams:
    asy_cap: float | tuple = 10.0  # t NH3 per hour; scalar or per-step series
    load_min: float = 0.30
    load_max: float = 1.0
    ramp_limit: float = 0.2
    hsb_power: float = 1.0
    startup_cost: float = 20_000.0
    min_downtime: int = 4
    h2_per_nh3: float = 1970.0
    elec_per_nh3: float = 0.6
    h2_buf_cap: float = 50_000.0
    h2_buf_init: float = 0.5
    nh3_store_cap: float = 500.0
    nh3_store_init: float = 0.5
    hsb_enabled: bool = True
    initial_state: AsyState = AsyState.PRODUCTION

    def __post_init__(self):
        if not 0 < self.load_min <= self.load_max <= 1:
            raise ValueError("RaParams: need 0 < load_min <= load_max <= 1")
        if not self.ramp_limit > 0:
            raise ValueError("RaParams: ramp_limit must be > 0")
        if int(self.min_downtime) != self.min_downtime or self.min_downtime < 1:
            raise ValueError("RaParams: min_downtime must be an integer >= 1")
        if self.hsb_power < 0 or self.startup_cost < 0:
            raise ValueError("RaParams: hsb_power and startup_cost must be >= 0")
        if np.any(np.asarray(self.asy_cap, dtype=float) < 0):
            raise ValueError("RaParams: asy_cap must be >= 0")
        if not isinstance(self.asy_cap, (int, float)):
            object.__setattr__(self, "asy_cap", tuple(float(v) for v in self.asy_cap))
        object.__setattr__(self, "min_downtime", int(self.min_downtime))
        object.__setattr__(self, "initial_state", AsyState.parse(self.initial_state))

    def cap_series(self, T: int) -> np.ndarray:
        cap = np.asarray(self.asy_cap, dtype=float)
        if cap.ndim == 0:
            return np.full(T, float(cap))
        if cap.shape[0] != T:
            raise ValueError(f"RaParams.asy_cap: series length {cap.shape[0]} != T={T}")
        return cap


def _check_bes(p, name):
    for f in ("bes_eff_charge", "bes_eff_discharge"):
        v = getattr(p, f)
        if not 0 < v <= 1:
            raise ValueError(f"{name}.{f} must lie in (0, 1], got {v}")
    if p.bes_energy_cap < 0 or p.bes_power_cap < 0:
        raise ValueError(f"{name}: BES capacities must be >= 0")
    if not 0 <= p.bes_soc_init <= 1:
        raise ValueError(f"{name}.bes_soc_init must lie in [0, 1]")


@dataclass(frozen=True)
class MarketParams:
    rg: RgParams = field(default_factory=RgParams)
    hp: HpParams = field(default_factory=HpParams)
    ra: RaParams = field(default_factory=RaParams)

    def with_hsb(self, enabled: bool) -> "MarketParams":
        return replace(self, ra=replace(self.ra, hsb_enabled=enabled))

    def for_player(self, k: str):
        return getattr(self, k)


@dataclass(frozen=True)
class PriceVector:
    e_rg_hp: np.ndarray
    e_rg_ra: np.ndarray
    h_hp_ra: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.e_rg_hp).reshape(-1).shape[0]
        for f in MARKETS:
            arr = _series(getattr(self, f), f, n)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"PriceVector.{f}: non-finite prices")
            object.__setattr__(self, f, arr)

    @property
    def T(self) -> int:
        return self.e_rg_hp.shape[0]

    def stacked(self) -> np.ndarray:
        """Time-major stacking matching :func:`clearing_residual`."""
        return np.column_stack([self.e_rg_hp, self.e_rg_ra, self.h_hp_ra]).reshape(-1)

    @classmethod
    def from_stacked(cls, vec) -> "PriceVector":
        m = np.asarray(vec, dtype=float).reshape(-1, 3)
        return cls(m[:, 0], m[:, 1], m[:, 2])

    @classmethod
    def flat(cls, T: int, electricity: float, hydrogen) -> "PriceVector":
        h = np.broadcast_to(np.asarray(hydrogen, dtype=float), (T,))
        return cls(np.full(T, float(electricity)), np.full(T, float(electricity)), h)


@dataclass(frozen=True)
class AsySchedule:
    """Per-step ASY state indicators and startup/shutdown actions.

    Arrays are binary for an implementable schedule; relaxed iterates may carry
    fractional values, which :func:`validate_asy_schedule` reports.
    """

    pro: np.ndarray
    by: np.ndarray
    off: np.ndarray
    su: np.ndarray
    sd: np.ndarray
    initial_state: AsyState = AsyState.PRODUCTION

    def __post_init__(self):
        n = np.asarray(self.pro).reshape(-1).shape[0]
        for f in ("pro", "by", "off", "su", "sd"):
            object.__setattr__(self, f, _series(getattr(self, f), f, n))
        object.__setattr__(self, "initial_state", AsyState.parse(self.initial_state))

    @property
    def T(self) -> int:
        return self.pro.shape[0]

    @classmethod
    def from_states(cls, states: Sequence, initial_state=AsyState.PRODUCTION) -> "AsySchedule":
        st = np.array([int(AsyState.parse(s)) for s in states], dtype=int)
        su, sd = derive_transitions(st, initial_state)
        return cls(
            (st == AsyState.PRODUCTION).astype(float),
            (st == AsyState.HSB).astype(float),
            (st == AsyState.IDLE).astype(float),
            su,
            sd,
            initial_state,
        )

    def states(self) -> np.ndarray:
        """Per-step state as the argmax of (pro, by, off); ties go to the lower index."""
        return np.argmax(np.column_stack([self.pro, self.by, self.off]), axis=1)

    @classmethod
    def zeros(cls, T: int, initial_state=AsyState.PRODUCTION) -> "AsySchedule":
        z = np.zeros(T)
        return cls(np.ones(T), z, z, z, z, initial_state)


class _SeriesBundle:
    def __post_init__(self):
        n = None
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, AsySchedule):
                continue
            arr = _series(v, f.name, n)
            n = arr.shape[0]
            object.__setattr__(self, f.name, arr)


@dataclass(frozen=True)
class RgDecision(_SeriesBundle):
    sell_hp: np.ndarray
    sell_ra: np.ndarray
    bes_charge: np.ndarray
    bes_discharge: np.ndarray
    bes_soc: np.ndarray
    curtail: np.ndarray


@dataclass(frozen=True)
class HpDecision(_SeriesBundle):
    buy_rg: np.ndarray
    elz_power: np.ndarray
    h2_prod: np.ndarray
    h2_store: np.ndarray
    sell_ra: np.ndarray
    bes_charge: np.ndarray
    bes_discharge: np.ndarray
    bes_soc: np.ndarray


@dataclass(frozen=True)
class RaDecision(_SeriesBundle):
    buy_hp: np.ndarray
    buy_rg: np.ndarray
    back_power: np.ndarray
    asy_power: np.ndarray
    nh3_prod: np.ndarray
    nh3_sell: np.ndarray
    h2_buf: np.ndarray
    nh3_store: np.ndarray
    schedule: AsySchedule


def series_fields(cls) -> tuple[str, ...]:
    return tuple(f.name for f in fields(cls) if f.name != "schedule")


@dataclass(frozen=True)
class DecisionProfile:
    rg: RgDecision
    hp: HpDecision
    ra: RaDecision

    @property
    def T(self) -> int:
        return self.rg.sell_hp.shape[0]

    def replace_player(self, k: str, x_k) -> "DecisionProfile":
        return replace(self, **{k: x_k})

    @classmethod
    def zeros(cls, T: int, initial_state=AsyState.PRODUCTION) -> "DecisionProfile":
        z = np.zeros(T)
        return cls(
            RgDecision(*(z for _ in series_fields(RgDecision))),
            HpDecision(*(z for _ in series_fields(HpDecision))),
            RaDecision(*(z for _ in series_fields(RaDecision)), schedule=AsySchedule.zeros(T, initial_state)),
        )


# --------------------------------------------------------------------------
# scenario ingestion


def load_scenario(path, grid: TimeGrid | None = None) -> ScenarioData:
    """Read a scenario CSV (header ``t,wind_mw,solar_mw,...``).

    ``grid`` fixes the expected number of rows; when omitted the row count
    defines ``T`` with ``dt = 1``.
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in SCENARIO_COLUMNS if c not in header]
        if missing:
            raise ScenarioError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = {c: [] for c in SCENARIO_COLUMNS[1:]}
        for row_no, row in enumerate(reader, start=1):
            row = {k.strip(): v for k, v in row.items() if k is not None}
            for c in cols:
                raw = (row.get(c) or "").strip()
                try:
                    val = float(raw)
                except ValueError:
                    raise ScenarioError(f"{path}: row {row_no}, column {c}: cannot parse {raw!r}") from None
                if not np.isfinite(val):
                    raise ScenarioError(f"{path}: row {row_no}, column {c}: non-finite value")
                if val < 0:
                    raise ScenarioError(f"{path}: row {row_no}, column {c}: negative value {val}")
                cols[c].append(val)
    n_rows = len(cols["wind_mw"])
    if grid is None:
        if n_rows == 0:
            raise ScenarioError(f"{path}: no data rows")
        grid = TimeGrid(n_rows)
    elif n_rows != grid.T:
        raise ScenarioError(f"{path}: length mismatch, {n_rows} rows for T={grid.T}")
    return ScenarioData(
        cols["wind_mw"],
        cols["solar_mw"],
        cols["ammonia_price_cny_per_t"],
        cols["backup_price_cny_per_mwh"],
        grid,
    )


def write_scenario(scenario: ScenarioData, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SCENARIO_COLUMNS)
        for t in range(scenario.T):
            w.writerow(
                [
                    t,
                    repr(float(scenario.wind_avail[t])),
                    repr(float(scenario.solar_avail[t])),
                    repr(float(scenario.ammonia_price[t])),
                    repr(float(scenario.backup_price[t])),
                ]
            )


# --------------------------------------------------------------------------
# ASY state machine


def _prev_idle(initial_state) -> float:
    return 1.0 if AsyState.parse(initial_state) == AsyState.IDLE else 0.0


def derive_transitions(states: Iterable, initial_state=AsyState.PRODUCTION) -> tuple[np.ndarray, np.ndarray]:
    """Minimal startup/shutdown indicators for a state sequence."""
    idle = np.array([AsyState.parse(s) == AsyState.IDLE for s in states], dtype=float)
    prev = np.concatenate([[_prev_idle(initial_state)], idle[:-1]])
    su = ((prev == 1) & (idle == 0)).astype(float)
    sd = ((prev == 0) & (idle == 1)).astype(float)
    return su, sd


@dataclass(frozen=True)
class Violation:
    constraint: str
    t: int
    detail: str = ""


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def downtime_window(t: int, T: int, min_downtime: int) -> int:
    """Length of the Idle commitment window starting at ``t``, truncated at the horizon."""
    return min(min_downtime, T - t)


def validate_asy_schedule(s: AsySchedule, p: RaParams, tol: float = 1e-9) -> FeasibilityReport:
    out = []
    T = s.T
    for name in ("pro", "by", "off", "su", "sd"):
        arr = getattr(s, name)
        for t in np.flatnonzero(np.minimum(np.abs(arr), np.abs(arr - 1)) > tol):
            out.append(Violation("binary", int(t), f"{name}={arr[t]:g}"))
    part = s.pro + s.by + s.off
    for t in np.flatnonzero(np.abs(part - 1) > tol):
        out.append(Violation("partition", int(t), f"pro+by+off={part[t]:g}"))
    if not p.hsb_enabled:
        for t in np.flatnonzero(s.by > tol):
            out.append(Violation("hsb_disabled", int(t), "by=1 without HSB capability"))
    off_prev = np.concatenate([[_prev_idle(s.initial_state)], s.off[:-1]])
    on = s.pro + s.by
    on_prev = 1.0 - off_prev
    for t in np.flatnonzero(on + off_prev - 1 > s.su + tol):
        out.append(Violation("startup", int(t), "Idle -> on without su"))
    for t in np.flatnonzero(on_prev + s.off - 1 > s.sd + tol):
        out.append(Violation("shutdown", int(t), "on -> Idle without sd"))
    D = p.min_downtime
    for t in range(T):
        L = downtime_window(t, T, D)
        need = L * (s.off[t] - off_prev[t])
        if s.off[t : t + L].sum() < need - tol:
            out.append(Violation("min_downtime", t, f"Idle block shorter than {D}"))
    return FeasibilityReport(tuple(out))


# --------------------------------------------------------------------------
# market clearing


def clearing_residual(x: DecisionProfile) -> np.ndarray:
    """Offered minus purchased quantity, time-major: (rg-hp, rg-ra, hp-ra) per step.

    Positive entries mean oversupply in that market.
    """
    cols = np.column_stack(
        [
            x.rg.sell_hp - x.hp.buy_rg,
            x.rg.sell_ra - x.ra.buy_rg,
            x.hp.sell_ra - x.ra.buy_hp,
        ]
    )
    return cols.reshape(-1)


def market_blocks(phi: np.ndarray) -> np.ndarray:
    """Reshape a stacked residual/price vector into a (T, 3) array."""
    return np.asarray(phi, dtype=float).reshape(-1, 3)
