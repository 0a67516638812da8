"""Study configuration: one YAML (or JSON) tree with sections rg/hp/ra/solver.

Schema (every key optional; omitted keys keep the dataclass defaults)::

    rg:
      rated_wind: float           # MW, clips wind availability
      rated_solar: float          # MW, clips solar availability
      bes_energy_cap: float       # MWh
      bes_power_cap: float        # MW
      bes_eff_charge: float       # (0, 1]
      bes_eff_discharge: float    # (0, 1]
      bes_soc_init: float         # fraction of energy cap, also the end target
      deg_cost: float             # CNY/MWh discharged
    hp:
      elz_power_cap: float        # MW
      elz_min_load: float         # fraction of cap, [0, 1)
      elz_spec_consumption: float # MWh per Nm3
      h2_store_cap: float         # Nm3
      h2_store_init: float        # fraction
      h2_delivery_cap: float      # Nm3/h
      bes_*: as in rg
      deg_cost: float
    ra:
      asy_cap: float | [float]    # t NH3/h, scalar or one value per step
      load_min: float
      load_max: float
      ramp_limit: float           # fraction of cap per step
      hsb_power: float            # MW drawn in hot standby
      startup_cost: float         # CNY per cold start
      min_downtime: int           # steps
      h2_per_nh3: float           # Nm3 per t
      elec_per_nh3: float         # MWh per t
      h2_buf_cap: float           # Nm3
      h2_buf_init: float
      nh3_store_cap: float        # t
      nh3_store_init: float
      initial_state: Production | HSB | Idle
    solver:
      rho: float
      max_iters: int
      g1: float                   # CNY, potential-change tolerance
      g2: float                   # clearing-residual tolerance
      eps_bar: float              # BR acceptance, fraction of |potential|
      eps_floor: float            # CNY
      electricity_ref_price: float
      hydrogen_start_price: float # CNY/Nm3; default is ammonia parity
      market_weights: [float, float, float]
      qp_tol: float
      ra_response: approx | exact
      compute_gaps: bool
      bnb: {max_nodes: int, time_limit: float, gap_tol: float}   # plant best responses and gaps
      cooperative_time_limit: float  # seconds for the M3 joint solve

``ra.hsb_enabled`` is not read from the file; the study mode sets it.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .equilibrium import SolverConfig
from .model import HpParams, MarketParams, PriceVector, RaParams, RgParams, ScenarioData
from .solvers import BnbBudget

SECTIONS = ("rg", "hp", "ra", "solver")


class ConfigError(ValueError):
    """The config file is unreadable or names unknown keys."""


@dataclass(frozen=True)
class StudyConfig:
    params: MarketParams
    solver: SolverConfig
    hydrogen_start_price: float | None = None
    raw: dict | None = None

    def solver_for(self, scenario: ScenarioData) -> SolverConfig:
        """Solver settings with the hydrogen starting price resolved for ``scenario``."""
        if self.hydrogen_start_price is None or self.solver.initial_prices is not None:
            return self.solver
        T = scenario.T
        start = PriceVector(
            np.full(T, self.solver.electricity_ref_price),
            np.full(T, self.solver.electricity_ref_price),
            np.full(T, self.hydrogen_start_price),
        )
        return replace(self.solver, initial_prices=start)


def _section(cls, data, name):
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)} - {"hsb_enabled"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"section {name!r}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def _solver(data) -> tuple[SolverConfig, float | None]:
    data = dict(data or {})
    if not isinstance(data, dict):
        raise ConfigError("section 'solver' must be a mapping")
    h2_price = data.pop("hydrogen_start_price", None)
    bnb = data.pop("bnb", None)
    known = {f.name for f in fields(SolverConfig)} - {"initial_prices", "bnb_budget"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"section 'solver': unknown keys {unknown}")
    try:
        if bnb is not None:
            data["bnb_budget"] = _section(BnbBudget, bnb, "solver.bnb")
        if "market_weights" in data:
            data["market_weights"] = tuple(data["market_weights"])
        cfg = SolverConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section 'solver': {exc}") from exc
    if h2_price is not None:
        h2_price = float(h2_price)
    return cfg, h2_price


def parse_config(tree: dict | None) -> StudyConfig:
    tree = tree or {}
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    unknown = sorted(set(tree) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown sections {unknown}; expected {list(SECTIONS)}")
    params = MarketParams(
        rg=_section(RgParams, tree.get("rg"), "rg"),
        hp=_section(HpParams, tree.get("hp"), "hp"),
        ra=_section(RaParams, tree.get("ra"), "ra"),
    )
    solver, h2_price = _solver(tree.get("solver"))
    return StudyConfig(params, solver, h2_price, tree)


def load_config(path) -> StudyConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(tree)


def _plain(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    if isinstance(v, tuple):
        return list(v)
    if hasattr(v, "name") and hasattr(v, "value"):  # enums
        return v.name.title() if v.name != "HSB" else "HSB"
    return v


def config_to_dict(cfg: StudyConfig) -> dict:
    """Echo of the effective settings, suitable for the run manifest."""
    out = {}
    for name in ("rg", "hp", "ra"):
        section = getattr(cfg.params, name)
        # hsb_enabled follows the study mode, which the manifest records separately
        out[name] = {f.name: _plain(getattr(section, f.name)) for f in fields(section) if f.name != "hsb_enabled"}
    s = cfg.solver
    solver = {
        f.name: _plain(getattr(s, f.name))
        for f in fields(s)
        if f.name not in ("initial_prices", "bnb_budget")
    }
    solver["bnb"] = {f.name: getattr(s.bnb_budget, f.name) for f in fields(s.bnb_budget)}
    solver["hydrogen_start_price"] = cfg.hydrogen_start_price
    out["solver"] = solver
    return out
