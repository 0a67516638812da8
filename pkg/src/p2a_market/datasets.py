"""Bundled desk scenarios and a random instance generator for tests and demos."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .model import HpParams, MarketParams, RaParams, RgParams, ScenarioData, TimeGrid, load_scenario

DESK_SCENARIOS = ("scarce", "abundant")

# Hydrogen residuals are in Nm3/h while electricity residuals are in MW; one MW
# of electrolysis makes ~200 Nm3/h, so the hydrogen weight is 1/200**2.
DESK_WEIGHTS = (1.0, 1.0, 2.5e-5)
DESK_RHO = 100.0


def data_path(name: str):
    return resources.files("p2a_market") / "data" / name


def load_desk_scenario(kind: str = "scarce") -> ScenarioData:
    if kind not in DESK_SCENARIOS:
        raise ValueError(f"unknown desk scenario {kind!r}; choose from {DESK_SCENARIOS}")
    with resources.as_file(data_path(f"{kind}_week.csv")) as path:
        return load_scenario(path)


SCARCE_LULLS = ((20, 9), (70, 11), (100, 7), (140, 10))


def make_week_scenario(kind: str = "scarce", seed: int = 7, T: int = 168, lulls=SCARCE_LULLS) -> ScenarioData:
    """Hourly wind/solar availability with diurnal solar and multi-hour wind lulls.

    ``"scarce"`` has low mean wind and long lulls; ``"abundant"`` keeps wind
    high enough to run the synthesis loop near full load throughout.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(T)
    hour = t % 24
    solar_shape = np.clip(np.sin(np.pi * (hour - 6) / 12), 0, None)
    if kind == "scarce":
        wind_cf = 0.42 + 0.25 * np.sin(2 * np.pi * t / 41.0) + 0.08 * rng.standard_normal(T)
        for start, length in lulls:
            wind_cf[start : start + length] = 0.01
        wind = 110.0 * np.clip(wind_cf, 0, 1)
        solar = 45.0 * solar_shape * rng.uniform(0.5, 1.0, T)
    elif kind == "abundant":
        wind_cf = 0.75 + 0.15 * np.sin(2 * np.pi * t / 41.0) + 0.05 * rng.standard_normal(T)
        wind = 150.0 * np.clip(wind_cf, 0, 1)
        solar = 60.0 * solar_shape * rng.uniform(0.8, 1.0, T)
    else:
        raise ValueError(f"unknown scenario kind {kind!r}")
    nh3_price = 3500.0 + 150.0 * np.sin(2 * np.pi * t / T)
    backup = np.where((hour >= 8) & (hour < 22), 750.0, 450.0)
    return ScenarioData(
        np.round(wind, 4), np.round(solar, 4), np.round(nh3_price, 4), backup, TimeGrid(T, 1.0)
    )


def desk_params(hsb_enabled: bool = True) -> MarketParams:
    return MarketParams(
        rg=RgParams(bes_energy_cap=40.0, bes_power_cap=10.0, deg_cost=20.0),
        hp=HpParams(elz_power_cap=110.0, h2_store_cap=120_000.0, h2_delivery_cap=25_000.0),
        ra=RaParams(
            asy_cap=10.0,
            load_min=0.3,
            load_max=1.0,
            ramp_limit=0.2,
            hsb_power=0.3,
            startup_cost=30_000.0,
            min_downtime=6,
            h2_buf_cap=60_000.0,
            nh3_store_cap=600.0,
            hsb_enabled=hsb_enabled,
        ),
    )


def random_instance(seed: int, T: int = 8) -> tuple[ScenarioData, MarketParams]:
    """Small randomized market for property and acceptance checks."""
    rng = np.random.default_rng(seed)
    wind = rng.uniform(0, 120, T)
    solar = rng.uniform(0, 60, T) * (np.sin(np.arange(T) / 3) > 0)
    scenario = ScenarioData(wind, solar, rng.uniform(3000, 4000, T), rng.uniform(400, 800, T), TimeGrid(T))
    params = MarketParams(
        rg=RgParams(
            bes_energy_cap=float(rng.uniform(0, 30)), bes_power_cap=float(rng.uniform(0, 10)), deg_cost=20.0
        ),
        hp=HpParams(h2_store_cap=float(rng.uniform(2e4, 1e5))),
        ra=RaParams(
            min_downtime=int(rng.integers(1, 4)),
            startup_cost=float(rng.uniform(0, 5000)),
            h2_buf_cap=float(rng.uniform(1e4, 5e4)),
            hsb_power=float(rng.uniform(0.5, 3.0)),
        ),
    )
    return scenario, params
