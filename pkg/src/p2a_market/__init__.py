"""Market equilibrium between a renewable generator, a hydrogen producer and an
ammonia plant with hot-standby capability, solved by iterative best response."""

from .equilibrium import (
    EquilibriumResult,
    SolverConfig,
    best_response,
    certify_epsilon_ne,
    equilibrium_gap,
    iterate_to_equilibrium,
    update_prices,
)
from .estimator import CooperativeBenchmark, MarketEquilibrium, check_scenario
from .model import (
    AsySchedule,
    AsyState,
    DecisionProfile,
    HpParams,
    MarketParams,
    PriceVector,
    RaParams,
    RgParams,
    ScenarioData,
    TimeGrid,
    clearing_residual,
    derive_transitions,
    load_scenario,
    validate_asy_schedule,
)
from .solvers import BnbBudget, round_and_repair, solve_exact_miqp, solve_qp

__version__ = "0.1.0"

__all__ = [
    "AsySchedule",
    "AsyState",
    "BnbBudget",
    "CooperativeBenchmark",
    "DecisionProfile",
    "EquilibriumResult",
    "HpParams",
    "MarketEquilibrium",
    "MarketParams",
    "PriceVector",
    "RaParams",
    "RgParams",
    "ScenarioData",
    "SolverConfig",
    "TimeGrid",
    "best_response",
    "certify_epsilon_ne",
    "check_scenario",
    "clearing_residual",
    "derive_transitions",
    "equilibrium_gap",
    "iterate_to_equilibrium",
    "load_scenario",
    "round_and_repair",
    "solve_exact_miqp",
    "solve_qp",
    "update_prices",
    "validate_asy_schedule",
]
