import numpy as np
import pytest

from p2a_market.model import AsyState

P, H, I = AsyState.PRODUCTION, AsyState.HSB, AsyState.IDLE


def simulate_state_machine(seq, min_downtime, initial_state=P) -> bool:
    """Walk the sequence with a downtime counter; True if no commitment is broken."""
    prev, remaining = initial_state, 0
    for s in seq:
        if remaining > 0:
            if s != I:
                return False
            remaining -= 1
        elif s == I and prev != I:
            remaining = min_downtime - 1
        prev = s
    return True


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(label: str, ok: bool, detail: str = "") -> bool:
    """Print and keep one verdict line per acceptance criterion."""
    line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_profile(rng, T, initial_state=P):
    """Arbitrary nonnegative profile with an integral (not necessarily feasible) schedule."""
    from p2a_market.model import (
        AsySchedule,
        DecisionProfile,
        HpDecision,
        RaDecision,
        RgDecision,
        series_fields,
    )

    def bundle(cls, **extra):
        return cls(*(rng.uniform(0, 80, T) for _ in series_fields(cls)), **extra)

    sched = AsySchedule.from_states(rng.integers(0, 3, T), initial_state)
    x = DecisionProfile(bundle(RgDecision), bundle(HpDecision), bundle(RaDecision, schedule=sched))
    # hydrogen volumes live on a larger scale than power
    ra = x.ra
    from dataclasses import replace

    return x.replace_player("ra", replace(ra, buy_hp=ra.buy_hp * 100)).replace_player(
        "hp", replace(x.hp, sell_ra=x.hp.sell_ra * 100)
    )


def random_prices(rng, T):
    from p2a_market.model import PriceVector

    return PriceVector(rng.uniform(100, 600, T), rng.uniform(100, 600, T), rng.uniform(0.5, 3.0, T))
