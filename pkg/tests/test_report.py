import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from p2a_market.model import PriceVector
from p2a_market.report import (
    ComparisonReport,
    aggregate_revenues,
    average_price,
    emit_convergence_trace,
    format_gain,
    profit_gain,
    read_prices,
    read_profile,
    read_trace,
    write_json,
    write_prices,
    write_profile,
)

from conftest import H, random_prices, random_profile


def test_aggregate_revenues_table_values():
    assert round(aggregate_revenues([345.12, 55.97, -2.41]), 2) == 398.68
    assert round(aggregate_revenues({"rg": 370.33, "hp": 180.94, "ra": 7.67}), 2) == 558.94


def test_aggregate_revenues_rejects_nonfinite():
    with pytest.raises(ValueError):
        aggregate_revenues([1.0, math.nan, 2.0])


@given(st.lists(st.floats(-1e9, 1e9), min_size=3, max_size=3))
def test_aggregate_is_exact_sum(vals):
    assert aggregate_revenues(vals) == math.fsum(vals)


@pytest.mark.parametrize(
    "base, new, text",
    [(1.44, 1.73, "+20.14%"), (39.43, 39.34, "-0.23%"), (0.0, 3.0, "n/a"), (-2.41, 3.33, "n/a")],
)
def test_profit_gain(base, new, text):
    assert format_gain(profit_gain(base, new)) == text


def test_average_price_weights_by_volume():
    assert average_price([2.0, 4.0], [1.0, 3.0]) == 3.5
    # zero volume everywhere falls back to the plain mean
    assert average_price([2.0, 4.0], [0.0, 0.0]) == 3.0
    with pytest.raises(ValueError):
        average_price([1.0], [1.0, 2.0])


def test_trace_round_trip(tmp_path):
    records = [
        dict(iteration=0, phi=5.0, delta_phi=None, residual_norm=2.0, J_rg=1.0, J_hp=2.0, J_ra=3.0,
             eps_rg=None, eps_hp=None, eps_ra=None, ra_path="init"),
        dict(iteration=1, phi=4.5, delta_phi=-0.5, residual_norm=0.1, J_rg=0.1, J_hp=0.2, J_ra=1 / 3,
             eps_rg=0.0, eps_hp=1e-12, eps_ra=0.25, ra_path="approx"),
    ]
    path = emit_convergence_trace(records, tmp_path / "trace.csv")
    assert read_trace(path) == records
    with pytest.raises(ValueError):
        emit_convergence_trace([], tmp_path / "empty.csv")


def test_profile_and_prices_round_trip(tmp_path, rng):
    x = random_profile(rng, 6, initial_state=H)
    back = read_profile(write_profile(x, tmp_path / "eq.csv"), H)
    for k in ("rg", "hp", "ra"):
        a, b = getattr(x, k), getattr(back, k)
        for f in a.__dataclass_fields__:
            if f != "schedule":
                assert np.array_equal(getattr(a, f), getattr(b, f))
    assert np.array_equal(x.ra.schedule.states(), back.ra.schedule.states())
    p = random_prices(rng, 6)
    assert np.array_equal(read_prices(write_prices(p, tmp_path / "p.csv")).stacked(), p.stacked())


def test_profile_csv_names_states(tmp_path, rng):
    x = random_profile(rng, 3)
    lines = write_profile(x, tmp_path / "eq.csv").read_text().splitlines()
    assert lines[0].startswith("t,rg.sell_hp,")
    assert lines[0].endswith(",ra.state")
    assert {ln.rsplit(",", 1)[1] for ln in lines[1:]} <= {"Production", "HSB", "Idle"}


def test_comparison_markdown_and_gains():
    rep = ComparisonReport()
    rep.add("M1", "M1", {"rg": 3451200.0, "hp": 559700.0, "ra": -24100.0}, prices={"electricity": 300.0, "hydrogen": 1.7})
    rep.add("M2", "M2", {"rg": 3412600.0, "hp": 544400.0, "ra": 33300.0})
    rep.add("M3", "M3", None, total=4003000.0)
    gains = rep.compute_gains()
    assert gains["ra"] is None
    assert format_gain(gains["rg"]) == "-1.12%"
    md = rep.to_markdown()
    assert "| M1 | {345.12, 55.97, -2.41} | 398.68 | {300.000, 1.700} |" in md
    assert "| M3 | / | 400.30 | / |" in md
    assert "RA n/a" in md


def test_write_json_handles_numpy(tmp_path):
    path = write_json({"a": np.float64(1.5), "b": np.arange(2), "c": tmp_path}, tmp_path / "x.json")
    assert json.loads(path.read_text()) == {"a": 1.5, "b": [0, 1], "c": str(tmp_path)}


def test_prices_round_trip_exact_repr(tmp_path):
    p = PriceVector([0.1 + 0.2], [1 / 3], [2.0 / 7])
    back = read_prices(write_prices(p, tmp_path / "p.csv"))
    assert back.e_rg_hp[0] == 0.1 + 0.2 and back.e_rg_ra[0] == 1 / 3
