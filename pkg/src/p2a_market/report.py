"""Revenue arithmetic, run artifacts and comparison tables."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (
    STAKEHOLDERS,
    AsySchedule,
    DecisionProfile,
    HpDecision,
    PriceVector,
    RaDecision,
    RgDecision,
    series_fields,
)
from .subproblems import SCHEDULE_FIELDS

TRACE_COLUMNS = (
    "iteration",
    "phi",
    "delta_phi",
    "residual_norm",
    "J_rg",
    "J_hp",
    "J_ra",
    "eps_rg",
    "eps_hp",
    "eps_ra",
    "ra_path",
)
PRICE_COLUMNS = ("t", "e_rg_hp", "e_rg_ra", "h_hp_ra")
REVENUE_UNIT = 1e4  # reports use 10^4 CNY


def aggregate_revenues(per_player) -> float:
    """Exact sum of stakeholder revenues; round only for display."""
    vals = [float(v) for v in (per_player.values() if isinstance(per_player, dict) else per_player)]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("revenues must be finite")
    return math.fsum(vals)


def profit_gain(base: float, new: float) -> float | None:
    """Percentage change from ``base`` to ``new``; None when ``base <= 0``."""
    if not base > 0:
        return None
    return 100.0 * (new - base) / base


def format_gain(gain: float | None) -> str:
    return "n/a" if gain is None else f"{gain:+.2f}%"


def average_price(prices, volumes) -> float:
    """Volume-weighted mean price over steps with positive volume."""
    p = np.asarray(prices, dtype=float)
    v = np.asarray(volumes, dtype=float)
    if p.shape != v.shape:
        raise ValueError("price and volume series must have equal length")
    mask = v > 0
    if not np.any(mask):
        return float(np.mean(p)) if p.size else float("nan")
    return float(np.sum(p[mask] * v[mask]) / np.sum(v[mask]))


def average_prices(x: DecisionProfile, prices: PriceVector) -> dict:
    e_hp = average_price(prices.e_rg_hp, x.hp.buy_rg)
    e_ra = average_price(prices.e_rg_ra, x.ra.buy_rg)
    blend = average_price(
        np.concatenate([prices.e_rg_hp, prices.e_rg_ra]), np.concatenate([x.hp.buy_rg, x.ra.buy_rg])
    )
    return {
        "e_rg_hp": e_hp,
        "e_rg_ra": e_ra,
        "electricity": blend,
        "hydrogen": average_price(prices.h_hp_ra, x.ra.buy_hp),
    }


# --------------------------------------------------------------------------
# csv artifacts


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(v: str):
    if v == "":
        return None
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def emit_convergence_trace(records, out) -> Path:
    """Write per-iteration trace rows (potential, residual norm, costs, errors)."""
    if hasattr(records, "records"):
        records = records.records
    if not records:
        raise ValueError("trace needs at least one iteration")
    out = Path(out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for rec in records:
            w.writerow([_fmt(rec.get(c)) for c in TRACE_COLUMNS])
    return out


def read_trace(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _profile_columns():
    cols = []
    for k, cls in (("rg", RgDecision), ("hp", HpDecision), ("ra", RaDecision)):
        cols += [f"{k}.{f}" for f in series_fields(cls)]
    cols += [f"ra.{f}" for f in SCHEDULE_FIELDS]
    return cols


def write_profile(x: DecisionProfile, out) -> Path:
    cols = _profile_columns()
    data = []
    for c in cols:
        k, f = c.split(".")
        dec = getattr(x, k)
        data.append(getattr(dec.schedule, f) if f in SCHEDULE_FIELDS else getattr(dec, f))
    out = Path(out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *cols, "ra.state"])
        states = x.ra.schedule.states()
        names = ("Production", "HSB", "Idle")
        for t in range(x.T):
            w.writerow([t, *(repr(float(d[t])) for d in data), names[states[t]]])
    return out


def read_profile(path, initial_state) -> DecisionProfile:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    col = {c: np.array([float(r[c]) for r in rows]) for c in _profile_columns()}
    rg = RgDecision(*(col[f"rg.{f}"] for f in series_fields(RgDecision)))
    hp = HpDecision(*(col[f"hp.{f}"] for f in series_fields(HpDecision)))
    sched = AsySchedule(*(col[f"ra.{f}"] for f in SCHEDULE_FIELDS), initial_state=initial_state)
    ra = RaDecision(*(col[f"ra.{f}"] for f in series_fields(RaDecision)), schedule=sched)
    return DecisionProfile(rg, hp, ra)


def write_prices(prices: PriceVector, out) -> Path:
    out = Path(out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRICE_COLUMNS)
        for t in range(prices.T):
            w.writerow([t, repr(float(prices.e_rg_hp[t])), repr(float(prices.e_rg_ra[t])), repr(float(prices.h_hp_ra[t]))])
    return out


def read_prices(path) -> PriceVector:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return PriceVector(*(np.array([float(r[c]) for r in rows]) for c in PRICE_COLUMNS[1:]))


# --------------------------------------------------------------------------
# comparison


@dataclass
class SettingRow:
    label: str
    mode: str
    revenues: dict | None
    total: float
    prices: dict | None = None


@dataclass
class ComparisonReport:
    rows: list = field(default_factory=list)
    gains: dict = field(default_factory=dict)

    def add(self, label: str, mode: str, revenues: dict | None, total: float | None = None, prices=None):
        if total is None:
            total = aggregate_revenues(revenues)
        self.rows.append(SettingRow(label, mode, revenues, total, prices))

    def compute_gains(self, base_mode: str = "M1", new_mode: str = "M2"):
        base = next((r for r in self.rows if r.mode == base_mode and r.revenues), None)
        new = next((r for r in self.rows if r.mode == new_mode and r.revenues), None)
        if base and new:
            self.gains = {k: profit_gain(base.revenues[k], new.revenues[k]) for k in STAKEHOLDERS}
        return self.gains

    def to_markdown(self) -> str:
        u = REVENUE_UNIT
        lines = [
            "| Setting | Revenue {RG, HP, RA} (10^4 CNY) | Total revenue (10^4 CNY) | Average price {e, h} (CNY/MWh, CNY/Nm3) |",
            "|---|---|---|---|",
        ]
        for r in self.rows:
            rev = "/" if not r.revenues else "{" + ", ".join(f"{r.revenues[k] / u:.2f}" for k in STAKEHOLDERS) + "}"
            price = "/" if not r.prices else f"{{{r.prices['electricity']:.3f}, {r.prices['hydrogen']:.3f}}}"
            lines.append(f"| {r.label} | {rev} | {r.total / u:.2f} | {price} |")
        if self.gains:
            lines.append("")
            lines.append("Profit change M1 -> M2: " + ", ".join(f"{k.upper()} {format_gain(g)}" for k, g in self.gains.items()))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "rows": [
                dict(label=r.label, mode=r.mode, revenues=r.revenues, total=r.total, prices=r.prices) for r in self.rows
            ],
            "gains": self.gains,
        }


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
