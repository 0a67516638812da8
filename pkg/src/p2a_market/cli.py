"""Command-line driver: ``solve``, ``compare`` and ``gap``.

Exit codes: 0 success, 2 infeasible, 3 iteration limit, 4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, StudyConfig, config_to_dict, load_config
from .equilibrium import certify_epsilon_ne, equilibrium_gap, iterate_to_equilibrium
from .estimator import CooperativeBenchmark
from .model import STAKEHOLDERS, ScenarioError, load_scenario
from .report import (
    ComparisonReport,
    aggregate_revenues,
    average_prices,
    emit_convergence_trace,
    read_prices,
    read_profile,
    write_json,
    write_prices,
    write_profile,
)
from .solvers import InfeasibleError, SolveKind
from .subproblems import (
    build_cooperative_problem,
    build_own_problem,
    dump_problem,
    evaluate_potential,
    var_map_table,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_ITER_LIMIT = 3
EXIT_IO = 4

MODES = ("m1", "m2", "m3")
log = logging.getLogger("p2a_market")


class InputError(Exception):
    """Bad or unreadable input; maps to exit code 4."""


def _load_inputs(scenario_path, config_path):
    try:
        scenario = load_scenario(scenario_path)
    except (OSError, ScenarioError) as exc:
        raise InputError(f"scenario: {exc}") from exc
    try:
        study = load_config(config_path)
    except ConfigError as exc:
        raise InputError(f"config: {exc}") from exc
    return scenario, study


def _certification(result, eps_bar) -> dict:
    if not result.gaps:
        return {}
    eps = eps_bar * abs(result.potential)
    max_gap = max(result.gaps.values())
    return {
        "eps": eps,
        "max_gap": max_gap,
        "gaps": dict(result.gaps),
        "gap_exact": dict(result.gap_exact),
        "certified": bool(max_gap <= eps),
    }


def _cert_line(cert: dict) -> str:
    if not cert:
        return "Certification: not computed."
    verdict = "certified" if cert["certified"] else "NOT certified"
    note = "" if all(cert["gap_exact"].values()) else " (RA gap is an upper bound: branch-and-bound budget ran out)"
    return (
        f"Certification: eps = {cert['eps']:.6g} CNY, max gap = {cert['max_gap']:.6g} CNY, "
        f"{verdict}{note}."
    )


def _report_md(manifest: dict, comparison: ComparisonReport, cert: dict, extra: list[str]) -> str:
    lines = [
        f"# Study {manifest['mode'].upper()}",
        "",
        f"- scenario: `{manifest['scenario_path']}`",
        f"- config: `{manifest['config_path']}`",
        f"- status: {manifest['status']}",
        *extra,
        "",
        comparison.to_markdown().rstrip("\n"),
        "",
        _cert_line(cert) if manifest["mode"] != "m3" else "Certification: not applicable (cooperative optimum).",
        "",
    ]
    return "\n".join(lines)


def _dump_problems(out: Path, problems: dict):
    folder = out / "problems"
    folder.mkdir(exist_ok=True)
    for name, problem in problems.items():
        dump_problem(problem, folder / f"{name}.txt")


def run_solve(args) -> int:
    out = Path(args.out)
    scenario, study = _load_inputs(args.scenario, args.config)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc}") from exc
    mode = args.mode.lower()
    manifest = {
        "mode": mode,
        "scenario_path": str(Path(args.scenario).resolve()),
        "config_path": str(Path(args.config).resolve()),
        "out_dir": str(out.resolve()),
        "seed": args.seed,
        "tool_version": __version__,
        "config": config_to_dict(study),
        "T": scenario.T,
    }
    np.random.seed(args.seed)  # nothing below draws random numbers; pinned for reproducibility
    started = time.monotonic()
    if mode == "m3":
        code = _solve_cooperative(scenario, study, out, manifest, args)
    else:
        code = _solve_equilibrium(scenario, study, out, manifest, args, hsb=(mode == "m2"))
    manifest["elapsed_seconds"] = round(time.monotonic() - started, 3)
    manifest["exit_code"] = code
    write_json(manifest, out / "manifest.json")
    return code


def _solve_equilibrium(scenario, study: StudyConfig, out, manifest, args, hsb: bool) -> int:
    params = study.params.with_hsb(hsb)
    cfg = study.solver_for(scenario)
    prices0 = cfg.default_prices(scenario, params)
    problems = {k: build_own_problem(k, params, scenario, prices0) for k in STAKEHOLDERS}
    write_json({k: var_map_table(p) for k, p in problems.items()}, out / "var_map.json")
    if args.dump_problems:
        _dump_problems(out, problems)
    try:
        result = iterate_to_equilibrium(scenario, params, cfg)
    except InfeasibleError as exc:
        manifest["status"] = "Infeasible"
        manifest["diagnostic"] = str(exc)
        (out / "report.md").write_text(f"# Study {manifest['mode'].upper()}\n\nInfeasible: {exc}\n", encoding="utf-8")
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    write_profile(result.x, out / "equilibrium.csv")
    write_prices(result.br_prices, out / "prices.csv")
    emit_convergence_trace(result, out / "trace.csv")
    cert = _certification(result, cfg.eps_bar)
    avg = average_prices(result.x, result.br_prices)
    comparison = ComparisonReport()
    label = f"{manifest['mode'].upper()} {Path(manifest['scenario_path']).stem}"
    comparison.add(label, manifest["mode"].upper(), result.revenues, prices=avg)
    manifest.update(
        status=result.status,
        iterations=result.iterations,
        potential=result.potential,
        residual_norm=result.residual_trace[-1],
        g1=result.g1,
        g2=result.g2,
        revenues=result.revenues,
        total_revenue=aggregate_revenues(result.revenues),
        average_prices=avg,
        certification=cert,
    )
    extra = [
        f"- iterations: {result.iterations} (stop test |dPhi| < {result.g1:.6g}, residual < {result.g2:.6g})",
        f"- final potential: {result.potential:.6f} CNY, residual norm {result.residual_trace[-1]:.6g}",
    ]
    (out / "report.md").write_text(_report_md(manifest, comparison, cert, extra), encoding="utf-8")
    return EXIT_OK if result.converged else EXIT_ITER_LIMIT


def _solve_cooperative(scenario, study: StudyConfig, out, manifest, args) -> int:
    params = study.params.with_hsb(True)
    problem = build_cooperative_problem(params, scenario)
    write_json({"cooperative": var_map_table(problem)}, out / "var_map.json")
    if args.dump_problems:
        _dump_problems(out, {"cooperative": problem})
    est = CooperativeBenchmark(
        params, time_limit=study.solver.cooperative_time_limit, gap_tol=study.solver.bnb_budget.gap_tol
    )
    try:
        est.fit(scenario)
    except InfeasibleError as exc:
        manifest["status"] = "Infeasible"
        manifest["diagnostic"] = str(exc)
        (out / "report.md").write_text(f"# Study M3\n\nInfeasible: {exc}\n", encoding="utf-8")
        return EXIT_INFEASIBLE
    status = est.status_
    write_profile(est.profile_, out / "equilibrium.csv")
    total = est.total_revenue_
    records = [
        dict(iteration=0, phi=-total, delta_phi=None, residual_norm=0.0, ra_path="cooperative")
    ]
    emit_convergence_trace(records, out / "trace.csv")
    comparison = ComparisonReport()
    comparison.add(f"M3 {Path(manifest['scenario_path']).stem}", "M3", None, total=total)
    manifest.update(
        status=status.kind.value,
        revenues=None,
        total_revenue=total,
        mip_gap=status.gap,
        average_prices=None,
    )
    extra = [f"- relative optimality gap: {status.gap:.3g}"]
    (out / "report.md").write_text(_report_md(manifest, comparison, {}, extra), encoding="utf-8")
    return EXIT_OK if status.kind == SolveKind.OPTIMAL else EXIT_ITER_LIMIT


def _read_manifest(run: Path) -> dict:
    try:
        return json.loads((run / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputError(f"{run}: cannot read manifest.json: {exc}") from exc


def run_compare(args) -> int:
    report = ComparisonReport()
    for run in map(Path, args.runs):
        m = _read_manifest(run)
        if m.get("total_revenue") is None:
            raise InputError(f"{run}: run has no results (status {m.get('status')})")
        label = f"{m['mode'].upper()} {Path(m['scenario_path']).stem}"
        report.add(label, m["mode"].upper(), m.get("revenues"), total=m["total_revenue"], prices=m.get("average_prices"))
    report.compute_gains("M1", "M2")
    out = Path(args.out)
    try:
        if out.suffix.lower() == ".json":
            write_json(report.to_dict(), out)
        else:
            out.write_text(report.to_markdown(), encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from exc
    print(report.to_markdown(), end="")
    return EXIT_OK


def run_gap(args) -> int:
    run = Path(args.run)
    m = _read_manifest(run)
    if m["mode"] == "m3":
        raise InputError("cooperative runs have no equilibrium gap")
    scenario, study = _load_inputs(m["scenario_path"], m["config_path"])
    params = study.params.with_hsb(m["mode"] == "m2")
    cfg = study.solver_for(scenario)
    try:
        x = read_profile(run / "equilibrium.csv", params.ra.initial_state)
        prices = read_prices(run / "prices.csv")
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{run}: {exc}") from exc
    try:
        report = equilibrium_gap(x, prices, scenario, params, cfg)
    except InfeasibleError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    phi = evaluate_potential(x, prices, scenario, params, cfg.rho, cfg.market_weights)
    eps = cfg.eps_bar * abs(phi)
    cert = certify_epsilon_ne(x, prices, eps, scenario, params, cfg, report)
    summary = {
        "eps": eps,
        "potential": phi,
        "max_gap": report.max_gap,
        "gaps": report.gaps,
        "gap_exact": report.exact,
        "margins": cert.margins,
        "certified": cert.certified,
    }
    write_json(summary, run / "gap.json")
    print(_cert_line(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="p2a-market", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one study (M1, M2 or M3)")
    solve.add_argument("--scenario", required=True)
    solve.add_argument("--config", required=True)
    solve.add_argument("--mode", required=True, type=str.lower, choices=MODES)
    solve.add_argument("--out", required=True)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--dump-problems", action="store_true", help="write canonical problems as plain text")
    solve.set_defaults(func=run_solve)

    compare = sub.add_parser("compare", help="tabulate finished runs")
    compare.add_argument("--runs", nargs="+", required=True)
    compare.add_argument("--out", required=True, help=".md for a table, .json for raw numbers")
    compare.set_defaults(func=run_compare)

    gap = sub.add_parser("gap", help="recompute the equilibrium certificate of a run")
    gap.add_argument("--run", required=True)
    gap.set_defaults(func=run_gap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
