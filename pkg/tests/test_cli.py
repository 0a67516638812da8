import json
import subprocess
import sys

import pytest
import yaml

from p2a_market.cli import EXIT_INFEASIBLE, EXIT_IO, EXIT_ITER_LIMIT, EXIT_OK, main
from p2a_market.config import StudyConfig, config_to_dict
from p2a_market.datasets import random_instance
from p2a_market.equilibrium import SolverConfig
from p2a_market.model import write_scenario
from p2a_market.report import read_profile, read_trace

from conftest import P

ARTIFACTS = ("equilibrium.csv", "prices.csv", "trace.csv", "report.md", "manifest.json", "var_map.json")


def _write_config(path, params, **solver):
    base = dict(rho=100.0, market_weights=(1.0, 1.0, 2.5e-5), g1=1e-3, g2=1e-3, max_iters=300)
    base.update(solver)
    tree = config_to_dict(StudyConfig(params, SolverConfig(**base)))
    tree = {sec: {k: v for k, v in body.items() if v is not None} for sec, body in tree.items()}
    path.write_text(yaml.safe_dump(tree), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("inputs")
    s, params = random_instance(2, 8)
    write_scenario(s, root / "scenario.csv")
    _write_config(root / "study.yaml", params)
    return root


@pytest.fixture(scope="module")
def runs(inputs, tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    codes = {}
    for mode in ("m1", "m2", "m3"):
        codes[mode] = main(
            ["solve", "--scenario", str(inputs / "scenario.csv"), "--config", str(inputs / "study.yaml"),
             "--mode", mode, "--out", str(root / mode), "--seed", "3"]
        )
    return root, codes


def test_solve_modes_succeed(runs):
    _, codes = runs
    assert codes == {"m1": EXIT_OK, "m2": EXIT_OK, "m3": EXIT_OK}


@pytest.mark.parametrize("mode", ["m1", "m2"])
def test_equilibrium_artifacts(runs, mode):
    root, _ = runs
    out = root / mode
    for name in ARTIFACTS:
        assert (out / name).is_file(), name
    report = (out / "report.md").read_text()
    assert "Certification: eps = " in report and "certified" in report
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["mode"] == mode
    assert manifest["config"]["solver"]["rho"] == 100.0
    assert manifest["certification"]["certified"]
    trace = read_trace(out / "trace.csv")
    assert trace[0]["iteration"] == 0 and trace[-1]["iteration"] == manifest["iterations"]
    var_map = json.loads((out / "var_map.json").read_text())
    assert set(var_map) == {"rg", "hp", "ra"}


def test_no_standby_run_never_uses_standby_or_idle(runs):
    root, _ = runs
    x = read_profile(root / "m1" / "equilibrium.csv", P)
    assert not x.ra.schedule.by.any() and not x.ra.schedule.off.any()


def test_cooperative_run_has_no_prices(runs):
    root, _ = runs
    out = root / "m3"
    assert not (out / "prices.csv").exists()
    report = (out / "report.md").read_text()
    assert "| / |" in report and "not applicable" in report
    assert read_trace(out / "trace.csv")[0]["ra_path"] == "cooperative"


def test_csv_artifacts_are_reproducible(runs, inputs, tmp_path):
    root, _ = runs
    code = main(
        ["solve", "--scenario", str(inputs / "scenario.csv"), "--config", str(inputs / "study.yaml"),
         "--mode", "m2", "--out", str(tmp_path), "--seed", "3"]
    )
    assert code == EXIT_OK
    for name in ("equilibrium.csv", "prices.csv", "trace.csv"):
        assert (tmp_path / name).read_bytes() == (root / "m2" / name).read_bytes()


def test_compare_writes_table_and_json(runs, tmp_path, capsys):
    root, _ = runs
    dirs = [str(root / m) for m in ("m1", "m2", "m3")]
    assert main(["compare", "--runs", *dirs, "--out", str(tmp_path / "cmp.md")]) == EXIT_OK
    table = (tmp_path / "cmp.md").read_text()
    assert table.count("\n| M") == 3
    assert "Profit change M1 -> M2" in table
    assert main(["compare", "--runs", *dirs, "--out", str(tmp_path / "cmp.json")]) == EXIT_OK
    data = json.loads((tmp_path / "cmp.json").read_text())
    assert [r["mode"] for r in data["rows"]] == ["M1", "M2", "M3"]
    assert "Total revenue" in capsys.readouterr().out


def test_gap_recomputes_certificate(runs, capsys):
    root, _ = runs
    assert main(["gap", "--run", str(root / "m2")]) == EXIT_OK
    summary = json.loads((root / "m2" / "gap.json").read_text())
    manifest = json.loads((root / "m2" / "manifest.json").read_text())
    assert summary["certified"]
    assert summary["max_gap"] == pytest.approx(manifest["certification"]["max_gap"], rel=1e-6, abs=1e-6)
    assert "Certification:" in capsys.readouterr().out
    assert main(["gap", "--run", str(root / "m3")]) == EXIT_IO


def test_dump_problems(inputs, tmp_path):
    code = main(
        ["solve", "--scenario", str(inputs / "scenario.csv"), "--config", str(inputs / "study.yaml"),
         "--mode", "m3", "--out", str(tmp_path), "--dump-problems"]
    )
    assert code == EXIT_OK
    text = (tmp_path / "problems" / "cooperative.txt").read_text()
    assert text.startswith("n ") and "binary " in text


def test_io_errors_exit_4(inputs, tmp_path):
    scen, cfg = str(inputs / "scenario.csv"), str(inputs / "study.yaml")
    assert main(["solve", "--scenario", str(tmp_path / "none.csv"), "--config", cfg, "--mode", "m1",
                 "--out", str(tmp_path / "a")]) == EXIT_IO
    bad_cfg = tmp_path / "bad.yaml"
    bad_cfg.write_text("grid: {}\n")
    assert main(["solve", "--scenario", scen, "--config", str(bad_cfg), "--mode", "m1",
                 "--out", str(tmp_path / "b")]) == EXIT_IO
    assert main(["solve", "--scenario", scen, "--config", cfg, "--mode", "m9", "--out", str(tmp_path / "c")]) == EXIT_IO
    assert main(["compare", "--runs", str(tmp_path / "nothing"), "--out", str(tmp_path / "x.md")]) == EXIT_IO


def test_infeasible_exits_2(inputs, tmp_path):
    from dataclasses import replace

    from p2a_market.model import HpParams

    _, params = random_instance(2, 8)
    params = replace(params, hp=HpParams(elz_min_load=0.5, h2_store_cap=10.0, h2_delivery_cap=0.0))
    cfg = _write_config(tmp_path / "infeasible.yaml", params)
    code = main(["solve", "--scenario", str(inputs / "scenario.csv"), "--config", str(cfg), "--mode", "m2",
                 "--out", str(tmp_path / "run")])
    assert code == EXIT_INFEASIBLE
    assert "Infeasible" in (tmp_path / "run" / "report.md").read_text()
    assert json.loads((tmp_path / "run" / "manifest.json").read_text())["exit_code"] == EXIT_INFEASIBLE


def test_iteration_limit_exits_3(inputs, tmp_path):
    _, params = random_instance(2, 8)
    cfg = _write_config(tmp_path / "short.yaml", params, max_iters=1)
    code = main(["solve", "--scenario", str(inputs / "scenario.csv"), "--config", str(cfg), "--mode", "m2",
                 "--out", str(tmp_path / "run")])
    assert code == EXIT_ITER_LIMIT
    assert (tmp_path / "run" / "trace.csv").is_file()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "p2a_market", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "solve" in res.stdout and "compare" in res.stdout and "gap" in res.stdout
