import json
import math

import pandas as pd
import pytest

from app.utils.bundle import BUNDLE_FILES
from app.utils.scenario_io import dump_scenario
from conftest import REFERENCE_SCENARIO, make_scenario
from main import EXIT_INFEASIBLE, EXIT_OK, EXIT_PARSE, EXIT_VERIFY_FAILED, main


def _summary(run_dir) -> dict:
    return json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def solved_run(tmp_path_factory):
    """소형 시나리오를 한 번 풀어 둔 번들 디렉터리"""
    root = tmp_path_factory.mktemp("cli")
    scenario = dump_scenario(make_scenario(), root / "small.toml")
    out = root / "run"
    code = main(["solve", str(scenario), "--out", str(out), "--kappa", "1e-3", "--seed", "7", "--dump-lp"])
    assert code == EXIT_OK
    return scenario, out


def test_solve_writes_bundle(solved_run):
    _, out = solved_run
    for name in BUNDLE_FILES:
        assert (out / name).is_file()
    assert list((out / "lp").glob("schedule_r*.lp"))
    summary = _summary(out)
    assert summary["settings"]["kappa"] == 1e-3
    assert summary["settings"]["seed"] == 7
    assert summary["settings"]["overrides"] == {"kappa": 1e-3, "seed": 7}
    assert summary["eta"] >= 1.0 - 1e-6
    trajectory = pd.read_csv(out / "trajectory.csv")
    assert list(trajectory.columns) == ["slot", "x", "y"]
    schedule = pd.read_csv(out / "schedule.csv")
    assert list(schedule.columns) == ["slot", "sensor", "fraction", "blocks", "rate_bps_hz"]
    assert len(schedule) == 2 * 40


def test_solve_is_reproducible(solved_run, tmp_path):
    scenario, out = solved_run
    again = tmp_path / "again"
    assert main(["solve", str(scenario), "--out", str(again), "--kappa", "1e-3", "--seed", "7"]) == EXIT_OK
    first, second = _summary(out), _summary(again)
    first.pop("timings")
    second.pop("timings")
    assert first == second
    assert (out / "trace.json").read_text(encoding="utf-8") == (again / "trace.json").read_text(encoding="utf-8")


def test_missing_scenario_file(tmp_path):
    assert main(["solve", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "out")]) == EXIT_PARSE


def test_invalid_scenario_values(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(
        "[mission]\nH = 100.0\nv_max = 1.0\nT = 10.0\ndt = 0.5\nq0 = [-800.0, 0.0]\nqF = [800.0, 0.0]\n"
        "[channel]\nbeta0_db = -60.0\nnoise_dbm = -110.0\ngamma_db = 7.0\nepsilon = 0.01\nbandwidth_hz = 1e6\n"
        "[[sensors]]\nx = 0.0\ny = 0.0\ndata_bits = 1e6\npower_w = 0.1\n",
        encoding="utf-8",
    )
    assert main(["solve", str(path), "--out", str(tmp_path / "out")]) == EXIT_PARSE


def test_unmeetable_demand(tmp_path):
    path = dump_scenario(make_scenario(data_bits=1e12), tmp_path / "huge.toml")
    assert main(["solve", str(path), "--out", str(tmp_path / "out")]) == EXIT_INFEASIBLE


def test_usage_errors(solved_run):
    _, out = solved_run
    with pytest.raises(SystemExit) as info:
        main(["verify", str(out), "--n-reps", "0"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2


def test_verify_passes_on_fresh_bundle(solved_run, tmp_path):
    _, out = solved_run
    report_path = tmp_path / "verify.json"
    assert main(["verify", str(out), "--n-reps", "2", "--out", str(report_path)]) == EXIT_OK
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["pass"] is True
    assert report["seed"] == 7
    assert report["n_reps"] == 2
    assert all(item["pass"] for item in report["sensors"])


def test_verify_detects_tampered_rates(solved_run, tmp_path):
    _, out = solved_run
    tampered = tmp_path / "tampered"
    tampered.mkdir()
    for name in BUNDLE_FILES:
        (tampered / name).write_bytes((out / name).read_bytes())
    schedule = pd.read_csv(tampered / "schedule.csv", float_precision="round_trip")
    schedule["rate_bps_hz"] *= 2.0
    schedule.to_csv(tampered / "schedule.csv", index=False)
    assert main(["verify", str(tampered)]) == EXIT_VERIFY_FAILED
    report = json.loads((tampered / "verify.json").read_text(encoding="utf-8"))
    assert report["pass"] is False


def test_verify_missing_bundle(tmp_path):
    assert main(["verify", str(tmp_path / "nothing")]) == EXIT_PARSE


def test_compare_without_sweep(solved_run, tmp_path):
    scenario, _ = solved_run
    out = tmp_path / "compare"
    assert main(["compare", str(scenario), "--out", str(out), "--workers", "1"]) == EXIT_OK
    table = pd.read_csv(out / "comparison.csv")
    assert len(table) == 3
    assert table["scheme"].tolist() == ["optimized", "straight", "static"]
    assert table["feasible"].tolist()[:2] == [True, True]


def test_compare_rejects_bad_sweep(solved_run, tmp_path):
    scenario, _ = solved_run
    assert main(["compare", str(scenario), "--sweep", "Z=1,2", "--out", str(tmp_path / "c")]) == 2


def test_compare_sweep_without_warm_start(solved_run, tmp_path):
    scenario, _ = solved_run
    out = tmp_path / "cold"
    args = ["compare", str(scenario), "--sweep", "eps=1e-2,1e-1", "--out", str(out), "--workers", "1"]
    assert main(args + ["--no-warm-start"]) == EXIT_OK
    table = pd.read_csv(out / "comparison.csv")
    assert len(table) == 6
    assert sorted(set(table["value"])) == [1e-2, 1e-1]


@pytest.mark.slow
def test_verify_reference_with_many_blocks(tmp_path):
    """기준 시나리오를 풀고 센서마다 10^5 블록 이상으로 검증"""
    out = tmp_path / "reference"
    assert main(["solve", str(REFERENCE_SCENARIO), "--out", str(out)]) == EXIT_OK
    schedule = pd.read_csv(out / "schedule.csv")
    per_sensor = schedule.groupby("sensor")["blocks"].sum()
    assert len(per_sensor) == 4 and per_sensor.min() > 0
    n_reps = math.ceil(1e5 / per_sensor.min())

    report_path = tmp_path / "verify.json"
    assert main(["verify", str(out), "--n-reps", str(n_reps), "--out", str(report_path)]) == EXIT_OK
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["pass"] is True
    assert report["n_reps"] == n_reps
    assert all(item["n_blocks"] >= 100_000 for item in report["sensors"])
    assert all(item["pass"] for item in report["sensors"])
