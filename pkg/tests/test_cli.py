import json
from unittest.mock import patch

import pytest
from pytest import fixture

from disaggpool.allocator import SolveStatus
from disaggpool.cli import OUTPUT_DIR_ENV, main
from disaggpool.experiment import COST_PLOT_FILE, RUNS_FILE, SUMMARY_FILE, RunFailure
from disaggpool.workload import WorkloadSpec, generate_workload, read_workload, write_workload


@fixture
def workload(tmp_path):
    path = tmp_path / "workload.jsonl"
    write_workload(path, generate_workload(WorkloadSpec(count=4, seed=8)))
    yield path


@fixture
def empty_config(tmp_path):
    path = tmp_path / "empty.toml"
    path.write_text("runs = 1\n\n[experiment]\nrequest_count = 0\n")
    yield path


def test_generate(tmp_path):
    out = tmp_path / "w.jsonl"
    assert main(["generate", "--seed", "3", "--requests", "5", "--out", str(out)]) == 0
    assert read_workload(out) == generate_workload(WorkloadSpec(count=5, seed=3))


def test_generate_to_stdout(capsys):
    assert main(["generate", "--requests", "2"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2


def test_solve_then_validate(tmp_path, workload, capsys):
    solution = tmp_path / "solution.json"
    instance = ["--policy", "C2", "--mode", "M", "--workload", str(workload)]
    assert main(["solve", *instance, "--out", str(solution)]) == 0
    assert capsys.readouterr().out.startswith("OPTIMAL")

    assert main(["validate", *instance, "--solution", str(solution)]) == 0
    assert capsys.readouterr().out.strip() == "ok"

    doc = json.loads(solution.read_text())
    doc["objective"]["weighted_usage"] += 1
    solution.write_text(json.dumps(doc))
    assert main(["validate", *instance, "--solution", str(solution)]) == 2
    assert capsys.readouterr().out.startswith("objective")


def test_export_lp(tmp_path, workload):
    out = tmp_path / "lp"
    argv = ["export-lp", "--policy", "C3", "--mode", "S", "--workload", str(workload)]
    assert main([*argv, "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "allocation_phase1.lp",
        "allocation_phase2.lp",
        "deployment.json",
    ]


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["run", "--runs", "many"],
        ["solve", "--policy", "C1"],
        ["solve", "--policy", "C9", "--out", "x.json"],
        ["validate", "--mode", "sideways", "--solution", "s.json"],
        ["run", "--scale", "tiny"],
    ],
)
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1


def test_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 1


def test_missing_workload(tmp_path):
    argv = ["solve", "--workload", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "s")]
    assert main(argv) == 1


def test_run(tmp_path, empty_config, capsys):
    out = tmp_path / "results"
    argv = ["run", "--config", str(empty_config), "--policy", "C1", "--mode", "S", "--out", str(out)]
    assert main(argv) == 0
    assert (out / RUNS_FILE).exists() and (out / SUMMARY_FILE).exists()
    assert (out / COST_PLOT_FILE).exists()
    assert capsys.readouterr().out.startswith("C1_S\tcost\t0.000 +- 0.000")


def test_run_with_failures(tmp_path, empty_config):
    def fail(config, condition, run):
        return RunFailure(condition.label, run, config.seed(run), SolveStatus.INFEASIBLE, "full")

    argv = ["run", "--config", str(empty_config), "--mode", "M", "--out", str(tmp_path)]
    with patch("disaggpool.experiment.execute_run", side_effect=fail) as execute:
        assert main(argv) == 2
    assert [call.args[1].label for call in execute.call_args_list] == ["C1_M", "C2_M", "C3_M"]


def test_run_output_from_environment(tmp_path, empty_config, monkeypatch):
    target = tmp_path / "from-env"
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(target))
    argv = ["run", "--config", str(empty_config), "--policy", "C2", "--runs", "2"]
    assert main(argv) == 0
    assert (target / RUNS_FILE).read_text().count("\n") == 1 + 2 * 2


def test_run_with_exhausted_budget(tmp_path):
    config = tmp_path / "budget.toml"
    config.write_text(
        'conditions = ["C2_S"]\nruns = 1\n\n'
        "[experiment]\nrequest_count = 30\n\n"
        "[solver]\nnode_budget = 1\n"
    )
    out = tmp_path / "results"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 2
    summary = json.loads((out / SUMMARY_FILE).read_text())
    [condition] = summary["conditions"]
    assert condition["budget_exceeded"] + condition["failures"] == 1


def test_scale_option(tmp_path, workload):
    out = tmp_path / "lp"
    argv = ["export-lp", "--scale", "half", "--policy", "C1", "--workload", str(workload)]
    assert main([*argv, "--out", str(out)]) == 0
    deployment = json.loads((out / "deployment.json").read_text())
    assert len(deployment["pools"]) == 2
