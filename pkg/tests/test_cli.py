"""CLI harness: subcommands, config handling, and report identities."""

from __future__ import annotations

import csv
import json

import pytest

from fairdispatch.cli import (
    ConfigError,
    ExperimentConfig,
    RUN_CSV_COLUMNS,
    execute,
    main,
)


def run_cli(*argv) -> int:
    return main(list(argv))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("dataset")
    assert run_cli("generate", "--tasks", "80", "--workers", "10", "--seed", "3", "--out-dir", str(out_dir)) == 0
    return out_dir


class TestGenerate:
    def test_writes_both_files(self, dataset):
        trips = (dataset / "tasks.csv").read_text().strip().splitlines()
        checkins = (dataset / "checkins.csv").read_text().strip().splitlines()
        assert len(trips) == 81  # header + rows
        assert len(checkins) == 1 + 10 * 8


class TestRun:
    def test_csv_report_to_file(self, dataset, tmp_path):
        out = tmp_path / "report.csv"
        code = run_cli(
            "run",
            "--tasks-csv", str(dataset / "tasks.csv"),
            "--checkins-csv", str(dataset / "checkins.csv"),
            "--algo", "f_aware",
            "--seed", "1",
            "--out", str(out),
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert tuple(rows[0]) == RUN_CSV_COLUMNS
        assert 0.0 <= float(rows[0]["tar"]) <= 1.0

    def test_same_config_twice_is_identical(self, dataset, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            code = run_cli(
                "run",
                "--tasks-csv", str(dataset / "tasks.csv"),
                "--checkins-csv", str(dataset / "checkins.csv"),
                "--seed", "7",
                "--format", "json",
                "--out", str(out),
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_unicast_yields_exact_identities(self, tmp_path):
        # generous fixed capacity so every acceptance can be served
        out = tmp_path / "r.json"
        code = run_cli(
            "run",
            "--synth-tasks", "60", "--synth-workers", "8",
            "--mode", "unicast",
            "--capacity", "999",
            "--seed", "2",
            "--format", "json",
            "--out", str(out),
        )
        assert code == 0
        report = json.loads(out.read_text())["report"]
        assert report["ar"] == 1.0
        assert report["unfairness"] == 0.0

    def test_rho_zero_reduces_objective_to_tar(self, tmp_path):
        out = tmp_path / "r.json"
        code = run_cli(
            "run",
            "--synth-tasks", "60", "--synth-workers", "8",
            "--rho", "0",
            "--seed", "2",
            "--format", "json",
            "--out", str(out),
        )
        assert code == 0
        report = json.loads(out.read_text())["report"]
        assert report["objective"] == report["tar"]

    def test_trace_flag_writes_sessions(self, tmp_path):
        trace = tmp_path / "sessions.jsonl"
        code = run_cli(
            "run",
            "--synth-tasks", "40", "--synth-workers", "6",
            "--seed", "2",
            "--out", str(tmp_path / "r.csv"),
            "--trace", str(trace),
        )
        assert code == 0
        lines = [json.loads(line) for line in trace.read_text().strip().splitlines()]
        assert lines and all("candidates" in entry for entry in lines)

    def test_window_flag_switches_to_online(self, tmp_path):
        out = tmp_path / "r.json"
        code = run_cli(
            "run",
            "--synth-tasks", "50", "--synth-workers", "8",
            "--window-min", "15",
            "--seed", "4",
            "--format", "json",
            "--out", str(out),
        )
        assert code == 0
        assert json.loads(out.read_text())["config"]["window_min"] == 15

    def test_mcf_guard_refuses_large_instances(self, capsys):
        code = run_cli(
            "run",
            "--synth-tasks", "100", "--synth-workers", "8",
            "--algo", "mcf",
            "--mcf-guard", "50",
        )
        assert code == 2
        assert "mcf refused" in capsys.readouterr().err

    def test_missing_input_is_a_config_error(self, capsys):
        assert run_cli("run", "--seed", "1") == 2
        assert "error" in capsys.readouterr().err

    def test_unreadable_file_is_reported(self, capsys, tmp_path):
        code = run_cli(
            "run",
            "--tasks-csv", str(tmp_path / "missing.csv"),
            "--checkins-csv", str(tmp_path / "missing2.csv"),
        )
        assert code == 2

    def test_config_file_with_flag_override(self, dataset, tmp_path):
        config_file = tmp_path / "config.json"
        config_file.write_text(
            json.dumps(
                {
                    "tasks_csv": str(dataset / "tasks.csv"),
                    "checkins_csv": str(dataset / "checkins.csv"),
                    "seed": 1,
                    "theta": 0.2,
                }
            )
        )
        out = tmp_path / "r.json"
        code = run_cli(
            "run", "--config", str(config_file), "--theta", "0.8", "--format", "json",
            "--out", str(out),
        )
        assert code == 0
        assert json.loads(out.read_text())["config"]["theta"] == 0.8

    def test_unknown_config_key_is_rejected(self, tmp_path, capsys):
        config_file = tmp_path / "config.json"
        config_file.write_text(json.dumps({"synth_tasks": 10, "synth_workers": 2, "bogus": 1}))
        assert run_cli("run", "--config", str(config_file)) == 2
        assert "unknown config keys" in capsys.readouterr().err


class TestTrace:
    def test_trace_subcommand_emits_jsonl(self, tmp_path):
        out = tmp_path / "trace.jsonl"
        code = run_cli(
            "trace",
            "--synth-tasks", "30", "--synth-workers", "6",
            "--seed", "5",
            "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines and all(json.loads(line)["k"] >= 1 for line in lines)


class TestSweep:
    def test_theta_sweep_avg_k_nonincreasing(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = run_cli(
            "sweep",
            "--synth-tasks", "120", "--synth-workers", "10",
            "--param", "theta",
            "--values", "0.2,0.4",
            "--seeds", "0,1,2",
            "--algos", "f_aware",
            "--out", str(out),
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6  # 2 values x 1 algo x 3 seeds
        by_theta: dict = {}
        for row in rows:
            by_theta.setdefault(float(row["value"]), []).append(float(row["avg_k"]))
        means = [sum(v) / len(v) for _, v in sorted(by_theta.items())]
        assert means[0] >= means[1]

    def test_capacity_sweep_with_mcf_tar_weakly_increasing(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli(
            "sweep",
            "--synth-tasks", "60", "--synth-workers", "8",
            "--param", "capacity",
            "--values", "1,2,4,8",
            "--seeds", "0",
            "--algos", "mcf",
            "--out", str(out),
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        tars = [float(r["tar"]) for r in sorted(rows, key=lambda r: float(r["value"]))]
        assert all(a <= b + 1e-12 for a, b in zip(tars, tars[1:]))

    def test_empty_seed_list_is_a_config_error(self, capsys):
        code = run_cli(
            "sweep",
            "--synth-tasks", "20", "--synth-workers", "4",
            "--param", "theta",
            "--values", "0.2",
            "--seeds", "",
        )
        assert code == 2
        assert "seed" in capsys.readouterr().err

    def test_reproducible_output_file(self, tmp_path):
        outs = []
        for name in ("s1.csv", "s2.csv"):
            out = tmp_path / name
            code = run_cli(
                "sweep",
                "--synth-tasks", "40", "--synth-workers", "6",
                "--param", "epsilon",
                "--values", "0.5,0.9",
                "--seeds", "0,1",
                "--out", str(out),
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_worker_pool_merges_rows_in_config_order(self, tmp_path):
        outs = []
        for name, jobs in (("serial.csv", "1"), ("pooled.csv", "3")):
            out = tmp_path / name
            code = run_cli(
                "sweep",
                "--synth-tasks", "40", "--synth-workers", "6",
                "--param", "theta",
                "--values", "0.2,0.8",
                "--seeds", "0,1",
                "--jobs", jobs,
                "--out", str(out),
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestExperimentConfig:
    def test_requires_exactly_one_input(self):
        with pytest.raises(ConfigError):
            ExperimentConfig().validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(
                tasks_csv="a.csv", checkins_csv="b.csv", synth_tasks=10, synth_workers=2
            ).validate()

    def test_rejects_unknown_allocator(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(synth_tasks=10, synth_workers=2, algo="hungarian").validate()

    def test_execute_determinism(self):
        config = ExperimentConfig(synth_tasks=50, synth_workers=8, seed=11)
        a = execute(config)
        b = execute(config)
        assert a.report.to_dict() == b.report.to_dict()
        assert a.result.assignments == b.result.assignments
