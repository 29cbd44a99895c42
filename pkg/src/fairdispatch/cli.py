"""Experiment harness: run one configuration, sweep a parameter, or generate data.

Subcommands:

* ``generate``: write a synthetic trips/check-ins CSV pair.
* ``run``: one pipeline run (offline, windowed, or instant); emits a metrics
  report as CSV or JSON.
* ``sweep``: cross product of one parameter axis, allocators, and seeds; one
  detail row per cell run plus aggregated mean/std per cell on stdout.
* ``trace``: like run, but writes the per-task offer sessions as JSON lines.

Configuration comes from an optional JSON file (``--config``) with flag
overrides; flags win. Report CSV columns are ``RUN_CSV_COLUMNS`` below:
the configuration echo followed by ``MetricsReport.CSV_FIELDS`` (scalar
metrics, then worker-distribution aggregates).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import fsum, sqrt
from pathlib import Path

from . import data as datamod
from .model import MetricsReport
from .offers import OfferMode, OfferPolicy
from .online import run_online, stream_from_workload
from .pipeline import ALLOCATOR_NAMES, RunResult, run_offline


class ConfigError(ValueError):
    pass


CONFIG_ECHO_COLUMNS = (
    "algo",
    "seed",
    "epsilon",
    "theta",
    "mode",
    "rho",
    "base_acceptance",
    "window_min",
    "capacity",
    "task_count",
    "radius_coefficient",
    "delta_t_hours",
)
RUN_CSV_COLUMNS = CONFIG_ECHO_COLUMNS + MetricsReport.CSV_FIELDS
SWEEP_CSV_COLUMNS = ("param", "value") + RUN_CSV_COLUMNS
SWEEP_AXES = (
    "epsilon",
    "theta",
    "window_min",
    "capacity",
    "task_count",
    "radius_coefficient",
    "rho",
)


@dataclass
class ExperimentConfig:
    tasks_csv: str | None = None
    checkins_csv: str | None = None
    synth_tasks: int | None = None
    synth_workers: int | None = None
    synth_checkins: int = 8
    algo: str = "f_aware"
    epsilon: float = 0.95
    theta: float = 0.4
    mode: str = "multicast"
    rho: float = 1.0
    base_acceptance: float = 0.9
    window_min: float | None = None
    delta_t_hours: float = 2.0
    radius_coefficient: float = 1.0
    capacity: int | None = None
    fixed_delta_t: bool = False
    skip_bad_rows: bool = False
    seed: int = 0
    mcf_guard: int = 40000

    def validate(self) -> None:
        file_input = self.tasks_csv is not None or self.checkins_csv is not None
        synth_input = self.synth_tasks is not None or self.synth_workers is not None
        if file_input == synth_input:
            raise ConfigError(
                "exactly one input is required: --tasks-csv/--checkins-csv or --synth-tasks/--synth-workers"
            )
        if file_input and (self.tasks_csv is None or self.checkins_csv is None):
            raise ConfigError("file input needs both --tasks-csv and --checkins-csv")
        if synth_input and (self.synth_tasks is None or self.synth_workers is None):
            raise ConfigError("synthetic input needs both --synth-tasks and --synth-workers")
        if self.algo not in ALLOCATOR_NAMES:
            raise ConfigError(f"unknown allocator {self.algo!r}; choose from {ALLOCATOR_NAMES}")
        if self.mode not in tuple(m.value for m in OfferMode):
            raise ConfigError(f"unknown offer mode {self.mode!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [0, 1]")
        if self.window_min is not None and self.window_min < 0:
            raise ConfigError("window-min cannot be negative")

    def dataset_config(self) -> datamod.DatasetConfig:
        return datamod.DatasetConfig(
            delta_t=self.delta_t_hours * 3600.0,
            radius_mean_coefficient=self.radius_coefficient,
            fixed_capacity=self.capacity,
            fixed_delta_t=self.fixed_delta_t,
            seed=self.seed,
        )

    def policy(self) -> OfferPolicy:
        return OfferPolicy(self.epsilon, self.theta, OfferMode(self.mode))

    def echo(self) -> dict:
        return {
            "algo": self.algo,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "theta": self.theta,
            "mode": self.mode,
            "rho": self.rho,
            "base_acceptance": self.base_acceptance,
            "window_min": "" if self.window_min is None else self.window_min,
            "capacity": "" if self.capacity is None else self.capacity,
            "task_count": "" if self.synth_tasks is None else self.synth_tasks,
            "radius_coefficient": self.radius_coefficient,
            "delta_t_hours": self.delta_t_hours,
        }


def _load_workload(config: ExperimentConfig):
    ds = config.dataset_config()
    if config.tasks_csv is not None:
        trips = datamod.read_trips(config.tasks_csv, config.skip_bad_rows)
        tasks = datamod.trips_to_tasks(trips, ds)
        availabilities = datamod.load_availabilities(
            config.checkins_csv, datamod.trip_distance_stats(trips), ds, config.skip_bad_rows
        )
        workers = datamod.workers_from_availabilities(availabilities)
        if workers:
            workers = datamod.assign_capacities(workers, len(tasks), ds)
        return tasks, workers
    params = datamod.SynthParams(
        n_tasks=config.synth_tasks,
        n_workers=config.synth_workers,
        checkins_per_worker=config.synth_checkins,
    )
    return datamod.synth_workload(params, ds)


def execute(config: ExperimentConfig) -> RunResult:
    """Load the workload and run the configured pipeline once."""
    config.validate()
    tasks, workers = _load_workload(config)
    if not tasks:
        raise ConfigError("workload contains no tasks")
    if config.algo == "mcf" and len(tasks) > config.mcf_guard:
        raise ConfigError(
            f"mcf refused on {len(tasks)} tasks (guard {config.mcf_guard}): the flow solver "
            "does not scale; use f_aware, or raise --mcf-guard for a small instance"
        )
    common = dict(
        policy=config.policy(),
        allocator=config.algo,
        base_acceptance=config.base_acceptance,
        seed=config.seed,
        rho=config.rho,
    )
    if config.window_min is None:
        return run_offline(tasks, workers, **common)
    events = stream_from_workload(tasks, workers)
    capacities = {w.id: w.capacity for w in workers}
    return run_online(events, capacities, window_min=config.window_min, **common)


def _write_report(config: ExperimentConfig, report: MetricsReport, out, fmt: str) -> None:
    if fmt == "json":
        payload = {"config": config.echo(), "report": report.to_dict()}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        if out is None:
            sys.stdout.write(text)
        else:
            Path(out).write_text(text, encoding="utf-8")
        return
    row = {**config.echo(), **report.csv_row()}
    if out is None:
        writer = csv.DictWriter(sys.stdout, fieldnames=RUN_CSV_COLUMNS)
        writer.writeheader()
        writer.writerow(row)
    else:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=RUN_CSV_COLUMNS)
            writer.writeheader()
            writer.writerow(row)


def _apply_axis(config: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param == "capacity":
        return dataclasses.replace(config, capacity=int(value))
    if param == "task_count":
        if config.synth_tasks is None:
            raise ConfigError("task_count sweeps require synthetic input")
        return dataclasses.replace(config, synth_tasks=int(value))
    if param == "window_min":
        return dataclasses.replace(config, window_min=float(value))
    if param in ("epsilon", "theta", "rho", "radius_coefficient"):
        return dataclasses.replace(config, **{param: float(value)})
    raise ConfigError(f"unknown sweep axis {param!r}; choose from {SWEEP_AXES}")


def _run_cell(args: tuple) -> dict:
    param, value, config = args
    result = execute(config)
    return {"param": param, "value": value, **config.echo(), **result.report.csv_row()}


def _sweep(config: ExperimentConfig, param: str, values, seeds, algos, jobs: int, out) -> list[dict]:
    if not values:
        raise ConfigError("sweep needs at least one value")
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    cells = []
    for value in values:
        for algo in algos:
            for seed in seeds:
                cell = dataclasses.replace(config, algo=algo, seed=seed)
                cells.append((param, value, _apply_axis(cell, param, value)))
    for _, _, cell in cells:
        cell.validate()

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(cell) for cell in cells]

    if out is not None:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    return rows


def _print_sweep_summary(rows: list[dict]) -> None:
    cells: dict[tuple, list[dict]] = {}
    for row in rows:
        cells.setdefault((row["param"], row["value"], row["algo"]), []).append(row)

    def mean_std(values):
        mean = fsum(values) / len(values)
        var = fsum((v - mean) ** 2 for v in values) / len(values)
        return mean, sqrt(var)

    print("param,value,algo,seeds,tar_mean,tar_std,unfairness_mean,unfairness_std,"
          "objective_mean,objective_std,avg_k_mean,avg_k_std")
    for (param, value, algo), group in cells.items():
        fields = []
        for metric in ("tar", "unfairness", "objective", "avg_k"):
            m, s = mean_std([float(r[metric]) for r in group])
            fields.extend([f"{m:.6f}", f"{s:.6f}"])
        print(f"{param},{value},{algo},{len(group)}," + ",".join(fields))


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--tasks-csv")
    parser.add_argument("--checkins-csv")
    parser.add_argument("--synth-tasks", type=int)
    parser.add_argument("--synth-workers", type=int)
    parser.add_argument("--synth-checkins", type=int)
    parser.add_argument("--algo", choices=ALLOCATOR_NAMES)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--theta", type=float)
    parser.add_argument("--mode", choices=[m.value for m in OfferMode])
    parser.add_argument("--rho", type=float)
    parser.add_argument("--base-acceptance", type=float)
    parser.add_argument("--window-min", type=float, help="online window in minutes; 0 = instant")
    parser.add_argument("--delta-t-hours", type=float)
    parser.add_argument("--radius-coefficient", type=float)
    parser.add_argument("--capacity", type=int, help="fixed worker capacity (default: derived)")
    parser.add_argument("--fixed-delta-t", action="store_true", default=None)
    parser.add_argument("--skip-bad-rows", action="store_true", default=None)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mcf-guard", type=int)
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=["csv", "json"], default=None)


def _config_from(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    extra = set(values) - known - {"sweep", "seeds", "algos", "out", "format", "jobs"}
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    values = {k: v for k, v in values.items() if k in known}
    for name in known:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_generate(args) -> int:
    params = datamod.SynthParams(
        n_tasks=args.tasks, n_workers=args.workers, checkins_per_worker=args.checkins_per_worker
    )
    trips, checkins = datamod.synth_raw(params, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    datamod.write_trips(out_dir / "tasks.csv", trips)
    datamod.write_checkins(out_dir / "checkins.csv", checkins)
    print(f"wrote {len(trips)} trips and {len(checkins)} check-ins to {out_dir}")
    return 0


def _cmd_run(args, trace_only: bool = False) -> int:
    config = _config_from(args)
    result = execute(config)
    if trace_only:
        out = args.out
        lines = [s.to_json() for s in result.sessions]
        text = "\n".join(lines) + ("\n" if lines else "")
        if out is None:
            sys.stdout.write(text)
        else:
            Path(out).write_text(text, encoding="utf-8")
        print(f"{len(result.sessions)} offer sessions traced", file=sys.stderr)
        return 0
    _write_report(config, result.report, args.out, args.format or "csv")
    if getattr(args, "trace", None):
        Path(args.trace).write_text(
            "\n".join(s.to_json() for s in result.sessions) + "\n", encoding="utf-8"
        )
    if getattr(args, "assignments", None):
        result.result.write_csv(args.assignments)
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from(args)
    file_values: dict = {}
    if args.config:
        file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    sweep_spec = file_values.get("sweep", {})
    param = args.param or sweep_spec.get("parameter")
    values = args.values if args.values is not None else sweep_spec.get("values")
    if not param or not values:
        raise ConfigError("sweep needs --param and --values (or a sweep spec in the config file)")
    if param not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {param!r}; choose from {SWEEP_AXES}")
    seeds = args.seeds if args.seeds is not None else file_values.get("seeds")
    if seeds is None:
        seeds = list(range(10))  # default seeds per cell
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    algos = args.algos if args.algos is not None else file_values.get("algos")
    if not algos:
        algos = [config.algo]
    for algo in algos:
        if algo not in ALLOCATOR_NAMES:
            raise ConfigError(f"unknown allocator {algo!r}")
    rows = _sweep(config, param, values, seeds, algos, args.jobs, args.out)
    _print_sweep_summary(rows)
    return 0


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdispatch", description="Fair crowdsourced-delivery dispatch experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic trips/check-ins CSV pair")
    gen.add_argument("--tasks", type=int, required=True)
    gen.add_argument("--workers", type=int, required=True)
    gen.add_argument("--checkins-per-worker", type=int, default=8)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out-dir", required=True)

    run = sub.add_parser("run", help="run one configuration and emit a metrics report")
    _add_run_flags(run)
    run.add_argument("--trace", help="also write offer sessions as JSON lines to this path")
    run.add_argument("--assignments", help="also write the assignment CSV to this path")

    sweep = sub.add_parser("sweep", help="sweep one parameter axis over allocators and seeds")
    _add_run_flags(sweep)
    sweep.add_argument("--param", choices=SWEEP_AXES)
    sweep.add_argument("--values", type=_float_list, help="comma-separated axis values")
    sweep.add_argument("--seeds", type=_int_list, help="comma-separated seeds (default 0..9)")
    sweep.add_argument("--algos", type=lambda s: s.split(","), help="comma-separated allocators")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel cell runs")

    trace = sub.add_parser("trace", help="run one configuration and dump offer sessions")
    _add_run_flags(trace)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "trace":
            return _cmd_run(args, trace_only=True)
        if args.command == "sweep":
            return _cmd_sweep(args)
    except (ConfigError, datamod.RowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
