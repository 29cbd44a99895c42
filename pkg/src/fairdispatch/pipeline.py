"""Offline end-to-end run: nomination, offers, allocation, and the report."""

from __future__ import annotations

import random
from dataclasses import dataclass
from math import fsum
from typing import Iterable, Mapping, Sequence

from . import model
from .allocation import (
    AssignmentGraph,
    AssignmentResult,
    GraphTask,
    f_aware,
    laf_alloc,
    mcf_alloc,
    nearest_alloc,
    random_alloc,
)
from .geo import DistanceFn, haversine_km
from .model import Ident, MetricsReport, Task, Worker, WorkerLedger
from .nomination import TemporalIndex, nominee_list
from .offers import DecisionFn, OfferPolicy, OfferSession, acceptance_sampler, run_offer_rounds

ALLOCATOR_NAMES = ("f_aware", "random", "laf", "nearest", "mcf")


def run_allocator(name: str, graph: AssignmentGraph, rng: random.Random) -> AssignmentResult:
    if name == "f_aware":
        return f_aware(graph)
    if name == "random":
        return random_alloc(graph, rng)
    if name == "laf":
        return laf_alloc(graph)
    if name == "nearest":
        return nearest_alloc(graph)
    if name == "mcf":
        return mcf_alloc(graph)
    raise ValueError(f"unknown allocator {name!r}; expected one of {ALLOCATOR_NAMES}")


@dataclass(frozen=True)
class AssignmentRecord:
    """One realized assignment with the movement it implies."""

    task_id: Ident
    worker_id: Ident
    reward: int
    alpha: float
    beta: float


@dataclass
class RunResult:
    report: MetricsReport
    result: AssignmentResult
    records: list[AssignmentRecord]
    sessions: list[OfferSession]
    ledgers: dict[Ident, WorkerLedger]


def build_report(
    total_tasks: int,
    ledgers: Mapping[Ident, WorkerLedger],
    sessions: Sequence[OfferSession],
    records: Sequence[AssignmentRecord],
    rho: float,
) -> MetricsReport:
    """Assemble the metrics for one finished run.

    Workers whose capacity-truncated acceptance count is zero never
    participated and are left out of the fairness set. An empty or all-zero
    fairness set reports zero unfairness: there is no spread to measure.
    Wait rounds accumulate per task across repeated offer sessions and count
    up to the first session that produced a candidate.
    """
    allocated = sum(len(l.allocated) for l in ledgers.values())
    tar = model.tar(allocated, total_tasks)
    total_accepted = sum(len(l.accepted) for l in ledgers.values())
    ar = model.ar(allocated, total_accepted)

    lar_values = [
        model.lar(ledgers[wid])
        for wid in sorted(ledgers)
        if ledgers[wid].counted_acceptances > 0
    ]
    try:
        unfairness = model.unfairness(lar_values)
    except model.MetricUndefinedError:
        unfairness = 0.0
    objective = model.objective(tar, unfairness, rho)

    avg_k = fsum(s.k for s in sessions) / len(sessions) if sessions else 0.0
    waited: dict[Ident, int] = {}
    wait_values: list[int] = []
    for session in sessions:  # sessions are chronological
        if session.task_id in waited and waited[session.task_id] < 0:
            continue  # already answered in an earlier session
        waited[session.task_id] = waited.get(session.task_id, 0) + session.rounds_waited
        if session.candidates:
            wait_values.append(waited[session.task_id])
            waited[session.task_id] = -1
    avg_wait = fsum(wait_values) / len(wait_values) if wait_values else 0.0

    earned: dict[Ident, int] = {}
    traveled: dict[Ident, float] = {}
    for rec in records:
        earned[rec.worker_id] = earned.get(rec.worker_id, 0) + rec.reward
        traveled[rec.worker_id] = traveled.get(rec.worker_id, 0.0) + rec.alpha + rec.beta
    earnings_per_km = [
        (earned[wid] / 100.0) / traveled[wid] for wid in sorted(earned) if traveled[wid] > 0.0
    ]

    return MetricsReport(
        tar=tar,
        unfairness=unfairness,
        ar=ar,
        objective=objective,
        avg_k=avg_k,
        avg_wait_rounds=avg_wait,
        lar_values=lar_values,
        earnings_per_km=earnings_per_km,
    )


def run_offline(
    tasks: Sequence[Task],
    workers: Iterable[Worker],
    *,
    policy: OfferPolicy | None = None,
    allocator: str = "f_aware",
    base_acceptance: float = 0.9,
    dist: DistanceFn = haversine_km,
    seed: int = 0,
    rho: float = 1.0,
    max_rounds: int | None = None,
    decide: DecisionFn | None = None,
) -> RunResult:
    """Run the whole two-phase pipeline over a fixed task and worker set.

    Deterministic given (inputs, seed): offer decisions come from a sampler
    keyed by (seed, task, worker) and the random baseline from its own seeded
    stream.
    """
    if not tasks:
        raise ValueError("cannot run a pipeline without tasks")
    policy = policy or OfferPolicy()
    workers = list(workers)
    by_id = {w.id: w for w in workers}
    if len(by_id) != len(workers):
        raise ValueError("duplicate worker ids")
    ledgers = {w.id: WorkerLedger(w.id, w.capacity) for w in workers}
    index = TemporalIndex(a for w in workers for a in w.availabilities)
    decide = decide or acceptance_sampler(seed)

    sessions: list[OfferSession] = []
    graph_tasks: list[GraphTask] = []
    for task in tasks:
        nominees = nominee_list(task, by_id, index, dist, base_acceptance)
        if not nominees:
            continue
        session = run_offer_rounds(task, nominees, policy, decide, max_rounds)
        sessions.append(session)
        if not session.candidates:
            continue
        beta_by_worker = {n.worker_id: n.beta for n in session.nominees}
        for wid in session.candidates:
            ledgers[wid].record_acceptance(task.id, task.reward)
        graph_tasks.append(
            GraphTask(
                task_id=task.id,
                reward=task.reward,
                candidates=tuple(session.candidates),
                betas=tuple(beta_by_worker[w] for w in session.candidates),
                alpha=session.nominees[0].alpha,
            )
        )

    graph = AssignmentGraph(graph_tasks, ledgers)
    result = run_allocator(allocator, graph, random.Random(f"{seed}|alloc"))

    by_task = {t.task_id: t for t in graph_tasks}
    records = [
        AssignmentRecord(tid, wid, by_task[tid].reward, by_task[tid].alpha, by_task[tid].beta_of(wid))
        for tid, wid in result.assignments.items()
    ]
    result.unallocated.update(t.id for t in tasks if t.id not in result.assignments)

    report = build_report(len(tasks), ledgers, sessions, records, rho)
    return RunResult(report, result, records, sessions, ledgers)
