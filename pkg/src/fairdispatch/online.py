"""Event-driven dispatch: windowed mini-batches and instant matching.

Tasks and availabilities arrive as a time-ordered stream. In windowed mode
the pending tasks are matched against the live availabilities whenever a
window boundary fires; boundaries are aligned to the stream start and fire
every ``window_min`` minutes. Matching runs before expiry is applied at a
boundary, so an availability whose period ends mid-window still participates
in the boundary that closes that window, and one that dies between two
boundaries is gone. Window size 0 switches to instant mode: a task is
processed the moment it arrives, and a new availability triggers
reprocessing of everything still parked.

A task is never offered to the same worker twice, no matter how many passes
it sits through.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .allocation import AssignmentGraph, AssignmentResult, GraphTask
from .geo import DistanceFn, haversine_km
from .model import Availability, Ident, Task, Worker, WorkerLedger
from .nomination import TemporalIndex, nominee_list
from .offers import DecisionFn, OfferPolicy, OfferSession, acceptance_sampler, run_offer_rounds
from .pipeline import AssignmentRecord, RunResult, build_report, run_allocator


@dataclass(frozen=True)
class TaskArrival:
    time: float
    task: Task


@dataclass(frozen=True)
class AvailabilityArrival:
    time: float
    availability: Availability


Event = TaskArrival | AvailabilityArrival


def stream_from_workload(tasks: Iterable[Task], workers: Iterable[Worker]) -> list[Event]:
    """Arrival events for a fixed workload: everything arrives when its period opens.

    At equal timestamps availabilities come before tasks, so an instant-mode
    task can see a worker who became available at the same moment.
    """
    events: list[Event] = [
        AvailabilityArrival(a.period.begin, a) for w in workers for a in w.availabilities
    ]
    events.sort(key=lambda e: e.time)  # stable: input order preserved within a timestamp
    arrivals: list[Event] = [TaskArrival(t.source_period.begin, t) for t in tasks]
    arrivals.sort(key=lambda e: e.time)
    merged: list[Event] = []
    i = j = 0
    while i < len(events) and j < len(arrivals):
        if events[i].time <= arrivals[j].time:
            merged.append(events[i])
            i += 1
        else:
            merged.append(arrivals[j])
            j += 1
    merged.extend(events[i:])
    merged.extend(arrivals[j:])
    return merged


@dataclass
class _PendingTask:
    task: Task
    offered: set[Ident] = field(default_factory=set)
    candidates: list[Ident] = field(default_factory=list)
    betas: dict[Ident, float] = field(default_factory=dict)
    alpha: float = 0.0


class _Engine:
    def __init__(self, capacities, policy, allocator, base_acceptance, dist, seed, max_rounds):
        self.policy = policy
        self.allocator = allocator
        self.base_acceptance = base_acceptance
        self.dist = dist
        self.max_rounds = max_rounds
        self.decide: DecisionFn = acceptance_sampler(seed)
        self.alloc_rng = random.Random(f"{seed}|alloc")
        self.ledgers = {wid: WorkerLedger(wid, cap) for wid, cap in capacities.items()}
        self.live: list[Availability] = []
        self.pending: dict[Ident, _PendingTask] = {}
        self.sessions: list[OfferSession] = []
        self.records: list[AssignmentRecord] = []
        self.assignments: dict[Ident, Ident] = {}
        self.total_tasks = 0

    def ingest(self, event: Event) -> None:
        if isinstance(event, TaskArrival):
            self.total_tasks += 1
            self.pending[event.task.id] = _PendingTask(event.task)
        else:
            if event.availability.worker_id not in self.ledgers:
                raise ValueError(
                    f"availability arrived for unknown worker {event.availability.worker_id!r}"
                )
            self.live.append(event.availability)

    def expire(self, now: float) -> None:
        """Drop availabilities and unallocated tasks whose windows have closed."""
        self.live = [a for a in self.live if a.period.end >= now]
        dead = [tid for tid, pt in self.pending.items() if pt.task.source_period.end < now]
        for tid in dead:
            del self.pending[tid]

    def _worker_views(self) -> dict[Ident, Worker]:
        grouped: dict[Ident, list[Availability]] = {}
        for a in self.live:
            grouped.setdefault(a.worker_id, []).append(a)
        return {
            wid: Worker(wid, tuple(avails), self.ledgers[wid].capacity)
            for wid, avails in grouped.items()
        }

    def match(self, subset: Sequence[_PendingTask] | None = None) -> None:
        """One matching pass: nominate, offer, then allocate over pending tasks."""
        targets = list(self.pending.values()) if subset is None else list(subset)
        if self.live and targets:
            index = TemporalIndex(self.live)
            views = self._worker_views()
            for pt in targets:
                nominees = nominee_list(pt.task, views, index, self.dist, self.base_acceptance)
                nominees = [n for n in nominees if n.worker_id not in pt.offered]
                if not nominees:
                    continue
                session = run_offer_rounds(
                    pt.task, nominees, self.policy, self.decide, self.max_rounds
                )
                self.sessions.append(session)
                pt.offered.update(session.offered)
                pt.alpha = nominees[0].alpha
                beta_by_worker = {n.worker_id: n.beta for n in nominees}
                for wid in session.candidates:
                    self.ledgers[wid].record_acceptance(pt.task.id, pt.task.reward)
                    pt.candidates.append(wid)
                    pt.betas[wid] = beta_by_worker[wid]

        ready = [pt for pt in self.pending.values() if pt.candidates]
        if not ready:
            return
        graph = AssignmentGraph(
            [
                GraphTask(
                    task_id=pt.task.id,
                    reward=pt.task.reward,
                    candidates=tuple(pt.candidates),
                    betas=tuple(pt.betas[w] for w in pt.candidates),
                    alpha=pt.alpha,
                )
                for pt in ready
            ],
            self.ledgers,
        )
        result = run_allocator(self.allocator, graph, self.alloc_rng)
        for tid, wid in result.assignments.items():
            pt = self.pending.pop(tid)
            self.assignments[tid] = wid
            self.records.append(
                AssignmentRecord(tid, wid, pt.task.reward, pt.alpha, pt.betas[wid])
            )


def run_online(
    events: Sequence[Event],
    capacities: Mapping[Ident, int],
    *,
    policy: OfferPolicy | None = None,
    allocator: str = "f_aware",
    window_min: float = 0,
    base_acceptance: float = 0.9,
    dist: DistanceFn = haversine_km,
    seed: int = 0,
    rho: float = 1.0,
    max_rounds: int | None = None,
) -> RunResult:
    """Replay an event stream through the online two-phase pipeline.

    ``window_min`` > 0 batches matching at fixed boundaries; 0 matches
    instantly on every arrival. Raises on an unsorted stream or a negative
    window.
    """
    if window_min < 0:
        raise ValueError("window length cannot be negative")
    for earlier, later in zip(events, events[1:]):
        if later.time < earlier.time:
            raise ValueError("event stream is not ordered by time")
    policy = policy or OfferPolicy()

    engine = _Engine(dict(capacities), policy, allocator, base_acceptance, dist, seed, max_rounds)
    if not events:
        raise ValueError("cannot run on an empty event stream")

    if window_min == 0:
        for event in events:
            engine.expire(event.time)
            engine.ingest(event)
            if isinstance(event, TaskArrival):
                engine.match([engine.pending[event.task.id]])
            else:
                engine.match()
    else:
        window_s = window_min * 60.0
        boundary = events[0].time + window_s
        i = 0
        while i < len(events) or engine.pending:
            if i < len(events) and events[i].time <= boundary:
                engine.ingest(events[i])
                i += 1
                continue
            engine.match()
            engine.expire(boundary)
            boundary += window_s

    total = engine.total_tasks
    if total == 0:
        raise ValueError("event stream contains no tasks")
    report = build_report(total, engine.ledgers, engine.sessions, engine.records, rho)
    seen = {e.task.id for e in events if isinstance(e, TaskArrival)}
    result = AssignmentResult(engine.assignments, seen - set(engine.assignments))
    return RunResult(report, result, engine.records, engine.sessions, engine.ledgers)
