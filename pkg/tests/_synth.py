"""Random instance generators for allocator and fuzz tests.

Graphs are built the same way the pipeline builds them: candidate edges are
acceptances, recorded into the ledgers in task order.
"""

from __future__ import annotations

import random

from fairdispatch.allocation import AssignmentGraph, GraphTask
from fairdispatch.model import WorkerLedger


def random_graph(
    rng: random.Random,
    n_tasks: int,
    n_workers: int,
    capacity: str | int = "tight",
    max_degree: int = 4,
    skew: bool = False,
) -> AssignmentGraph:
    """Random task-to-candidate graph with consistent acceptance ledgers.

    capacity "tight" follows the workload-sized recipe (mean tasks/workers,
    std mean/4); "generous" gives everyone room for every task; "small"
    draws capacities up to 3; an int fixes every capacity. ``skew`` draws
    candidates with per-worker popularity weights so acceptance counts
    spread out.
    """
    if capacity == "tight":
        mean = n_tasks / n_workers
        caps = [max(0, round(rng.gauss(mean, mean / 4))) for _ in range(n_workers)]
    elif capacity == "generous":
        caps = [n_tasks] * n_workers
    elif capacity == "small":
        caps = [rng.randint(0, 3) for _ in range(n_workers)]
    else:
        caps = [int(capacity)] * n_workers
    ledgers = {w: WorkerLedger(w, caps[w]) for w in range(n_workers)}

    weights = [rng.uniform(0.05, 1.0) ** 2 for _ in range(n_workers)] if skew else None
    tasks = []
    for tid in range(n_tasks):
        degree = rng.randint(1, min(max_degree, n_workers))
        if skew:
            chosen: list[int] = []
            while len(chosen) < degree:
                (w,) = rng.choices(range(n_workers), weights=weights)
                if w not in chosen:
                    chosen.append(w)
        else:
            chosen = rng.sample(range(n_workers), degree)
        reward = rng.randint(200, 5000)
        betas = tuple(round(rng.uniform(0.1, 20.0), 3) for _ in chosen)
        for w in chosen:
            ledgers[w].record_acceptance(tid, reward)
        tasks.append(GraphTask(tid, reward, tuple(chosen), betas, alpha=rng.uniform(0.5, 15.0)))
    return AssignmentGraph(tasks, ledgers)
