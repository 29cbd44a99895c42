"""Phase 2 of dispatch: pick one accepted worker per task.

All allocators consume the same capacitated task-to-candidate graph and
respect two constraints: a task goes only to a worker who accepted its offer,
and no worker exceeds her capacity. Five strategies are provided:

* ``f_aware``: greedy, fairness-driven; scarce tasks first, poorest worker wins.
* ``random_alloc``: uniform choice among capacitated candidates.
* ``laf_alloc``: least-allocated worker first.
* ``nearest_alloc``: smallest detour first.
* ``mcf_alloc``: min-cost max-flow; optimal on allocation count, used as the
  upper-bound reference.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import Cents, Ident, WorkerLedger

try:  # the flow kernel runs ~50x faster jitted, identically either way
    from numba import njit as _njit
except ImportError:  # pragma: no cover
    _njit = None

_ONE = Fraction(1)


@dataclass(frozen=True)
class GraphTask:
    """One task's side of the bipartite graph.

    ``candidates`` lists workers in acceptance order; ``betas`` holds each
    candidate's detour distance (km), parallel to ``candidates``.
    """

    task_id: Ident
    reward: Cents
    candidates: tuple[Ident, ...]
    betas: tuple[float, ...]
    alpha: float = 0.0

    def __post_init__(self):
        if len(self.candidates) != len(self.betas):
            raise ValueError(f"task {self.task_id}: candidates and betas differ in length")

    def beta_of(self, worker_id: Ident) -> float:
        return self.betas[self.candidates.index(worker_id)]


@dataclass
class AssignmentGraph:
    """Capacitated task-to-candidate graph; tasks appear in arrival order."""

    tasks: list[GraphTask]
    ledgers: dict[Ident, WorkerLedger]

    def clone(self) -> "AssignmentGraph":
        """Independent copy; lets several allocators run on the same instance."""
        return AssignmentGraph(list(self.tasks), {w: l.copy() for w, l in self.ledgers.items()})


@dataclass
class AssignmentResult:
    assignments: dict[Ident, Ident]
    unallocated: set[Ident]

    def to_dict(self) -> dict:
        return {
            "assignments": {str(t): w for t, w in self.assignments.items()},
            "unallocated": sorted(str(t) for t in self.unallocated),
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["task_id", "worker_id"])
            for task_id, worker_id in self.assignments.items():
                writer.writerow([task_id, worker_id])


def _alloc(graph: AssignmentGraph, task: GraphTask, worker_id: Ident, out: AssignmentResult):
    graph.ledgers[worker_id].record_allocation(task.task_id, task.reward)
    out.assignments[task.task_id] = worker_id


def f_aware(graph: AssignmentGraph) -> AssignmentResult:
    """Fairness-aware greedy allocation.

    Tasks are processed in ascending candidate-count order (scarce tasks have
    the least flexibility), ties by task id. Each task goes to the candidate
    with capacity left and the lowest current local assignment ratio; equal
    ratios favor the larger accepted-reward denominator, then the smaller
    worker id. Ratios are compared exactly on integer cents.
    """
    result, _ = _f_aware_with_state(graph)
    return result


def _f_aware_with_state(graph: AssignmentGraph):
    """f_aware plus the incrementally maintained (numerator, denominator) pairs."""
    ledgers = graph.ledgers
    num: dict[Ident, int] = {}
    den: dict[Ident, int] = {}
    for wid, ledger in ledgers.items():
        num[wid], den[wid] = ledger.lar_terms()

    ratio_cache: dict[Ident, Fraction] = {}

    def sort_key(wid: Ident):
        ratio = ratio_cache.get(wid)
        if ratio is None:
            d = den[wid]
            ratio = Fraction(num[wid], d) if d else _ONE
            ratio_cache[wid] = ratio
        return (ratio, -den[wid], wid)

    result = AssignmentResult({}, set())
    for task in sorted(graph.tasks, key=lambda t: (len(t.candidates), t.task_id)):
        chosen = None
        for wid in sorted(task.candidates, key=sort_key):
            if ledgers[wid].residual_capacity > 0:
                chosen = wid
                break
        if chosen is None:
            result.unallocated.add(task.task_id)
            continue
        _alloc(graph, task, chosen, result)
        num[chosen] += task.reward
        ratio_cache.pop(chosen, None)
    return result, {wid: (num[wid], den[wid]) for wid in ledgers}


def random_alloc(graph: AssignmentGraph, rng: random.Random) -> AssignmentResult:
    """Uniformly random capacitated candidate per task, in arrival order."""
    result = AssignmentResult({}, set())
    for task in graph.tasks:
        capacitated = [w for w in task.candidates if graph.ledgers[w].residual_capacity > 0]
        if not capacitated:
            result.unallocated.add(task.task_id)
            continue
        _alloc(graph, task, rng.choice(capacitated), result)
    return result


def laf_alloc(graph: AssignmentGraph) -> AssignmentResult:
    """Least-allocated worker first, in arrival order; ties by worker id."""
    result = AssignmentResult({}, set())
    for task in graph.tasks:
        chosen = None
        best = None
        for wid in task.candidates:
            ledger = graph.ledgers[wid]
            if ledger.residual_capacity <= 0:
                continue
            key = (len(ledger.allocated), wid)
            if best is None or key < best:
                best = key
                chosen = wid
        if chosen is None:
            result.unallocated.add(task.task_id)
            continue
        _alloc(graph, task, chosen, result)
    return result


def nearest_alloc(graph: AssignmentGraph) -> AssignmentResult:
    """Smallest-detour candidate per task, in arrival order; ties by worker id."""
    result = AssignmentResult({}, set())
    for task in graph.tasks:
        chosen = None
        best = None
        for wid, beta in zip(task.candidates, task.betas):
            if graph.ledgers[wid].residual_capacity <= 0:
                continue
            key = (beta, wid)
            if best is None or key < best:
                best = key
                chosen = wid
        if chosen is None:
            result.unallocated.add(task.task_id)
            continue
        _alloc(graph, task, chosen, result)
    return result


# --------------------------- min-cost max-flow ---------------------------- #

_INT_INF = np.int64(2**62)


def _ssp_kernel(n, source, sink, to, cap, cost, head, nxt):
    """Successive shortest paths with potentials on an arc-array graph.

    Arcs are paired (arc i and i^1 are each other's residuals). All costs are
    non-negative integers, so Dijkstra with potentials applies from the first
    iteration. Augments one unit per path until the sink is unreachable;
    mutates ``cap`` in place and returns (flow, cost).
    """
    pot = np.zeros(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    done = np.empty(n, dtype=np.bool_)
    heap_key = np.empty(max(4 * n, 64), dtype=np.int64)
    heap_node = np.empty(max(4 * n, 64), dtype=np.int64)
    total_flow = 0
    total_cost = 0
    while True:
        dist[:] = _INT_INF
        done[:] = False
        parent[:] = -1
        dist[source] = 0
        heap_key[0] = 0
        heap_node[0] = source
        size = 1
        reached = False
        while size > 0:
            d = heap_key[0]
            u = heap_node[0]
            size -= 1
            heap_key[0] = heap_key[size]
            heap_node[0] = heap_node[size]
            i = 0
            while True:  # sift down
                left = 2 * i + 1
                right = left + 1
                smallest = i
                if left < size and heap_key[left] < heap_key[smallest]:
                    smallest = left
                if right < size and heap_key[right] < heap_key[smallest]:
                    smallest = right
                if smallest == i:
                    break
                heap_key[i], heap_key[smallest] = heap_key[smallest], heap_key[i]
                heap_node[i], heap_node[smallest] = heap_node[smallest], heap_node[i]
                i = smallest
            if done[u]:
                continue
            done[u] = True
            if u == sink:
                reached = True
                break
            pot_u = pot[u]
            e = head[u]
            while e != -1:
                if cap[e] > 0:
                    v = to[e]
                    if not done[v]:
                        nd = d + cost[e] + pot_u - pot[v]
                        if nd < dist[v]:
                            dist[v] = nd
                            parent[v] = e
                            if size >= heap_key.shape[0]:
                                grown_key = np.empty(heap_key.shape[0] * 2, dtype=np.int64)
                                grown_node = np.empty(heap_key.shape[0] * 2, dtype=np.int64)
                                grown_key[:size] = heap_key[:size]
                                grown_node[:size] = heap_node[:size]
                                heap_key = grown_key
                                heap_node = grown_node
                            j = size
                            heap_key[j] = nd
                            heap_node[j] = v
                            size += 1
                            while j > 0:  # sift up
                                p = (j - 1) // 2
                                if heap_key[p] <= heap_key[j]:
                                    break
                                heap_key[p], heap_key[j] = heap_key[j], heap_key[p]
                                heap_node[p], heap_node[j] = heap_node[j], heap_node[p]
                                j = p
                e = nxt[e]
        if not reached:
            break
        d_sink = dist[sink]
        for v in range(n):
            if dist[v] < d_sink:
                pot[v] += dist[v]
            else:
                pot[v] += d_sink
        v = sink
        while v != source:
            e = parent[v]
            cap[e] -= 1
            cap[e ^ 1] += 1
            total_cost += cost[e]
            v = to[e ^ 1]
        total_flow += 1
    return total_flow, total_cost


_ssp = _njit(cache=True)(_ssp_kernel) if _njit is not None else _ssp_kernel


def _beta_to_cost(beta_km: float) -> int:
    # integer meters keep the shortest-path arithmetic exact
    return int(round(beta_km * 1000.0))


def mcf_alloc(graph: AssignmentGraph) -> AssignmentResult:
    """Allocation-count-optimal assignment via min-cost max-flow.

    Builds source -> task (capacity 1) -> candidate (capacity 1, cost = detour
    in integer meters) -> sink (capacity = residual worker capacity) and runs
    successive shortest paths. Maximizing flow maximizes the number of
    allocated tasks; among maximum allocations the total detour is minimal.
    """
    result = AssignmentResult({}, set())
    tasks = graph.tasks
    if not tasks:
        return result

    worker_ids = sorted(graph.ledgers)
    worker_index = {wid: i for i, wid in enumerate(worker_ids)}
    n_tasks = len(tasks)
    n_nodes = 2 + n_tasks + len(worker_ids)
    source, sink = 0, 1

    n_edges = n_tasks + sum(len(t.candidates) for t in tasks) + len(worker_ids)
    m = 2 * n_edges
    to = np.empty(m, dtype=np.int64)
    cap = np.empty(m, dtype=np.int64)
    cost = np.empty(m, dtype=np.int64)
    head = np.full(n_nodes, -1, dtype=np.int64)
    nxt = np.empty(m, dtype=np.int64)
    arc = 0

    def add_edge(u: int, v: int, capacity: int, weight: int):
        nonlocal arc
        to[arc] = v
        cap[arc] = capacity
        cost[arc] = weight
        nxt[arc] = head[u]
        head[u] = arc
        to[arc + 1] = u
        cap[arc + 1] = 0
        cost[arc + 1] = -weight
        nxt[arc + 1] = head[v]
        head[v] = arc + 1
        arc += 2

    candidate_arcs: list[list[int]] = []
    for i, task in enumerate(tasks):
        add_edge(source, 2 + i, 1, 0)
        arcs = []
        for wid, beta in zip(task.candidates, task.betas):
            arcs.append(arc)
            add_edge(2 + i, 2 + n_tasks + worker_index[wid], 1, _beta_to_cost(beta))
        candidate_arcs.append(arcs)
    for wid in worker_ids:
        add_edge(
            2 + n_tasks + worker_index[wid], sink, max(0, graph.ledgers[wid].residual_capacity), 0
        )

    _ssp(n_nodes, source, sink, to, cap, cost, head, nxt)

    for task, arcs in zip(tasks, candidate_arcs):
        chosen = None
        for arc_id, wid in zip(arcs, task.candidates):
            if cap[arc_id] == 0:  # forward capacity consumed: flow routed here
                chosen = wid
                break
        if chosen is None:
            result.unallocated.add(task.task_id)
        else:
            _alloc(graph, task, chosen, result)
    return result
