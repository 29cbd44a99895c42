"""Phase 1 of dispatch: decide which workers can serve a task.

A worker is nominated when her availabilities cover both the receive and
the deliver step of a task. Each nominee carries the extra distance the job
costs her and the resulting probability that she accepts an offer for it.
Temporal screening goes through an interval tree so that only availabilities
overlapping a step's validity period are examined spatially.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping

from .geo import DistanceFn
from .model import Availability, Ident, Task, TimePeriod, Worker

#: Slack for float round-off when checking that detours never undercut the
#: direct source-to-destination distance (1e-9 km = 1 micrometer).
_ALPHA_BETA_TOL = 1e-9


@dataclass(frozen=True)
class SatisfyingPair:
    """Availabilities covering the receive and deliver steps; may be the same one."""

    receive: Availability
    deliver: Availability

    @property
    def single(self) -> bool:
        return self.receive == self.deliver


@dataclass(frozen=True)
class Nominee:
    worker_id: Ident
    pair: SatisfyingPair
    alpha: float
    beta: float
    acceptance_prob: float


def satisfies(
    step_period: TimePeriod, step_loc, availability: Availability, dist: DistanceFn
) -> bool:
    """True when the availability covers one task step.

    The periods must intersect (closed intervals, touching endpoints count)
    and the step location must lie inside the availability disk, boundary
    inclusive.
    """
    return step_period.overlaps(availability.period) and (
        dist(step_loc, availability.center) <= availability.radius
    )


def movement_cost(task: Task, pair: SatisfyingPair, dist: DistanceFn) -> tuple[float, float]:
    """(alpha, beta) in km: the trip itself, and the worker-dependent detour.

    alpha is the source-to-destination distance, identical for every worker.
    beta covers moving to the source and returning from the destination; when
    the two steps are covered by different availabilities the worker returns
    to each anchor, so both legs double and the distance between the anchors
    is added.
    """
    alpha = dist(task.source_loc, task.dest_loc)
    if pair.single:
        anchor = pair.receive.center
        beta = dist(anchor, task.source_loc) + dist(task.dest_loc, anchor)
    else:
        beta = (
            2.0 * dist(pair.receive.center, task.source_loc)
            + 2.0 * dist(task.dest_loc, pair.deliver.center)
            + dist(pair.receive.center, pair.deliver.center)
        )
    return alpha, beta


def acceptance_probability(alpha: float, beta: float, base_acceptance: float) -> float:
    """Probability that a nominee accepts: exp(alpha - beta) scaled by a base rate.

    A perfectly placed worker (beta == alpha) accepts with the base rate; the
    probability decays exponentially with the detour. Requires alpha <= beta,
    which any metric distance guarantees.
    """
    if not 0.0 <= base_acceptance <= 1.0:
        raise ValueError(f"base acceptance {base_acceptance} outside [0, 1]")
    if alpha > beta + _ALPHA_BETA_TOL:
        raise ValueError(
            f"alpha {alpha} exceeds beta {beta}; movement distances violate the triangle inequality"
        )
    return math.exp(min(alpha - beta, 0.0)) * base_acceptance


def nominate(task: Task, worker: Worker, dist: DistanceFn) -> SatisfyingPair | None:
    """The detour-minimizing availability pair serving both task steps, if any.

    Several pairs may qualify; the one with the smallest beta is returned
    (first in availability order on exact ties), since the cheapest detour
    maximizes the worker's acceptance probability.
    """
    receive_ok = [
        a for a in worker.availabilities if satisfies(task.source_period, task.source_loc, a, dist)
    ]
    if not receive_ok:
        return None
    deliver_ok = [
        a for a in worker.availabilities if satisfies(task.dest_period, task.dest_loc, a, dist)
    ]
    if not deliver_ok:
        return None

    to_source = {a: dist(a.center, task.source_loc) for a in receive_ok}
    from_dest = {a: dist(task.dest_loc, a.center) for a in deliver_ok}
    best: SatisfyingPair | None = None
    best_beta = math.inf
    for ap in receive_ok:
        for aq in deliver_ok:
            if ap == aq:
                beta = to_source[ap] + from_dest[aq]
            else:
                beta = 2.0 * to_source[ap] + 2.0 * from_dest[aq] + dist(ap.center, aq.center)
            if beta < best_beta:
                best_beta = beta
                best = SatisfyingPair(ap, aq)
    return best


def nominee_list(
    task: Task,
    workers: Mapping[Ident, Worker] | Iterable[Worker],
    index: "TemporalIndex",
    dist: DistanceFn,
    base_acceptance: float,
) -> list[Nominee]:
    """All workers able to serve the task, most likely to accept first.

    The index is queried once per step; spatial containment is then checked
    only on the returned availabilities. Ties in acceptance probability are
    broken by ascending worker id so the order is reproducible.
    """
    by_id = workers if isinstance(workers, Mapping) else {w.id: w for w in workers}
    receive_ids = {
        a.worker_id
        for a in index.query(task.source_period)
        if dist(task.source_loc, a.center) <= a.radius
    }
    deliver_ids = {
        a.worker_id
        for a in index.query(task.dest_period)
        if dist(task.dest_loc, a.center) <= a.radius
    }
    nominees = []
    for wid in sorted(receive_ids & deliver_ids):
        pair = nominate(task, by_id[wid], dist)
        alpha, beta = movement_cost(task, pair, dist)
        prob = acceptance_probability(alpha, beta, base_acceptance)
        nominees.append(Nominee(wid, pair, alpha, beta, prob))
    nominees.sort(key=lambda n: (-n.acceptance_prob, n.worker_id))
    return nominees


class _Node:
    __slots__ = ("center", "by_begin", "begins", "by_end_desc", "neg_ends", "left", "right")

    def __init__(self, center, straddling, left, right):
        self.center = center
        self.by_begin = sorted(straddling, key=lambda a: a.period.begin)
        self.begins = [a.period.begin for a in self.by_begin]
        self.by_end_desc = sorted(straddling, key=lambda a: -a.period.end)
        self.neg_ends = [-a.period.end for a in self.by_end_desc]
        self.left = left
        self.right = right


class TemporalIndex:
    """Static interval tree over availability periods.

    Supports overlap queries against a closed time interval; the result is
    exactly the set a linear scan would produce.
    """

    def __init__(self, availabilities: Iterable[Availability]):
        items = list(availabilities)
        self._size = len(items)
        self._root = self._build(items)

    @staticmethod
    def _build(items: list[Availability]) -> _Node | None:
        if not items:
            return None
        mids = sorted((a.period.begin + a.period.end) / 2 for a in items)
        center = mids[len(mids) // 2]
        left_items, straddling, right_items = [], [], []
        for a in items:
            if a.period.end < center:
                left_items.append(a)
            elif a.period.begin > center:
                right_items.append(a)
            else:
                straddling.append(a)
        return _Node(
            center,
            straddling,
            TemporalIndex._build(left_items),
            TemporalIndex._build(right_items),
        )

    def query(self, period: TimePeriod) -> list[Availability]:
        """Availabilities whose period intersects ``period`` (closed intervals)."""
        out: list[Availability] = []
        node = self._root
        stack = [node] if node else []
        qb, qe = period.begin, period.end
        while stack:
            node = stack.pop()
            if qe < node.center:
                # straddling intervals all end at or after center > qe
                out.extend(node.by_begin[: bisect_right(node.begins, qe)])
                if node.left:
                    stack.append(node.left)
            elif qb > node.center:
                # straddling intervals all begin at or before center < qb
                out.extend(node.by_end_desc[: bisect_right(node.neg_ends, -qb)])
                if node.right:
                    stack.append(node.right)
            else:
                out.extend(node.by_begin)
                if node.left:
                    stack.append(node.left)
                if node.right:
                    stack.append(node.right)
        return out

    def __len__(self) -> int:
        return self._size
