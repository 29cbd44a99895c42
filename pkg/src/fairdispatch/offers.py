"""Batched progressive offers.

Instead of broadcasting a task to every nominee (spam) or polling them one
by one (slow), the task is offered to batches of k nominees until somebody
accepts. k balances two thresholds: the probability that a batch produces at
least one acceptance, and a floor on the expected assignment ratio.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .model import Ident, Task
from .nomination import Nominee

#: decide(task_id, worker_id, acceptance_prob) -> accepted?
DecisionFn = Callable[[Ident, Ident, float], bool]


class OfferMode(str, Enum):
    UNICAST = "unicast"
    MULTICAST = "multicast"
    BROADCAST = "broadcast"


@dataclass(frozen=True)
class OfferPolicy:
    """Thresholds steering the batch size.

    epsilon: minimum probability that a batch yields at least one acceptance.
    theta: floor on the expected assignment ratio of a batch.
    """

    epsilon: float = 0.95
    theta: float = 0.4
    mode: OfferMode = OfferMode.MULTICAST

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon {self.epsilon} outside (0, 1]")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta {self.theta} outside [0, 1]")


@dataclass
class OfferSession:
    """Outcome of offering one task: who was asked, who said yes, in how many rounds."""

    task_id: Ident
    nominees: list[Nominee]
    k: int
    rounds_waited: int
    offered: list[Ident]
    candidates: list[Ident]

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "k": self.k,
            "rounds_waited": self.rounds_waited,
            "offered": list(self.offered),
            "candidates": list(self.candidates),
            "nominees": [
                {
                    "worker_id": n.worker_id,
                    "alpha": n.alpha,
                    "beta": n.beta,
                    "acceptance_prob": n.acceptance_prob,
                }
                for n in self.nominees
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def acceptance_sampler(seed: int) -> DecisionFn:
    """Deterministic accept/reject draws keyed by (seed, task, worker).

    Each (task, worker) pair gets one independent uniform draw derived from a
    hash, so results are reproducible across processes and platforms and do
    not depend on the order in which offers are made.
    """
    prefix = f"{seed}|".encode()

    def decide(task_id: Ident, worker_id: Ident, prob: float) -> bool:
        digest = hashlib.sha256(prefix + f"{task_id}|{worker_id}".encode()).digest()
        u = int.from_bytes(digest[:8], "big") / 2.0**64
        return u < prob

    return decide


def response_probability(k: int, nominees: Sequence[Nominee]) -> float:
    """Probability that at least one of the first k nominees accepts."""
    if not 1 <= k <= len(nominees):
        raise ValueError(f"k={k} outside [1, {len(nominees)}]")
    miss = 1.0
    for n in nominees[:k]:
        miss *= 1.0 - n.acceptance_prob
    return 1.0 - miss


def expected_ar_lower_bound(k: int, nominees: Sequence[Nominee]) -> float:
    """Lower bound on the expected assignment ratio when offering to k nominees.

    One over the sum of the first k acceptance probabilities. May exceed 1
    when the probabilities sum below 1; it is only ever compared against a
    threshold that is at most 1.
    """
    if not 1 <= k <= len(nominees):
        raise ValueError(f"k={k} outside [1, {len(nominees)}]")
    total = sum(n.acceptance_prob for n in nominees[:k])
    if total == 0.0:
        return math.inf
    return 1.0 / total


def select_k(nominees: Sequence[Nominee], policy: OfferPolicy) -> int:
    """Batch size for one task's offers.

    The feasible range runs from the smallest k whose response probability
    reaches epsilon up to the largest k whose expected assignment ratio stays
    at or above theta; the largest feasible k is chosen. When the two bounds
    conflict, the assignment-ratio floor is relaxed and the response bound
    wins. When even offering to everyone cannot reach epsilon, everyone is
    offered. Unicast forces k=1 and broadcast forces k=len(nominees).
    """
    n = len(nominees)
    if n == 0:
        raise ValueError("cannot size a batch without nominees")
    if policy.mode is OfferMode.UNICAST:
        return 1
    if policy.mode is OfferMode.BROADCAST:
        return n

    k_low = None
    miss = 1.0
    for i, nom in enumerate(nominees, start=1):
        miss *= 1.0 - nom.acceptance_prob
        if 1.0 - miss >= policy.epsilon:
            k_low = i
            break

    k_up = 0
    total = 0.0
    for i, nom in enumerate(nominees, start=1):
        total += nom.acceptance_prob
        bound = math.inf if total == 0.0 else 1.0 / total
        if bound >= policy.theta:
            k_up = i
        else:
            break  # the bound only decreases from here

    if k_low is None:
        return n
    if k_low <= k_up:
        return k_up
    return k_low


def run_offer_rounds(
    task: Task,
    nominees: Sequence[Nominee],
    policy: OfferPolicy,
    decide: DecisionFn,
    max_rounds: int | None = None,
    k: int | None = None,
) -> OfferSession:
    """Offer the task to successive batches until somebody accepts.

    Nominees must be sorted by descending acceptance probability. The batch
    size is computed once and reused; the last batch may be smaller. Rounds
    stop at the first batch that produces a candidate, when every nominee has
    been asked, or after ``max_rounds`` batches. ``k`` overrides the policy
    computation when given. No nominee is ever offered the task twice.
    """
    if not nominees:
        raise ValueError(f"task {task.id}: no nominees to offer")
    if k is None:
        k = select_k(nominees, policy)
    elif not 1 <= k <= len(nominees):
        raise ValueError(f"k={k} outside [1, {len(nominees)}]")

    offered: list[Ident] = []
    candidates: list[Ident] = []
    rounds = 0
    for start in range(0, len(nominees), k):
        if max_rounds is not None and rounds >= max_rounds:
            break
        rounds += 1
        for nom in nominees[start : start + k]:
            offered.append(nom.worker_id)
            if decide(task.id, nom.worker_id, nom.acceptance_prob):
                candidates.append(nom.worker_id)
        if candidates:
            break
    return OfferSession(task.id, list(nominees), k, rounds, offered, candidates)
