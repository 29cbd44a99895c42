"""Domain types and the closed-form evaluation metrics of the dispatch system.

Rewards are stored as integer cents so that ledger arithmetic is exact;
metrics are computed in double precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from math import fsum
from typing import Iterable

Ident = int | str
Cents = int


class MetricUndefinedError(ValueError):
    """A metric has no defined value for the given input."""


@dataclass(frozen=True, order=True)
class TimePeriod:
    """Closed time interval [begin, end], in seconds since the epoch."""

    begin: float
    end: float

    def __post_init__(self):
        if self.begin > self.end:
            raise ValueError(f"period begins ({self.begin}) after it ends ({self.end})")

    def overlaps(self, other: "TimePeriod") -> bool:
        """Closed-interval intersection test; touching endpoints count."""
        return self.begin <= other.end and other.begin <= self.end

    @property
    def length(self) -> float:
        return self.end - self.begin


@dataclass(frozen=True)
class GeoPoint:
    """Geographic coordinate in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class Task:
    """Two-step delivery job: receive at the source, drop off at the destination.

    Each step carries its own validity period. ``reward`` is the payment for
    completing the whole task, in integer cents.
    """

    id: Ident
    source_period: TimePeriod
    source_loc: GeoPoint
    dest_period: TimePeriod
    dest_loc: GeoPoint
    reward: Cents

    def __post_init__(self):
        if self.reward < 0:
            raise ValueError(f"task {self.id}: negative reward {self.reward}")


@dataclass(frozen=True)
class Availability:
    """A worker's declared service window: a disk (center, radius km) and a period."""

    worker_id: Ident
    period: TimePeriod
    center: GeoPoint
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"availability of {self.worker_id}: radius must be positive")


@dataclass(frozen=True)
class Worker:
    id: Ident
    availabilities: tuple[Availability, ...]
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "availabilities", tuple(self.availabilities))
        if self.capacity < 0:
            raise ValueError(f"worker {self.id}: negative capacity")
        for a in self.availabilities:
            if a.worker_id != self.id:
                raise ValueError(f"worker {self.id}: availability belongs to {a.worker_id}")


@dataclass
class WorkerLedger:
    """Running record of one worker's accepted offers and allocated tasks.

    ``accepted`` keeps (task_id, reward) pairs in the order the offers were
    accepted; only the first ``capacity`` of them count as the worker's input
    when her acceptances exceed what she can serve.
    """

    worker_id: Ident
    capacity: int
    accepted: list[tuple[Ident, Cents]] = field(default_factory=list)
    allocated: list[tuple[Ident, Cents]] = field(default_factory=list)

    @property
    def residual_capacity(self) -> int:
        return self.capacity - len(self.allocated)

    @property
    def counted_acceptances(self) -> int:
        """Number of acceptances that enter the assignment-ratio denominator."""
        return min(len(self.accepted), self.capacity)

    def record_acceptance(self, task_id: Ident, reward: Cents) -> None:
        self.accepted.append((task_id, reward))

    def record_allocation(self, task_id: Ident, reward: Cents) -> None:
        if self.residual_capacity <= 0:
            raise ValueError(f"worker {self.worker_id} has no residual capacity")
        self.allocated.append((task_id, reward))

    def lar_terms(self) -> tuple[Cents, Cents]:
        """(allocated reward, capacity-truncated accepted reward), in cents."""
        num = sum(r for _, r in self.allocated)
        den = sum(r for _, r in self.accepted[: self.counted_acceptances])
        return num, den

    def copy(self) -> "WorkerLedger":
        return WorkerLedger(
            self.worker_id, self.capacity, list(self.accepted), list(self.allocated)
        )


def lar(ledger: WorkerLedger) -> float:
    """Local assignment ratio: allocated reward over capacity-truncated accepted reward.

    A worker whose counted acceptances sum to nothing has, by convention, a
    ratio of 1: the system owes her nothing yet.
    """
    num, den = ledger.lar_terms()
    if den == 0:
        return 1.0
    return num / den


def unfairness(lar_values: Iterable[float]) -> float:
    """Coefficient of variation (population std over mean) of assignment ratios.

    Raises:
        MetricUndefinedError: on an empty set or a zero mean.
    """
    values = list(lar_values)
    if not values:
        raise MetricUndefinedError("unfairness undefined: no ratios to compare")
    mean = fsum(values) / len(values)
    if mean <= 0.0:
        raise MetricUndefinedError("unfairness undefined: mean ratio is zero")
    var = fsum((v - mean) ** 2 for v in values) / len(values)
    return math.sqrt(var) / mean


def tar(allocated_count: int, total_tasks: int) -> float:
    """Task allocation ratio: allocated tasks over all tasks."""
    if total_tasks <= 0:
        raise MetricUndefinedError("task allocation ratio undefined without tasks")
    if not 0 <= allocated_count <= total_tasks:
        raise ValueError(f"allocated count {allocated_count} outside [0, {total_tasks}]")
    return allocated_count / total_tasks


def ar(allocated_count: int, total_accepted_offers: int) -> float:
    """Assignment ratio: allocated tasks over accepted offers; 1 when nothing was accepted."""
    if total_accepted_offers == 0:
        return 1.0
    return allocated_count / total_accepted_offers


def objective(tar_value: float, unfairness_value: float, rho: float) -> float:
    """Combined score: allocation ratio discounted exponentially by unfairness.

    ``rho`` in [0, 1] weights the discount; 0 reduces the score to the
    allocation ratio alone.
    """
    return tar_value * math.exp(-rho * unfairness_value)


def _agg(values: list[float]) -> tuple[float | str, float | str, float | str]:
    if not values:
        return "", "", ""
    return fsum(values) / len(values), min(values), max(values)


@dataclass
class MetricsReport:
    """Scalar metrics plus per-worker distributions for one simulation run."""

    tar: float
    unfairness: float
    ar: float
    objective: float
    avg_k: float
    avg_wait_rounds: float
    lar_values: list[float]
    earnings_per_km: list[float]

    #: Flat CSV row layout; list-valued fields are flattened to count/mean/min/max.
    CSV_FIELDS = (
        "tar",
        "unfairness",
        "ar",
        "objective",
        "avg_k",
        "avg_wait_rounds",
        "worker_count",
        "lar_mean",
        "lar_min",
        "lar_max",
        "epkm_mean",
        "epkm_min",
        "epkm_max",
    )

    def to_dict(self) -> dict:
        return {
            "tar": self.tar,
            "unfairness": self.unfairness,
            "ar": self.ar,
            "objective": self.objective,
            "avg_k": self.avg_k,
            "avg_wait_rounds": self.avg_wait_rounds,
            "lar_values": list(self.lar_values),
            "earnings_per_km": list(self.earnings_per_km),
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def csv_row(self) -> dict:
        lar_mean, lar_min, lar_max = _agg(self.lar_values)
        ep_mean, ep_min, ep_max = _agg(self.earnings_per_km)
        return {
            "tar": self.tar,
            "unfairness": self.unfairness,
            "ar": self.ar,
            "objective": self.objective,
            "avg_k": self.avg_k,
            "avg_wait_rounds": self.avg_wait_rounds,
            "worker_count": len(self.lar_values),
            "lar_mean": lar_mean,
            "lar_min": lar_min,
            "lar_max": lar_max,
            "epkm_mean": ep_mean,
            "epkm_min": ep_min,
            "epkm_max": ep_max,
        }
