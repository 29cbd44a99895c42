"""Fair task dispatch for crowdsourced delivery.

Two-phase matching: nominate workers whose availabilities cover both steps
of a delivery task, offer the task to batches of nominees until one accepts,
then allocate each task to a single accepted worker. Allocation strategies
trade allocation ratio against fairness, measured as the coefficient of
variation of per-worker assignment ratios. Offline, windowed, and instant
variants share the same pipeline.
"""

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
from .geo import euclidean_km, haversine_km
from .model import (
    Availability,
    GeoPoint,
    MetricsReport,
    MetricUndefinedError,
    Task,
    TimePeriod,
    Worker,
    WorkerLedger,
    ar,
    lar,
    objective,
    tar,
    unfairness,
)
from .nomination import (
    Nominee,
    SatisfyingPair,
    TemporalIndex,
    acceptance_probability,
    movement_cost,
    nominate,
    nominee_list,
    satisfies,
)
from .offers import (
    OfferMode,
    OfferPolicy,
    OfferSession,
    acceptance_sampler,
    expected_ar_lower_bound,
    response_probability,
    run_offer_rounds,
    select_k,
)
from .online import AvailabilityArrival, TaskArrival, run_online, stream_from_workload
from .pipeline import ALLOCATOR_NAMES, AssignmentRecord, RunResult, build_report, run_offline

__all__ = [
    "ALLOCATOR_NAMES",
    "AssignmentGraph",
    "AssignmentRecord",
    "AssignmentResult",
    "Availability",
    "AvailabilityArrival",
    "GeoPoint",
    "GraphTask",
    "MetricsReport",
    "MetricUndefinedError",
    "Nominee",
    "OfferMode",
    "OfferPolicy",
    "OfferSession",
    "RunResult",
    "SatisfyingPair",
    "Task",
    "TaskArrival",
    "TemporalIndex",
    "TimePeriod",
    "Worker",
    "WorkerLedger",
    "acceptance_probability",
    "acceptance_sampler",
    "ar",
    "build_report",
    "euclidean_km",
    "expected_ar_lower_bound",
    "f_aware",
    "haversine_km",
    "laf_alloc",
    "lar",
    "mcf_alloc",
    "movement_cost",
    "nearest_alloc",
    "nominate",
    "nominee_list",
    "objective",
    "random_alloc",
    "response_probability",
    "run_offer_rounds",
    "run_offline",
    "run_online",
    "satisfies",
    "select_k",
    "stream_from_workload",
    "tar",
    "unfairness",
]

__version__ = "0.1.0"
