"""Workload ingestion and synthesis.

Trip records (taxi-style) become delivery tasks and check-in records become
worker availabilities. Point timestamps are widened into validity periods,
availability radii are sampled from the trip-distance distribution, and
capacities are sampled so that, on average, the fleet can just absorb the
task load. All sampling is seeded and replayed in row order, so loading the
same file with the same configuration always yields the same objects.

CSV schemas (headered, UTF-8, ISO-8601 timestamps):

* trips: pickup_time, pickup_lat, pickup_lon, dropoff_time, dropoff_lat,
  dropoff_lon, fare
* check-ins: user_id, time, lat, lon
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from math import fsum, sqrt
from typing import Iterable, Sequence

from .geo import DistanceFn, haversine_km
from .model import Availability, Cents, GeoPoint, Task, TimePeriod, Worker

TRIP_COLUMNS = (
    "pickup_time",
    "pickup_lat",
    "pickup_lon",
    "dropoff_time",
    "dropoff_lat",
    "dropoff_lon",
    "fare",
)
CHECKIN_COLUMNS = ("user_id", "time", "lat", "lon")


class RowError(ValueError):
    """A malformed input row; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class DatasetConfig:
    """Adaptation knobs for turning point records into periods, disks, and capacities.

    delta_t: mean validity-period length in seconds; each record samples its
        own length from Normal(delta_t, delta_t/4) unless fixed_delta_t.
    radius_mean_coefficient: multiplies the trip-distance mean when sampling
        availability radii.
    fixed_capacity: give every worker this capacity instead of deriving it
        from the task-to-worker ratio.
    """

    delta_t: float = 7200.0
    radius_mean_coefficient: float = 1.0
    fixed_capacity: int | None = None
    fixed_delta_t: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if self.radius_mean_coefficient <= 0:
            raise ValueError("radius_mean_coefficient must be positive")


@dataclass(frozen=True)
class RawTrip:
    pickup_time: int
    pickup: GeoPoint
    dropoff_time: int
    dropoff: GeoPoint
    fare: Cents


@dataclass(frozen=True)
class RawCheckin:
    user_id: str
    time: int
    loc: GeoPoint


def widen(point_time: float, delta_t: float) -> TimePeriod:
    """Validity period of length delta_t starting at a point timestamp."""
    if delta_t <= 0:
        raise ValueError("delta_t must be positive")
    return TimePeriod(point_time, point_time + delta_t)


def _parse_time(text: str) -> int:
    moment = datetime.fromisoformat(text)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return int(moment.timestamp())


def _format_time(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%S")


def _read_rows(path, columns, line_parser, skip_bad_rows: bool):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(columns) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                out.append(line_parser(row))
            except (ValueError, TypeError, KeyError) as exc:
                err = RowError(line_no, str(exc))
                if not skip_bad_rows:
                    raise err from exc
    return out


def read_trips(path, skip_bad_rows: bool = False) -> list[RawTrip]:
    def parse(row) -> RawTrip:
        pickup_time = _parse_time(row["pickup_time"])
        dropoff_time = _parse_time(row["dropoff_time"])
        if dropoff_time < pickup_time:
            raise ValueError("dropoff before pickup")
        fare = round(float(row["fare"]) * 100)
        if fare < 0:
            raise ValueError("negative fare")
        return RawTrip(
            pickup_time,
            GeoPoint(float(row["pickup_lat"]), float(row["pickup_lon"])),
            dropoff_time,
            GeoPoint(float(row["dropoff_lat"]), float(row["dropoff_lon"])),
            fare,
        )

    return _read_rows(path, TRIP_COLUMNS, parse, skip_bad_rows)


def read_checkins(path, skip_bad_rows: bool = False) -> list[RawCheckin]:
    def parse(row) -> RawCheckin:
        user_id = row["user_id"].strip()
        if not user_id:
            raise ValueError("empty user_id")
        return RawCheckin(
            user_id, _parse_time(row["time"]), GeoPoint(float(row["lat"]), float(row["lon"]))
        )

    return _read_rows(path, CHECKIN_COLUMNS, parse, skip_bad_rows)


def write_trips(path, trips: Iterable[RawTrip]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIP_COLUMNS)
        for t in trips:
            writer.writerow(
                [
                    _format_time(t.pickup_time),
                    f"{t.pickup.lat:.6f}",
                    f"{t.pickup.lon:.6f}",
                    _format_time(t.dropoff_time),
                    f"{t.dropoff.lat:.6f}",
                    f"{t.dropoff.lon:.6f}",
                    f"{t.fare / 100:.2f}",
                ]
            )


def write_checkins(path, checkins: Iterable[RawCheckin]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHECKIN_COLUMNS)
        for c in checkins:
            writer.writerow([c.user_id, _format_time(c.time), f"{c.loc.lat:.6f}", f"{c.loc.lon:.6f}"])


def _sample_delta(rng: random.Random, config: DatasetConfig) -> float:
    if config.fixed_delta_t:
        return config.delta_t
    return max(1.0, round(rng.gauss(config.delta_t, config.delta_t / 4)))


def trips_to_tasks(trips: Sequence[RawTrip], config: DatasetConfig) -> list[Task]:
    """Tasks from trip records: ids are row positions, rewards are the fares.

    One validity length is sampled per trip and applied to both the pickup
    and the dropoff period.
    """
    rng = random.Random(f"{config.seed}|tasks")
    tasks = []
    for i, trip in enumerate(trips):
        delta = _sample_delta(rng, config)
        tasks.append(
            Task(
                id=i,
                source_period=widen(trip.pickup_time, delta),
                source_loc=trip.pickup,
                dest_period=widen(trip.dropoff_time, delta),
                dest_loc=trip.dropoff,
                reward=trip.fare,
            )
        )
    return tasks


def trip_distance_stats(trips: Sequence[RawTrip], dist: DistanceFn = haversine_km) -> tuple[float, float]:
    """(mean, population std) of trip distances in km; feeds radius sampling."""
    if not trips:
        return 0.0, 0.0
    distances = [dist(t.pickup, t.dropoff) for t in trips]
    mean = fsum(distances) / len(distances)
    var = fsum((d - mean) ** 2 for d in distances) / len(distances)
    return mean, sqrt(var)


def checkins_to_availabilities(
    checkins: Sequence[RawCheckin], trip_stats: tuple[float, float], config: DatasetConfig
) -> list[Availability]:
    """Availabilities from check-ins: widened periods, radii from the trip stats.

    Radii are drawn from Normal(trip_mean * coefficient, trip_std) and
    redrawn until positive.
    """
    mean, std = trip_stats
    mean *= config.radius_mean_coefficient
    if mean <= 0 and std <= 0:
        raise ValueError("trip distance stats are degenerate; cannot sample radii")
    delta_rng = random.Random(f"{config.seed}|avail")
    radius_rng = random.Random(f"{config.seed}|radius")
    out = []
    for c in checkins:
        delta = _sample_delta(delta_rng, config)
        radius = radius_rng.gauss(mean, std)
        while radius <= 0:
            radius = radius_rng.gauss(mean, std)
        out.append(Availability(c.user_id, widen(c.time, delta), c.loc, radius))
    return out


def load_tasks(path, config: DatasetConfig, skip_bad_rows: bool = False) -> list[Task]:
    return trips_to_tasks(read_trips(path, skip_bad_rows), config)


def load_availabilities(
    path, trip_stats: tuple[float, float], config: DatasetConfig, skip_bad_rows: bool = False
) -> list[Availability]:
    return checkins_to_availabilities(read_checkins(path, skip_bad_rows), trip_stats, config)


def workers_from_availabilities(availabilities: Sequence[Availability]) -> list[Worker]:
    """One zero-capacity worker per distinct id, availabilities in input order."""
    grouped: dict = {}
    for a in availabilities:
        grouped.setdefault(a.worker_id, []).append(a)
    return [Worker(wid, tuple(grouped[wid]), 0) for wid in sorted(grouped)]


def assign_capacities(
    workers: Sequence[Worker],
    total_tasks: int,
    config: DatasetConfig,
    rng: random.Random | None = None,
) -> list[Worker]:
    """Capacities sized to the workload: Normal(tasks/workers, mean/4), floored at 0.

    With ``fixed_capacity`` set, every worker gets that capacity instead.
    """
    if not workers:
        raise ValueError("no workers to assign capacities to")
    if config.fixed_capacity is not None:
        return [replace(w, capacity=config.fixed_capacity) for w in workers]
    rng = rng or random.Random(f"{config.seed}|capacity")
    mean = total_tasks / len(workers)
    return [
        replace(w, capacity=max(0, round(rng.gauss(mean, mean / 4)))) for w in workers
    ]


@dataclass(frozen=True)
class SynthParams:
    """Uniform synthetic workload over a lat/lon box and a time span."""

    n_tasks: int
    n_workers: int
    checkins_per_worker: int = 8
    lat_range: tuple[float, float] = (40.55, 40.95)
    lon_range: tuple[float, float] = (-74.1, -73.7)
    start_time: int = 1335830400  # 2012-05-01T00:00:00Z
    span: int = 24 * 3600
    trip_minutes: tuple[int, int] = (5, 60)
    fare_base: Cents = 250
    fare_per_km: Cents = 180

    def __post_init__(self):
        if self.n_tasks < 0 or self.n_workers < 0:
            raise ValueError("counts cannot be negative")
        if self.checkins_per_worker <= 0:
            raise ValueError("each worker needs at least one check-in")


def synth_raw(params: SynthParams, seed: int) -> tuple[list[RawTrip], list[RawCheckin]]:
    """Raw records quantized exactly as the CSV writers store them.

    Coordinates are rounded to 6 decimals, times to whole seconds, and fares
    to cents, so a write/read round trip reproduces the records bit for bit.
    """
    rng = random.Random(f"{seed}|synth")

    def point() -> GeoPoint:
        return GeoPoint(
            round(rng.uniform(*params.lat_range), 6), round(rng.uniform(*params.lon_range), 6)
        )

    trips = []
    for _ in range(params.n_tasks):
        pickup = point()
        dropoff = point()
        pickup_time = params.start_time + rng.randrange(max(1, params.span))
        duration = 60 * rng.randint(*params.trip_minutes)
        fare = params.fare_base + round(params.fare_per_km * haversine_km(pickup, dropoff))
        trips.append(RawTrip(pickup_time, pickup, pickup_time + duration, dropoff, fare))

    width = len(str(max(1, params.n_workers - 1)))
    checkins = []
    for w in range(params.n_workers):
        user_id = f"w{w:0{width}d}"
        for _ in range(params.checkins_per_worker):
            checkins.append(
                RawCheckin(user_id, params.start_time + rng.randrange(max(1, params.span)), point())
            )
    return trips, checkins


def synth_workload(params: SynthParams, config: DatasetConfig) -> tuple[list[Task], list[Worker]]:
    """Synthetic tasks and capacitated workers through the same adaptation path as file loads."""
    trips, checkins = synth_raw(params, config.seed)
    tasks = trips_to_tasks(trips, config)
    stats = trip_distance_stats(trips) if trips else (1.0, 0.0)  # taskless fleets get unit disks
    availabilities = checkins_to_availabilities(checkins, stats, config)
    workers = workers_from_availabilities(availabilities)
    if workers:
        workers = assign_capacities(workers, len(tasks), config)
    return tasks, workers
