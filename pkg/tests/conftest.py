"""Shared builders for compact test setup."""

from __future__ import annotations

import pytest

from fairdispatch.model import Availability, GeoPoint, Task, TimePeriod, Worker
from fairdispatch.nomination import Nominee, SatisfyingPair


def P(begin, end) -> TimePeriod:
    return TimePeriod(begin, end)


def G(lat, lon) -> GeoPoint:
    return GeoPoint(lat, lon)


def mk_task(
    tid=0,
    source_period=None,
    source_loc=None,
    dest_period=None,
    dest_loc=None,
    reward=1000,
) -> Task:
    return Task(
        id=tid,
        source_period=source_period or P(0, 100),
        source_loc=source_loc or G(0.0, 0.0),
        dest_period=dest_period or P(0, 100),
        dest_loc=dest_loc or G(0.0, 1.0),
        reward=reward,
    )


def mk_avail(wid="w", period=None, center=None, radius=10.0) -> Availability:
    return Availability(wid, period or P(0, 100), center or G(0.0, 0.0), radius)


def mk_worker(wid="w", availabilities=(), capacity=1) -> Worker:
    return Worker(wid, tuple(availabilities), capacity)


def mk_nominee(prob, wid="w", alpha=0.0, beta=0.0) -> Nominee:
    a = mk_avail(wid)
    return Nominee(wid, SatisfyingPair(a, a), alpha, beta, prob)


@pytest.fixture
def planar():
    from fairdispatch.geo import euclidean_km

    return euclidean_km
