"""Loaders, the dataset adaptation recipe, and synthetic workloads."""

from __future__ import annotations

import random
from math import fsum, sqrt

import pytest

from fairdispatch import data
from fairdispatch.data import (
    DatasetConfig,
    RawCheckin,
    RawTrip,
    RowError,
    SynthParams,
    assign_capacities,
    checkins_to_availabilities,
    read_checkins,
    read_trips,
    synth_raw,
    synth_workload,
    trip_distance_stats,
    trips_to_tasks,
    widen,
    workers_from_availabilities,
    write_checkins,
    write_trips,
)
from fairdispatch.model import GeoPoint, Worker

from conftest import G


TRIP_HEADER = "pickup_time,pickup_lat,pickup_lon,dropoff_time,dropoff_lat,dropoff_lon,fare\n"
GOOD_ROW = "2012-05-01T12:00:00,40.70,-74.00,2012-05-01T12:30:00,40.75,-73.98,12.50\n"


class TestWiden:
    def test_two_hour_window(self):
        period = widen(43200, 7200)
        assert (period.begin, period.end) == (43200, 50400)

    def test_zero_length_is_rejected(self):
        with pytest.raises(ValueError):
            widen(100, 0)

    def test_length_is_definitional(self):
        rng = random.Random(1)
        for _ in range(100):
            p = rng.uniform(0, 10**9)
            d = rng.uniform(1e-6, 10**6)
            period = widen(p, d)
            assert period.end - period.begin == pytest.approx(d)


class TestReadTrips:
    def test_well_formed_row(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(TRIP_HEADER + GOOD_ROW)
        trips = read_trips(path)
        assert len(trips) == 1
        assert trips[0].fare == 1250
        assert trips[0].pickup == GeoPoint(40.70, -74.00)

    def test_negative_fare_is_a_row_error(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(TRIP_HEADER + GOOD_ROW.replace("12.50", "-3.00"))
        with pytest.raises(RowError) as err:
            read_trips(path)
        assert err.value.line == 2

    def test_dropoff_before_pickup_is_a_row_error(self, tmp_path):
        path = tmp_path / "t.csv"
        bad = GOOD_ROW.replace("2012-05-01T12:30:00", "2012-05-01T11:00:00")
        path.write_text(TRIP_HEADER + bad)
        with pytest.raises(RowError):
            read_trips(path)

    def test_skip_bad_rows_keeps_going(self, tmp_path):
        path = tmp_path / "t.csv"
        bad = GOOD_ROW.replace("12.50", "not-a-number")
        path.write_text(TRIP_HEADER + GOOD_ROW + bad + GOOD_ROW)
        assert len(read_trips(path, skip_bad_rows=True)) == 2

    def test_missing_column_fails_fast(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("pickup_time,fare\nx,1\n")
        with pytest.raises(ValueError, match="missing columns"):
            read_trips(path)

    def test_out_of_range_coordinate_is_a_row_error(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(TRIP_HEADER + GOOD_ROW.replace("40.70", "140.70"))
        with pytest.raises(RowError):
            read_trips(path)


class TestTripsToTasks:
    def test_periods_are_widened_from_the_point_times(self):
        trip = RawTrip(1000, G(0, 0), 2000, G(0, 1), 500)
        (task,) = trips_to_tasks([trip], DatasetConfig(seed=1))
        assert task.source_period.begin == 1000
        assert task.dest_period.begin == 2000
        assert task.source_period.length == task.dest_period.length  # one draw per trip
        assert task.reward == 500

    def test_fixed_delta_t(self):
        trip = RawTrip(1000, G(0, 0), 2000, G(0, 1), 500)
        (task,) = trips_to_tasks([trip], DatasetConfig(delta_t=3600, fixed_delta_t=True, seed=9))
        assert task.source_period.length == 3600

    def test_deterministic_given_config(self):
        trips, _ = synth_raw(SynthParams(n_tasks=50, n_workers=5), seed=3)
        config = DatasetConfig(seed=5)
        assert trips_to_tasks(trips, config) == trips_to_tasks(trips, config)


class TestRadiusSampling:
    def _stats_and_radii(self, coefficient, n=10_000):
        trips, _ = synth_raw(SynthParams(n_tasks=400, n_workers=5), seed=11)
        stats = trip_distance_stats(trips)
        checkins = [RawCheckin(f"u{i}", 1000 + i, G(0, 0)) for i in range(n)]
        config = DatasetConfig(radius_mean_coefficient=coefficient, seed=13)
        avails = checkins_to_availabilities(checkins, stats, config)
        return stats, [a.radius for a in avails]

    def test_coefficient_one_matches_trip_mean(self):
        (mean, std), radii = self._stats_and_radii(1.0)
        sample_mean = fsum(radii) / len(radii)
        assert abs(sample_mean - mean) < 4 * std / sqrt(len(radii)) + 0.05

    def test_coefficient_four_scales_the_mean(self):
        (mean, std), radii = self._stats_and_radii(4.0)
        sample_mean = fsum(radii) / len(radii)
        assert abs(sample_mean - 4 * mean) < 4 * std / sqrt(len(radii)) + 0.05

    def test_all_radii_positive(self):
        _, radii = self._stats_and_radii(0.1, n=2000)
        assert all(r > 0 for r in radii)

    def test_zero_checkins_give_no_workers(self):
        assert workers_from_availabilities([]) == []


class TestAssignCapacities:
    def _workers(self, n):
        return [Worker(f"u{i:04d}", (), 0) for i in range(n)]

    def test_fixed_capacity(self):
        workers = assign_capacities(
            self._workers(10), 1000, DatasetConfig(fixed_capacity=64, seed=1)
        )
        assert all(w.capacity == 64 for w in workers)

    def test_derived_mean_tracks_task_to_worker_ratio(self):
        # workload shaped like the reference dataset: 128k tasks, 987 workers
        expected = 128_000 / 987
        draws = []
        for seed in range(30):
            workers = assign_capacities(
                self._workers(987), 128_000, DatasetConfig(seed=seed)
            )
            draws.extend(w.capacity for w in workers)
        sample_mean = fsum(draws) / len(draws)
        stderr = (expected / 4) / sqrt(len(draws))
        assert abs(sample_mean - expected) < 4 * stderr + 0.1
        assert abs(sample_mean - 129.7) < 1.0

    def test_negative_draw_clamps_to_zero(self):
        class NegativeRng:
            def gauss(self, mu, sigma):
                return -5.0

        workers = assign_capacities(self._workers(3), 10, DatasetConfig(seed=1), NegativeRng())
        assert [w.capacity for w in workers] == [0, 0, 0]

    def test_no_workers_is_an_error(self):
        with pytest.raises(ValueError):
            assign_capacities([], 10, DatasetConfig(seed=1))


class TestSynthWorkload:
    def test_zero_tasks(self):
        tasks, workers = synth_workload(
            SynthParams(n_tasks=0, n_workers=4), DatasetConfig(seed=2)
        )
        assert tasks == []
        assert len(workers) == 4

    def test_same_seed_is_byte_identical(self):
        params = SynthParams(n_tasks=40, n_workers=6)
        a = synth_workload(params, DatasetConfig(seed=8))
        b = synth_workload(params, DatasetConfig(seed=8))
        assert a == b

    def test_different_seed_differs(self):
        params = SynthParams(n_tasks=40, n_workers=6)
        a = synth_workload(params, DatasetConfig(seed=8))
        b = synth_workload(params, DatasetConfig(seed=9))
        assert a != b

    def test_every_generated_object_satisfies_its_invariants(self):
        tasks, workers = synth_workload(
            SynthParams(n_tasks=100, n_workers=10), DatasetConfig(seed=4)
        )
        for task in tasks:
            assert task.reward >= 0
            assert task.source_period.begin <= task.source_period.end
        for worker in workers:
            assert worker.capacity >= 0
            for a in worker.availabilities:
                assert a.radius > 0
                assert a.worker_id == worker.id


class TestCsvRoundTrip:
    def test_raw_records_round_trip_exactly(self, tmp_path):
        trips, checkins = synth_raw(SynthParams(n_tasks=60, n_workers=8), seed=21)
        write_trips(tmp_path / "trips.csv", trips)
        write_checkins(tmp_path / "checkins.csv", checkins)
        assert read_trips(tmp_path / "trips.csv") == trips
        assert read_checkins(tmp_path / "checkins.csv") == checkins

    def test_domain_objects_round_trip_through_files(self, tmp_path):
        params = SynthParams(n_tasks=30, n_workers=5)
        config = DatasetConfig(seed=33)
        trips, checkins = synth_raw(params, seed=config.seed)
        write_trips(tmp_path / "trips.csv", trips)
        write_checkins(tmp_path / "checkins.csv", checkins)

        direct_tasks = trips_to_tasks(trips, config)
        loaded_tasks = data.load_tasks(tmp_path / "trips.csv", config)
        assert direct_tasks == loaded_tasks

        stats = trip_distance_stats(trips)
        direct = checkins_to_availabilities(checkins, stats, config)
        loaded = data.load_availabilities(tmp_path / "checkins.csv", stats, config)
        assert direct == loaded

    def test_timezone_aware_timestamps_accepted(self, tmp_path):
        path = tmp_path / "t.csv"
        row = GOOD_ROW.replace("2012-05-01T12:00:00", "2012-05-01T12:00:00+00:00")
        path.write_text(TRIP_HEADER + row)
        trips = read_trips(path)
        assert trips[0].pickup_time == 1335873600
