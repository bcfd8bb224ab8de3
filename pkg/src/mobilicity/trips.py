"""Trip detection from space-time trajectories of per-user daily events.

Each user-day becomes a trajectory in (time, cumulative distance) space,
which is simplified and cut into segments classified by slope. Maximal
runs of moving segments are trips; every event of the day ends up in
exactly one of four classes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date as date_type
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .geo import Tower, haversine_m
from .ingest import Event, UserDay


@dataclass(frozen=True)
class SpaceTimePoint:
    t: float  # seconds since local midnight
    d: float  # cumulative meters since the first event of the day
    event_index: int  # index into the UserDay event list


class SegmentClass(Enum):
    STATIONARY = "stationary"
    MOVING = "moving"
    INVALID = "invalid"


class EventClass(Enum):
    STATIONARY = "stationary"
    TRIP_START = "trip_start"
    WITHIN_TRIP = "within_trip"
    TRIP_END = "trip_end"


@dataclass(frozen=True)
class TripRuleConfig:
    """Thresholds for segment classification and trajectory simplification."""

    simplify_tol_m: float = 500.0
    v_stationary_ms: float = 0.42  # ~1.5 km/h walking floor
    v_max_ms: float = 42.0  # ~150 km/h noise ceiling
    d_min_m: float = 500.0

    def __post_init__(self) -> None:
        for name in ("simplify_tol_m", "v_stationary_ms", "v_max_ms", "d_min_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.v_stationary_ms >= self.v_max_ms:
            raise ValueError("v_stationary_ms must be below v_max_ms")


@dataclass(frozen=True)
class ClassifiedSegment:
    start: SpaceTimePoint
    end: SpaceTimePoint
    cls: SegmentClass


@dataclass
class Trip:
    user_id: str
    date: date_type
    origin_event: Event
    destination_event: Event
    within_events: list[Event]
    start_t: float
    end_t: float


def build_trajectory(day: UserDay, registry: Mapping[str, Tower]) -> list[SpaceTimePoint]:
    """Build the space-time trajectory of a user-day.

    Runs of events sharing a timestamp collapse to the last event of the
    run, so time is strictly increasing along the result. Distance is
    the cumulative great-circle distance between consecutive towers,
    zero at the first connection of the day.
    """
    if not day.events:
        return []
    kept: list[tuple[int, Event]] = []
    for i, ev in enumerate(day.events):
        if kept and kept[-1][1].timestamp == ev.timestamp:
            kept[-1] = (i, ev)
        else:
            kept.append((i, ev))

    points: list[SpaceTimePoint] = []
    cumulative = 0.0
    prev: Event | None = None
    for idx, ev in kept:
        if prev is not None:
            cumulative += haversine_m(registry[prev.tower_id].location,
                                      registry[ev.tower_id].location)
        points.append(SpaceTimePoint(t=float(ev.seconds_since_midnight()),
                                     d=cumulative, event_index=idx))
        prev = ev
    return points


def _vertical_deviation(p: SpaceTimePoint, a: SpaceTimePoint, b: SpaceTimePoint) -> float:
    # deviation of d(p) from linear interpolation between a and b at t(p)
    slope = (b.d - a.d) / (b.t - a.t)
    return abs(p.d - (a.d + slope * (p.t - a.t)))


def simplify(points: list[SpaceTimePoint], tol_m: float) -> list[SpaceTimePoint]:
    """Douglas-Peucker with a vertical (distance-axis) deviation metric.

    The (t, d) axes have incommensurable units, so deviation is measured
    in meters along the d axis against the chord's interpolation. The
    first and last points are always retained; the output is a
    subsequence of the input.
    """
    n = len(points)
    if n <= 2:
        return list(points)
    keep = [False] * n
    keep[0] = keep[n - 1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        a, b = points[lo], points[hi]
        best_dev = -1.0
        best_idx = -1
        for i in range(lo + 1, hi):
            dev = _vertical_deviation(points[i], a, b)
            if dev > best_dev:
                best_dev = dev
                best_idx = i
        if best_dev > tol_m:
            keep[best_idx] = True
            stack.append((lo, best_idx))
            stack.append((best_idx, hi))
    return [p for p, k in zip(points, keep) if k]


def classify_segments(simplified: list[SpaceTimePoint],
                      cfg: TripRuleConfig) -> list[ClassifiedSegment]:
    """Classify each simplified segment by its slope (approximate speed)."""
    segments: list[ClassifiedSegment] = []
    for a, b in zip(simplified, simplified[1:]):
        dd = b.d - a.d
        dt = b.t - a.t
        v = dd / dt
        if v < cfg.v_stationary_ms or dd < cfg.d_min_m:
            cls = SegmentClass.STATIONARY
        elif v > cfg.v_max_ms:
            cls = SegmentClass.INVALID
        else:
            cls = SegmentClass.MOVING
        segments.append(ClassifiedSegment(start=a, end=b, cls=cls))
    return segments


def extract_trips(day: UserDay, segments: list[ClassifiedSegment],
                  cfg: TripRuleConfig) -> tuple[list[Trip], dict[int, EventClass]]:
    """Turn maximal runs of moving segments into trips and class every event.

    The run's first original event is the trip start, its last the trip
    end, and strictly interior events are within-trip. Everything else,
    including events under invalid (implausibly fast) segments, stays
    stationary: noise must never fabricate trips.
    """
    classes = {i: EventClass.STATIONARY for i in range(len(day.events))}
    trips: list[Trip] = []

    run_start: SpaceTimePoint | None = None
    run_end: SpaceTimePoint | None = None

    def close_run() -> None:
        nonlocal run_start, run_end
        if run_start is None or run_end is None:
            return
        i0, i1 = run_start.event_index, run_end.event_index
        classes[i0] = EventClass.TRIP_START
        classes[i1] = EventClass.TRIP_END
        for j in range(i0 + 1, i1):
            classes[j] = EventClass.WITHIN_TRIP
        origin = day.events[i0]
        destination = day.events[i1]
        start_t = float(origin.seconds_since_midnight())
        end_t = float(destination.seconds_since_midnight())
        within = [e for e in day.events[i0 + 1:i1]
                  if start_t < e.seconds_since_midnight() < end_t]
        trips.append(Trip(user_id=day.user_id, date=day.date,
                          origin_event=origin, destination_event=destination,
                          within_events=within, start_t=start_t, end_t=end_t))
        run_start = run_end = None

    for seg in segments:
        if seg.cls is SegmentClass.MOVING:
            if run_start is None:
                run_start = seg.start
            run_end = seg.end
        else:
            close_run()
    close_run()
    return trips, classes


def detect_trips(day: UserDay, registry: Mapping[str, Tower],
                 cfg: TripRuleConfig) -> tuple[list[Trip], dict[int, EventClass]]:
    """Full per-day chain: trajectory, simplification, classification, trips."""
    trajectory = build_trajectory(day, registry)
    simplified = simplify(trajectory, cfg.simplify_tol_m)
    segments = classify_segments(simplified, cfg)
    return extract_trips(day, segments, cfg)


@dataclass(frozen=True)
class TripStats:
    n_trips: int
    n_users: int
    n_users_with_within_trip_events: int
    mean_trips_per_user: float
    std_trips_per_user: float
    min_trips_per_user: float
    p25_trips_per_user: float
    p50_trips_per_user: float
    p75_trips_per_user: float
    max_trips_per_user: float

    def to_dict(self) -> dict:
        return {
            "n_trips": self.n_trips,
            "n_users": self.n_users,
            "n_users_with_within_trip_events": self.n_users_with_within_trip_events,
            "mean_trips_per_user": self.mean_trips_per_user,
            "std_trips_per_user": self.std_trips_per_user,
            "min_trips_per_user": self.min_trips_per_user,
            "p25_trips_per_user": self.p25_trips_per_user,
            "p50_trips_per_user": self.p50_trips_per_user,
            "p75_trips_per_user": self.p75_trips_per_user,
            "max_trips_per_user": self.max_trips_per_user,
        }


def trip_stats(trips: Iterable[Trip]) -> TripStats:
    """Descriptive statistics of trips-per-user over a trip collection."""
    per_user: dict[str, int] = {}
    users_with_within: set[str] = set()
    n_trips = 0
    for trip in trips:
        n_trips += 1
        per_user[trip.user_id] = per_user.get(trip.user_id, 0) + 1
        if trip.within_events:
            users_with_within.add(trip.user_id)
    if not per_user:
        return TripStats(0, 0, 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    counts = np.array(sorted(per_user.values()), dtype=float)
    return TripStats(
        n_trips=n_trips,
        n_users=len(per_user),
        n_users_with_within_trip_events=len(users_with_within),
        mean_trips_per_user=float(counts.mean()),
        std_trips_per_user=float(counts.std()),
        min_trips_per_user=float(counts.min()),
        p25_trips_per_user=float(np.percentile(counts, 25)),
        p50_trips_per_user=float(np.percentile(counts, 50)),
        p75_trips_per_user=float(np.percentile(counts, 75)),
        max_trips_per_user=float(counts.max()),
    )


TRIPS_CSV_HEADER = ["user_id", "date", "start_t", "end_t",
                    "origin_tower", "destination_tower", "n_within"]

EVENT_CLASSES_CSV_HEADER = ["user_id", "date", "event_index", "class"]


def write_trips_csv(trips: Iterable[Trip], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIPS_CSV_HEADER)
        for t in trips:
            writer.writerow([
                t.user_id, t.date.isoformat(), repr(t.start_t), repr(t.end_t),
                t.origin_event.tower_id, t.destination_event.tower_id,
                len(t.within_events),
            ])


def write_event_classes_csv(items: Iterable[tuple[UserDay, Mapping[int, EventClass]]],
                            path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_CLASSES_CSV_HEADER)
        for day, classes in items:
            for i in range(len(day.events)):
                writer.writerow([day.user_id, day.date.isoformat(), i,
                                 classes[i].value])
