"""Synthetic cities, commuter populations, and event logs with planted truth.

Every pipeline stage can be verified desk-scale against the ground truth
these generators record: planted per-tower component memberships, true
per-event classes, and true daily trips. All randomness hangs off one
seed.
"""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass, field
from datetime import date as date_type, datetime, timedelta
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .geo import EARTH_RADIUS_M, GeoPoint, InfraPolyline, Tower
from .ingest import EVENT_CSV_HEADER, Event
from .waypoints import WaypointsMatrix

M_PER_DEG_LAT = EARTH_RADIUS_M * math.pi / 180.0


@dataclass(frozen=True)
class CorridorSpec:
    kind: str  # "highway" | "metro_surface"
    vertices: tuple[GeoPoint, ...]
    tower_weight: float = 1.0


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 100
    n_towers: int = 50
    k_true: int = 4
    corridors: tuple[CorridorSpec, ...] | None = None
    commuter_fraction: float = 0.9
    billing_interval_s: tuple[float, float] = (900.0, 1800.0)
    noise_event_rate: float = 0.0  # expected noise events per user-day (Poisson)
    n_days: int = 14
    seed: int = 0
    corridor_tower_fraction: float = 0.8
    underground_per_metro_corridor: int = 2
    indoor_background_fraction: float = 0.05
    speed_kmh_range: tuple[float, float] = (15.0, 60.0)
    am_peak_hour: int = 8
    pm_peak_hour: int = 18
    window_start_s: int = 6 * 3600
    window_end_s: int = 24 * 3600
    start_date: date_type = date_type(2024, 3, 4)  # a Monday
    center: GeoPoint = GeoPoint(-33.45, -70.66)
    corridor_length_m: float = 20_000.0
    corridor_spacing_m: float = 3_000.0
    lateral_jitter_m: float = 100.0

    def __post_init__(self) -> None:
        if min(self.n_users, self.n_towers, self.k_true, self.n_days) < 1:
            raise ConfigError("n_users, n_towers, k_true, n_days must be positive")
        if self.k_true > self.n_towers:
            raise ConfigError("k_true cannot exceed n_towers")
        lo, hi = self.billing_interval_s
        if not 1.0 <= lo <= hi <= 24 * 3600:
            raise ConfigError(f"implausible billing interval range ({lo}, {hi})")
        if not 0.0 <= self.commuter_fraction <= 1.0:
            raise ConfigError("commuter_fraction must be in [0, 1]")
        if not 0.0 <= self.corridor_tower_fraction <= 1.0:
            raise ConfigError("corridor_tower_fraction must be in [0, 1]")
        if self.noise_event_rate < 0:
            raise ConfigError("noise_event_rate must be non-negative")
        vlo, vhi = self.speed_kmh_range
        if not 0 < vlo <= vhi:
            raise ConfigError("speed range must be positive and ordered")
        if self.corridors is not None and len(self.corridors) != self.k_true:
            raise ConfigError("need exactly one corridor per planted component")
        if not self.window_start_s < self.window_end_s <= 24 * 3600:
            raise ConfigError("bad daily window")


@dataclass
class GroundTruth:
    """Planted truth aligned event-for-event with the emitted log."""

    user_mixtures: dict[str, dict[int, float]]
    event_classes: dict[str, list[str]]  # "user|date" -> class per event, in order
    true_trips: dict[str, list[tuple[float, float]]]  # "user|date" -> (dep_s, arr_s)
    tower_components: dict[str, int]
    emission_counts: dict[str, int] = field(default_factory=dict)  # date iso -> events

    @staticmethod
    def key(user_id: str, day: date_type) -> str:
        return f"{user_id}|{day.isoformat()}"

    def to_dict(self) -> dict:
        return {
            "user_mixtures": {u: {str(c): w for c, w in mix.items()}
                              for u, mix in self.user_mixtures.items()},
            "event_classes": self.event_classes,
            "true_trips": {k: [[dep, arr] for dep, arr in v]
                           for k, v in self.true_trips.items()},
            "tower_components": self.tower_components,
            "emission_counts": self.emission_counts,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        return cls(
            user_mixtures={u: {int(c): float(w) for c, w in mix.items()}
                           for u, mix in doc["user_mixtures"].items()},
            event_classes={k: list(v) for k, v in doc["event_classes"].items()},
            true_trips={k: [(float(a), float(b)) for a, b in v]
                        for k, v in doc["true_trips"].items()},
            tower_components={t: int(c) for t, c in doc["tower_components"].items()},
            emission_counts={d: int(n) for d, n in doc.get("emission_counts", {}).items()},
        )


def write_ground_truth(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(gt.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_ground_truth(path: str | Path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        return GroundTruth.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Planar frame helpers. At <=50 km extents an equirectangular projection
# about the city center is accurate to well under tower-position noise.

def _project(p: GeoPoint, origin: GeoPoint) -> tuple[float, float]:
    x = M_PER_DEG_LAT * (p.lon - origin.lon) * math.cos(math.radians(origin.lat))
    y = M_PER_DEG_LAT * (p.lat - origin.lat)
    return x, y


def _unproject(x: float, y: float, origin: GeoPoint) -> GeoPoint:
    lat = origin.lat + y / M_PER_DEG_LAT
    lon = origin.lon + x / (M_PER_DEG_LAT * math.cos(math.radians(origin.lat)))
    return GeoPoint(lat, lon)


class _ArcPath:
    """Arclength-parameterized planar polyline."""

    def __init__(self, points_xy: Sequence[tuple[float, float]]):
        self.pts = np.asarray(points_xy, dtype=float)
        seg = np.diff(self.pts, axis=0)
        self.seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.cum = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.length = float(self.cum[-1])

    def _locate(self, s: float) -> tuple[int, float]:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.seg_len) - 1)
        f = (s - self.cum[i]) / self.seg_len[i] if self.seg_len[i] else 0.0
        return i, f

    def point_at(self, s: float) -> tuple[float, float]:
        i, f = self._locate(s)
        p = self.pts[i] + f * (self.pts[i + 1] - self.pts[i])
        return float(p[0]), float(p[1])

    def normal_at(self, s: float) -> tuple[float, float]:
        i, _ = self._locate(s)
        dx, dy = self.pts[i + 1] - self.pts[i]
        norm = math.hypot(dx, dy)
        return -dy / norm, dx / norm


def default_corridors(cfg: SynthConfig) -> tuple[CorridorSpec, ...]:
    """Parallel east-west corridors, alternating highway and surface metro.

    Parallel skeletons keep the 250 m label buffers of different
    corridors disjoint, so planted component/label associations stay
    unambiguous.
    """
    k = cfg.k_true
    half = cfg.corridor_length_m / 2.0
    specs = []
    for i in range(k):
        y = (i - (k - 1) / 2.0) * cfg.corridor_spacing_m
        a = _unproject(-half, y, cfg.center)
        b = _unproject(half, y, cfg.center)
        kind = "highway" if i % 2 == 0 else "metro_surface"
        specs.append(CorridorSpec(kind=kind, vertices=(a, b)))
    return tuple(specs)


@dataclass
class SynthCity:
    towers: list[Tower]
    lines: list[InfraPolyline]
    tower_components: dict[str, int]  # corridor towers only
    corridors: tuple[CorridorSpec, ...]
    center: GeoPoint


def synth_city(cfg: SynthConfig) -> SynthCity:
    """Place towers along planted corridors plus a uniform background."""
    rng = np.random.default_rng([cfg.seed, 0])
    corridors = cfg.corridors if cfg.corridors is not None else default_corridors(cfg)

    n_corridor = round(cfg.n_towers * cfg.corridor_tower_fraction)
    if cfg.corridor_tower_fraction > 0 and n_corridor < len(corridors):
        raise ConfigError(
            f"placement density infeasible: {n_corridor} corridor towers "
            f"for {len(corridors)} corridors")

    weights = np.array([c.tower_weight for c in corridors], dtype=float)
    if (weights <= 0).any():
        raise ConfigError("corridor tower_weight must be positive")
    shares = weights / weights.sum()
    per_corridor = np.floor(shares * n_corridor).astype(int)
    per_corridor = np.maximum(per_corridor, 1)
    while per_corridor.sum() > n_corridor:
        per_corridor[int(np.argmax(per_corridor))] -= 1
    while per_corridor.sum() < n_corridor:
        per_corridor[int(np.argmin(per_corridor))] += 1

    towers: list[Tower] = []
    tower_components: dict[str, int] = {}
    paths: list[_ArcPath] = []
    for c, spec in enumerate(corridors):
        path = _ArcPath([_project(v, cfg.center) for v in spec.vertices])
        paths.append(path)
        m = int(per_corridor[c])
        spacing = path.length / m
        for j in range(m):
            s = (j + 0.5) * spacing + rng.uniform(-0.2, 0.2) * spacing
            x, y = path.point_at(s)
            nx, ny = path.normal_at(s)
            off = rng.uniform(-cfg.lateral_jitter_m, cfg.lateral_jitter_m)
            tid = f"T{len(towers):04d}"
            underground = (spec.kind == "metro_surface"
                           and (j < cfg.underground_per_metro_corridor // 2 + cfg.underground_per_metro_corridor % 2
                                or j >= m - cfg.underground_per_metro_corridor // 2))
            towers.append(Tower(
                id=tid,
                name=f"corridor {c} site {j}",
                location=_unproject(x + off * nx, y + off * ny, cfg.center),
                indoor=underground,
                underground_metro=underground,
            ))
            tower_components[tid] = c

    # uniform background over the corridor bounding box plus margin
    n_background = cfg.n_towers - len(towers)
    all_xy = np.concatenate([p.pts for p in paths]) if paths else np.zeros((1, 2))
    margin = 2_000.0
    x_lo, y_lo = all_xy.min(axis=0) - margin
    x_hi, y_hi = all_xy.max(axis=0) + margin
    n_indoor = round(n_background * cfg.indoor_background_fraction)
    for b in range(n_background):
        x = rng.uniform(x_lo, x_hi)
        y = rng.uniform(y_lo, y_hi)
        tid = f"T{len(towers):04d}"
        towers.append(Tower(
            id=tid,
            name=f"background site {b}",
            location=_unproject(x, y, cfg.center),
            indoor=b < n_indoor,
            underground_metro=False,
        ))

    lines = [InfraPolyline(kind=spec.kind, vertices=spec.vertices)
             for spec in corridors]
    return SynthCity(towers=towers, lines=lines, tower_components=tower_components,
                     corridors=corridors, center=cfg.center)


def _clipped_normal(rng: np.random.Generator, center_h: float, sd_h: float,
                    half_width_h: float) -> float:
    t = rng.normal(0.0, sd_h)
    t = min(max(t, -half_width_h), half_width_h)
    return (center_h + t) * 3600.0


def _true_classes(times: Sequence[int],
                  trip_intervals: Sequence[tuple[float, float]]) -> list[str]:
    classes = ["stationary"] * len(times)
    for dep, arr in trip_intervals:
        origin = None
        destination = None
        for i, t in enumerate(times):
            if t <= dep:
                origin = i
            if dep < t < arr:
                classes[i] = "within_trip"
            if destination is None and t >= arr:
                destination = i
        if origin is not None:
            classes[origin] = "trip_start"
        if destination is not None:
            classes[destination] = "trip_end"
    return classes


def synth_events(cfg: SynthConfig, city: SynthCity) -> tuple[list[Event], GroundTruth]:
    """Emit a billing-cycle event log for a planted commuter population.

    Commuters live and work on their component's corridor and traverse it
    twice a day at a plausible speed; devices report at billing-interval
    cadence and snap to the nearest retained tower. Noise events land at
    uniformly random towers during stationary periods.
    """
    rng = np.random.default_rng([cfg.seed, 1])
    b_lo, b_hi = cfg.billing_interval_s
    w_start, w_end = float(cfg.window_start_s), float(cfg.window_end_s)

    # devices only ever connect to retained towers, so emitted logs pass
    # ingestion without indoor or unknown-tower drops
    snap_pool = [t for t in city.towers if not t.indoor or t.underground_metro]
    pool_xy = np.array([_project(t.location, city.center) for t in snap_pool])
    pool_ids = [t.id for t in snap_pool]

    paths = [_ArcPath([_project(v, city.center) for v in spec.vertices])
             for spec in city.corridors]
    bbox_lo = pool_xy.min(axis=0)
    bbox_hi = pool_xy.max(axis=0)

    n_commuters = round(cfg.n_users * cfg.commuter_fraction)
    events: list[Event] = []
    gt = GroundTruth(user_mixtures={}, event_classes={}, true_trips={},
                     tower_components=dict(city.tower_components))

    for u in range(cfg.n_users):
        user_id = f"u{u:05d}"
        is_commuter = u < n_commuters
        if is_commuter:
            # home and work zones hug the corridor ends so commuter traffic
            # covers (and therefore weights) the whole planted corridor
            comp = u % cfg.k_true
            path = paths[comp]
            home_f = rng.uniform(0.02, 0.2)
            work_f = rng.uniform(0.8, 0.98)
            speed_ms = rng.uniform(*cfg.speed_kmh_range) / 3.6
            gt.user_mixtures[user_id] = {comp: 1.0}
        else:
            comp = None
            home_xy = (rng.uniform(bbox_lo[0], bbox_hi[0]),
                       rng.uniform(bbox_lo[1], bbox_hi[1]))
            gt.user_mixtures[user_id] = {}

        for d in range(cfg.n_days):
            day = cfg.start_date + timedelta(days=d)
            trip_intervals: list[tuple[float, float]] = []
            if is_commuter:
                # clamps guarantee each trip end is observable: at least one
                # event before departure, between trips, and after return
                duration = abs(work_f - home_f) * path.length / speed_ms
                dep1 = _clipped_normal(rng, cfg.am_peak_hour + 0.5, 0.5, 1.5)
                dep1 = max(dep1, w_start + b_hi + 1.0)
                dep2 = _clipped_normal(rng, cfg.pm_peak_hour + 0.5, 0.5, 1.5)
                dep2 = max(dep2, dep1 + duration + 2.0 * b_hi)
                dep2 = min(dep2, w_end - duration - b_hi - 1.0)
                if dep2 <= dep1 + duration:
                    raise ConfigError(
                        "daily window too short for a round trip at this "
                        "billing interval and corridor length")
                trip_intervals = [(dep1, dep1 + duration), (dep2, dep2 + duration)]

            def position_at(t: float) -> tuple[float, float]:
                if not is_commuter:
                    return home_xy
                (d1, a1), (d2, a2) = trip_intervals
                if t < d1:
                    f = home_f
                elif t <= a1:
                    f = home_f + (work_f - home_f) * (t - d1) / (a1 - d1)
                elif t < d2:
                    f = work_f
                elif t <= a2:
                    f = work_f + (home_f - work_f) * (t - d2) / (a2 - d2)
                else:
                    f = home_f
                return path.point_at(f * path.length)

            times: list[float] = []
            t = w_start + rng.uniform(0.0, b_hi)
            while t < w_end:
                times.append(t)
                t += rng.uniform(b_lo, b_hi)

            day_events: list[tuple[float, str]] = []
            if times:
                pos = np.array([position_at(t) for t in times])
                d2m = ((pos[:, 0, None] - pool_xy[None, :, 0]) ** 2
                       + (pos[:, 1, None] - pool_xy[None, :, 1]) ** 2)
                nearest = np.argmin(d2m, axis=1)
                day_events = [(t, pool_ids[j]) for t, j in zip(times, nearest)]

            if cfg.noise_event_rate > 0:
                stationary: list[tuple[float, float]] = []
                cursor = w_start
                for dep, arr in trip_intervals:
                    if dep > cursor:
                        stationary.append((cursor, dep))
                    cursor = arr
                if w_end > cursor:
                    stationary.append((cursor, w_end))
                total = sum(b - a for a, b in stationary)
                for _ in range(rng.poisson(cfg.noise_event_rate)):
                    u_t = rng.uniform(0.0, total)
                    for a, b in stationary:
                        if u_t <= b - a:
                            noise_t = a + u_t
                            break
                        u_t -= b - a
                    else:
                        continue
                    tower_id = pool_ids[int(rng.integers(len(pool_ids)))]
                    day_events.append((noise_t, tower_id))

            day_events.sort(key=lambda it: it[0])
            final: list[tuple[int, str]] = []
            prev_t = -1
            for ft, tid in day_events:
                it = int(ft)
                if it <= prev_t:
                    it = prev_t + 1
                if it >= int(w_end):
                    continue
                final.append((it, tid))
                prev_t = it

            key = GroundTruth.key(user_id, day)
            gt.true_trips[key] = trip_intervals
            gt.event_classes[key] = _true_classes([t for t, _ in final],
                                                  trip_intervals)
            iso = day.isoformat()
            gt.emission_counts[iso] = gt.emission_counts.get(iso, 0) + len(final)
            midnight = datetime.combine(day, datetime.min.time())
            for it, tid in final:
                events.append(Event(user_id=user_id,
                                    timestamp=midnight + timedelta(seconds=it),
                                    tower_id=tid))
    return events, gt


def write_events_csv(events: Sequence[Event], path: str | Path) -> None:
    """Write the event log in the ingestion CSV format (gzip by suffix)."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8", newline="") as fh:  # type: ignore[operator]
        fh.write(",".join(EVENT_CSV_HEADER) + "\n")
        for ev in events:
            fh.write(f"{ev.user_id},{ev.timestamp.isoformat()},{ev.tower_id}\n")


def synth_waypoints(n_users: int, n_towers: int, k_true: int, noise: float,
                    seed: int, secondary_prob: float = 0.2,
                    within_block_alpha: float = 5.0) -> tuple[WaypointsMatrix, GroundTruth]:
    """Directly plant a block-structured row-stochastic Waypoints Matrix.

    Towers split into k_true contiguous blocks. Each user draws a
    dominant block and, with probability ``secondary_prob``, a secondary
    one; row mass 1-noise lands on the drawn blocks (Dirichlet-jittered
    within), and the noise mass spreads uniformly over all towers.
    """
    if k_true > n_towers:
        raise ValueError("k_true cannot exceed n_towers")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must be in [0, 1)")
    rng = np.random.default_rng(seed)
    block_of_tower = np.array([j * k_true // n_towers for j in range(n_towers)])
    blocks = [np.flatnonzero(block_of_tower == b) for b in range(k_true)]

    col_index = [f"T{j:04d}" for j in range(n_towers)]
    row_index = [f"u{i:05d}" for i in range(n_users)]
    rows = np.zeros((n_users, n_towers))
    mixtures: dict[str, dict[int, float]] = {}
    for i in range(n_users):
        dom = int(rng.integers(k_true))
        parts: list[tuple[int, float]]
        if k_true > 1 and rng.random() < secondary_prob:
            sec = int((dom + 1 + rng.integers(k_true - 1)) % k_true)
            parts = [(dom, 0.7), (sec, 0.3)]
        else:
            parts = [(dom, 1.0)]
        row = np.zeros(n_towers)
        for b, mass in parts:
            row[blocks[b]] += mass * rng.dirichlet(
                np.full(len(blocks[b]), within_block_alpha))
        row *= 1.0 - noise
        if noise > 0:
            row += noise / n_towers
        rows[i] = row
        mixtures[row_index[i]] = {b: m for b, m in parts}

    matrix = sp.csr_matrix(rows)
    matrix.eliminate_zeros()
    W = WaypointsMatrix(row_index=row_index, col_index=col_index, matrix=matrix)
    gt = GroundTruth(
        user_mixtures=mixtures,
        event_classes={},
        true_trips={},
        tower_components={col_index[j]: int(block_of_tower[j])
                          for j in range(n_towers)},
    )
    return W, gt


def tower_indicator_matrix(tower_components: Mapping[str, int],
                           col_index: Sequence[str], k: int) -> np.ndarray:
    """k x |t| 0/1 matrix of planted component memberships over matrix columns."""
    out = np.zeros((k, len(col_index)))
    for j, tid in enumerate(col_index):
        c = tower_components.get(tid)
        if c is not None and 0 <= c < k:
            out[c, j] = 1.0
    return out
