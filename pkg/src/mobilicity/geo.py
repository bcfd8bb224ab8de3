"""Geodesic primitives and infrastructure-proximity labeling of cell towers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import FormatError

EARTH_RADIUS_M = 6_371_000.0

INFRA_KINDS = ("highway", "metro_surface")


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of bounds: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of bounds: {self.lon}")


@dataclass(frozen=True)
class Tower:
    id: str
    name: str
    location: GeoPoint
    indoor: bool = False
    underground_metro: bool = False


@dataclass(frozen=True)
class InfraPolyline:
    """An infrastructure line (highway or surface metro) as an ordered vertex list."""

    kind: str
    vertices: tuple[GeoPoint, ...]

    def __post_init__(self) -> None:
        if self.kind not in INFRA_KINDS:
            raise ValueError(f"unknown infrastructure kind: {self.kind!r}")
        if len(self.vertices) < 2:
            raise ValueError("polyline needs at least 2 vertices")
        for a, b in zip(self.vertices, self.vertices[1:]):
            if a == b:
                raise ValueError("consecutive polyline vertices must be distinct")


class TowerLabel(Enum):
    HIGHWAY = "highway"
    METRO_SURFACE = "metro_surface"
    METRO_UNDERGROUND = "metro_underground"
    NONE = "none"


# Display precedence when a tower carries several labels.
_LABEL_PRECEDENCE = (
    TowerLabel.METRO_UNDERGROUND,
    TowerLabel.METRO_SURFACE,
    TowerLabel.HIGHWAY,
    TowerLabel.NONE,
)


def display_label(labels: set[TowerLabel]) -> TowerLabel:
    """Reduce a label set to one display label by fixed precedence."""
    for label in _LABEL_PRECEDENCE:
        if label in labels:
            return label
    return TowerLabel.NONE


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _project_local(p: GeoPoint, origin: GeoPoint) -> tuple[float, float]:
    # Equirectangular projection about `origin`; sub-meter accurate at city scale.
    x = EARTH_RADIUS_M * math.radians(p.lon - origin.lon) * math.cos(math.radians(origin.lat))
    y = EARTH_RADIUS_M * math.radians(p.lat - origin.lat)
    return x, y


def _point_segment_dist(px: float, py: float, ax: float, ay: float,
                        bx: float, by: float) -> float:
    dx = bx - ax
    dy = by - ay
    norm2 = dx * dx + dy * dy
    if norm2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / norm2
    t = max(0.0, min(1.0, t))
    return math.hypot(ax + t * dx - px, ay + t * dy - py)


def point_to_polyline_m(p: GeoPoint, line: InfraPolyline) -> float:
    """Minimum distance from a point to a polyline, in meters.

    Computed in a local planar frame centered on the point, which is
    adequate at metropolitan extents (tens of kilometers).
    """
    if len(line.vertices) < 2:
        raise ValueError("polyline needs at least 2 vertices")
    pts = [_project_local(v, p) for v in line.vertices]
    best = math.inf
    for (ax, ay), (bx, by) in zip(pts, pts[1:]):
        best = min(best, _point_segment_dist(0.0, 0.0, ax, ay, bx, by))
    return best


def label_towers(towers: list[Tower], lines: list[InfraPolyline],
                 radius_m: float = 250.0,
                 metro_radius_m: float | None = None) -> dict[str, set[TowerLabel]]:
    """Label towers by infrastructure proximity.

    A tower is labeled HIGHWAY (resp. METRO_SURFACE) when its minimum
    distance to any polyline of that kind is at most ``radius_m``
    (resp. ``metro_radius_m``, defaulting to the same radius).
    Registry-flagged underground-metro towers are labeled
    METRO_UNDERGROUND regardless of distance. Towers matching nothing
    get the NONE label.
    """
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    if metro_radius_m is None:
        metro_radius_m = radius_m
    elif metro_radius_m <= 0:
        raise ValueError("metro_radius_m must be positive")

    highways = [l for l in lines if l.kind == "highway"]
    metros = [l for l in lines if l.kind == "metro_surface"]

    out: dict[str, set[TowerLabel]] = {}
    for tower in towers:
        labels: set[TowerLabel] = set()
        if tower.underground_metro:
            labels.add(TowerLabel.METRO_UNDERGROUND)
        if highways and min(point_to_polyline_m(tower.location, l) for l in highways) <= radius_m:
            labels.add(TowerLabel.HIGHWAY)
        if metros and min(point_to_polyline_m(tower.location, l) for l in metros) <= metro_radius_m:
            labels.add(TowerLabel.METRO_SURFACE)
        if not labels:
            labels.add(TowerLabel.NONE)
        out[tower.id] = labels
    return out


# ---------------------------------------------------------------------------
# External formats: tower registry CSV and infrastructure GeoJSON.

TOWER_CSV_HEADER = ["tower_id", "name", "lat", "lon", "indoor", "underground_metro"]

_TRUE_STRINGS = {"1", "true", "t", "yes", "y"}


def _parse_bool(s: str) -> bool:
    return s.strip().lower() in _TRUE_STRINGS


def load_tower_csv(path: str | Path) -> dict[str, Tower]:
    """Load the tower registry keyed by tower id."""
    registry: dict[str, Tower] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TOWER_CSV_HEADER:
            raise FormatError(f"bad tower registry header in {path}: {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(TOWER_CSV_HEADER):
                raise FormatError(f"bad tower registry row in {path}: {row}")
            tower_id, name, lat, lon, indoor, underground = row
            if tower_id in registry:
                raise FormatError(f"duplicate tower id {tower_id!r} in {path}")
            registry[tower_id] = Tower(
                id=tower_id,
                name=name,
                location=GeoPoint(float(lat), float(lon)),
                indoor=_parse_bool(indoor),
                underground_metro=_parse_bool(underground),
            )
    return registry


def write_tower_csv(towers: list[Tower], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TOWER_CSV_HEADER)
        for t in towers:
            writer.writerow([
                t.id, t.name, repr(t.location.lat), repr(t.location.lon),
                "1" if t.indoor else "0",
                "1" if t.underground_metro else "0",
            ])


def load_infrastructure_geojson(path: str | Path) -> list[InfraPolyline]:
    """Load infrastructure polylines from a GeoJSON FeatureCollection."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise FormatError(f"{path}: expected a GeoJSON FeatureCollection")
    lines: list[InfraPolyline] = []
    for feature in doc.get("features", []):
        geometry = feature.get("geometry") or {}
        if geometry.get("type") != "LineString":
            raise FormatError(f"{path}: only LineString features are supported")
        kind = (feature.get("properties") or {}).get("kind")
        if kind not in INFRA_KINDS:
            raise FormatError(f"{path}: feature property 'kind' must be one of {INFRA_KINDS}")
        vertices = tuple(GeoPoint(lat, lon) for lon, lat in geometry["coordinates"])
        lines.append(InfraPolyline(kind=kind, vertices=vertices))
    return lines


def write_infrastructure_geojson(lines: list[InfraPolyline], path: str | Path) -> None:
    features = [
        {
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[v.lon, v.lat] for v in line.vertices],
            },
            "properties": {"kind": line.kind},
        }
        for line in lines
    ]
    doc = {"type": "FeatureCollection", "features": features}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
