import math
from datetime import datetime

import pytest

from mobilicity.geo import GeoPoint, Tower
from mobilicity.ingest import Event

M_PER_DEG_LAT = 6_371_000.0 * math.pi / 180.0

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def offset_point(base: GeoPoint, north_m: float, east_m: float) -> GeoPoint:
    """A point displaced from `base` by planar meter offsets (test-local oracle)."""
    lat = base.lat + north_m / M_PER_DEG_LAT
    lon = base.lon + east_m / (M_PER_DEG_LAT * math.cos(math.radians(base.lat)))
    return GeoPoint(lat, lon)


def make_tower(tid: str, location: GeoPoint, indoor: bool = False,
               underground: bool = False) -> Tower:
    return Tower(id=tid, name=f"site {tid}", location=location,
                 indoor=indoor, underground_metro=underground)


def make_event(user: str, ts: str, tower: str) -> Event:
    return Event(user_id=user, timestamp=datetime.fromisoformat(ts), tower_id=tower)


@pytest.fixture
def santiago() -> GeoPoint:
    return GeoPoint(-33.45, -70.66)
