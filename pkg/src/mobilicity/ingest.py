"""Parse and filter raw event logs into clean per-user, per-day event streams."""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, TextIO

from .errors import FormatError
from .geo import Tower

EVENT_CSV_HEADER = ["user_id", "timestamp", "tower_id"]

DEFAULT_WINDOW_START_S = 6 * 3600
DEFAULT_WINDOW_END_S = 24 * 3600


@dataclass(frozen=True)
class Event:
    """One billing record: a device touching a tower at a point in time."""

    user_id: str
    timestamp: datetime  # timezone-naive local time, seconds resolution
    tower_id: str

    def seconds_since_midnight(self) -> int:
        t = self.timestamp
        return t.hour * 3600 + t.minute * 60 + t.second


@dataclass
class UserDay:
    user_id: str
    date: date
    events: list[Event]  # ascending by timestamp


@dataclass
class ParseResult:
    events: list[Event]
    rows_read: int
    rows_malformed: int


@dataclass
class FilterResult:
    user_days: list[UserDay]
    dropped_indoor: int
    dropped_window: int
    dropped_unknown_tower: int


@dataclass
class IngestReport:
    rows_read: int
    rows_malformed: int
    events_dropped_indoor: int
    events_dropped_window: int
    events_dropped_unknown_tower: int

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_malformed": self.rows_malformed,
            "events_dropped_indoor": self.events_dropped_indoor,
            "events_dropped_window": self.events_dropped_window,
            "events_dropped_unknown_tower": self.events_dropped_unknown_tower,
        }


def open_event_stream(path: str | Path) -> TextIO:
    """Open an event CSV, transparently decompressing ``.gz`` files."""
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def _parse_timestamp(raw: str) -> datetime | None:
    try:
        ts = datetime.fromisoformat(raw.strip())
    except ValueError:
        return None
    if ts.tzinfo is not None:
        # local-naive semantics only; offset-carrying rows are malformed
        return None
    return ts.replace(microsecond=0)


def parse_events(stream: TextIO | Iterable[str]) -> ParseResult:
    """Parse an event CSV stream.

    Well-formed rows come back in input order. Malformed rows (wrong
    arity, blank ids, unparseable timestamps) are counted, never
    silently dropped. A missing or wrong header is fatal.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != EVENT_CSV_HEADER:
        raise FormatError(f"bad event CSV header: {header}")

    events: list[Event] = []
    rows_read = 0
    rows_malformed = 0
    for row in reader:
        if not row:
            continue
        rows_read += 1
        if len(row) != 3:
            rows_malformed += 1
            continue
        user_id = row[0].strip()
        tower_id = row[2].strip()
        ts = _parse_timestamp(row[1])
        if not user_id or not tower_id or ts is None:
            rows_malformed += 1
            continue
        events.append(Event(user_id=user_id, timestamp=ts, tower_id=tower_id))
    return ParseResult(events=events, rows_read=rows_read, rows_malformed=rows_malformed)


def filter_events(events: Iterable[Event], registry: dict[str, Tower],
                  window_start_s: int = DEFAULT_WINDOW_START_S,
                  window_end_s: int = DEFAULT_WINDOW_END_S) -> FilterResult:
    """Filter events and group them into per-user, per-day streams.

    Drops events at unknown towers, outside the daily window
    [window_start_s, window_end_s), and at indoor towers unless the
    tower is an underground metro station. Exact duplicate
    (user, timestamp, tower) triples collapse to one occurrence.
    """
    dropped_indoor = 0
    dropped_window = 0
    dropped_unknown = 0
    kept: dict[tuple[str, date], list[Event]] = {}
    seen: set[tuple[str, datetime, str]] = set()

    for ev in events:
        tower = registry.get(ev.tower_id)
        if tower is None:
            dropped_unknown += 1
            continue
        s = ev.seconds_since_midnight()
        if not window_start_s <= s < window_end_s:
            dropped_window += 1
            continue
        if tower.indoor and not tower.underground_metro:
            dropped_indoor += 1
            continue
        key = (ev.user_id, ev.timestamp, ev.tower_id)
        if key in seen:
            continue
        seen.add(key)
        kept.setdefault((ev.user_id, ev.timestamp.date()), []).append(ev)

    user_days = []
    for (user_id, day), evs in sorted(kept.items()):
        evs.sort(key=lambda e: e.timestamp)  # stable: ties keep input order
        user_days.append(UserDay(user_id=user_id, date=day, events=evs))
    return FilterResult(
        user_days=user_days,
        dropped_indoor=dropped_indoor,
        dropped_window=dropped_window,
        dropped_unknown_tower=dropped_unknown,
    )


def make_report(parsed: ParseResult, filtered: FilterResult) -> IngestReport:
    return IngestReport(
        rows_read=parsed.rows_read,
        rows_malformed=parsed.rows_malformed,
        events_dropped_indoor=filtered.dropped_indoor,
        events_dropped_window=filtered.dropped_window,
        events_dropped_unknown_tower=filtered.dropped_unknown_tower,
    )
