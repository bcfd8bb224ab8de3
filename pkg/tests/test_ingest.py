import gzip
import io

import pytest

from mobilicity.errors import FormatError
from mobilicity.geo import GeoPoint
from mobilicity.ingest import (filter_events, make_report, open_event_stream,
                               parse_events)

from conftest import make_event, make_tower

HEADER = "user_id,timestamp,tower_id\n"


def _registry():
    base = GeoPoint(-33.45, -70.66)
    return {
        "out1": make_tower("out1", base),
        "out2": make_tower("out2", GeoPoint(-33.46, -70.67)),
        "mall": make_tower("mall", GeoPoint(-33.44, -70.65), indoor=True),
        "metro": make_tower("metro", GeoPoint(-33.47, -70.64), indoor=True,
                            underground=True),
    }


class TestParse:
    def test_empty_body(self):
        result = parse_events(io.StringIO(HEADER))
        assert result.events == []
        assert result.rows_read == 0 and result.rows_malformed == 0

    def test_valid_rows_in_order(self):
        body = HEADER + ("u1,2024-03-04T08:00:00,out1\n"
                         "u2,2024-03-04T07:00:00,out2\n"
                         "u1,2024-03-04T09:30:00,out2\n")
        result = parse_events(io.StringIO(body))
        assert [e.user_id for e in result.events] == ["u1", "u2", "u1"]
        assert result.rows_read == 3 and result.rows_malformed == 0

    def test_malformed_timestamp_counted(self):
        body = HEADER + ("u1,2024-03-04T08:00:00,out1\n"
                         "u1,not-a-time,out1\n"
                         "u1,2024-03-04T09:00:00,out1\n")
        result = parse_events(io.StringIO(body))
        assert len(result.events) == 2
        assert result.rows_malformed == 1 and result.rows_read == 3

    def test_wrong_arity_and_blank_ids(self):
        body = HEADER + ("u1,2024-03-04T08:00:00\n"
                         ",2024-03-04T08:00:00,out1\n"
                         "u1,2024-03-04T08:00:00,out1,extra\n")
        result = parse_events(io.StringIO(body))
        assert result.events == [] and result.rows_malformed == 3

    def test_offset_timestamp_is_malformed(self):
        body = HEADER + "u1,2024-03-04T08:00:00+03:00,out1\n"
        result = parse_events(io.StringIO(body))
        assert result.events == [] and result.rows_malformed == 1

    def test_missing_header_fatal(self):
        with pytest.raises(FormatError):
            parse_events(io.StringIO("u1,2024-03-04T08:00:00,out1\n"))
        with pytest.raises(FormatError):
            parse_events(io.StringIO(""))

    def test_microseconds_truncated(self):
        body = HEADER + "u1,2024-03-04T08:00:00.750,out1\n"
        result = parse_events(io.StringIO(body))
        assert result.events[0].timestamp.microsecond == 0


class TestFilter:
    def test_window_boundaries(self):
        events = [
            make_event("u1", "2024-03-04T05:59:59", "out1"),
            make_event("u1", "2024-03-04T06:00:00", "out1"),
            make_event("u1", "2024-03-04T23:59:59", "out1"),
        ]
        result = filter_events(events, _registry())
        kept = [e.timestamp.hour for day in result.user_days for e in day.events]
        assert kept == [6, 23]
        assert result.dropped_window == 1

    def test_indoor_dropped_underground_kept(self):
        events = [
            make_event("u1", "2024-03-04T08:00:00", "mall"),
            make_event("u1", "2024-03-04T09:00:00", "metro"),
        ]
        result = filter_events(events, _registry())
        assert result.dropped_indoor == 1
        assert [e.tower_id for e in result.user_days[0].events] == ["metro"]

    def test_duplicate_triple_collapses(self):
        ev = make_event("u1", "2024-03-04T08:00:00", "out1")
        result = filter_events([ev, ev, ev], _registry())
        assert len(result.user_days[0].events) == 1

    def test_same_time_different_tower_both_kept(self):
        events = [
            make_event("u1", "2024-03-04T08:00:00", "out1"),
            make_event("u1", "2024-03-04T08:00:00", "out2"),
        ]
        result = filter_events(events, _registry())
        assert len(result.user_days[0].events) == 2

    def test_unknown_tower_counted(self):
        events = [make_event("u1", "2024-03-04T08:00:00", "ghost")]
        result = filter_events(events, _registry())
        assert result.user_days == [] and result.dropped_unknown_tower == 1

    def test_groups_sorted_by_user_and_date(self):
        events = [
            make_event("u2", "2024-03-05T08:00:00", "out1"),
            make_event("u1", "2024-03-05T09:00:00", "out1"),
            make_event("u1", "2024-03-04T10:00:00", "out2"),
        ]
        result = filter_events(events, _registry())
        keys = [(d.user_id, d.date.isoformat()) for d in result.user_days]
        assert keys == [("u1", "2024-03-04"), ("u1", "2024-03-05"),
                        ("u2", "2024-03-05")]
        for day in result.user_days:
            stamps = [e.timestamp for e in day.events]
            assert stamps == sorted(stamps)

    def test_output_subset_of_input(self):
        events = [
            make_event("u1", "2024-03-04T05:00:00", "out1"),
            make_event("u1", "2024-03-04T08:00:00", "out1"),
            make_event("u1", "2024-03-04T08:30:00", "ghost"),
            make_event("u2", "2024-03-04T12:00:00", "mall"),
        ]
        result = filter_events(events, _registry())
        kept = [e for day in result.user_days for e in day.events]
        assert all(e in events for e in kept)

    def test_idempotent(self):
        events = [
            make_event("u1", "2024-03-04T08:00:00", "out1"),
            make_event("u1", "2024-03-04T08:00:00", "out1"),
            make_event("u1", "2024-03-04T10:00:00", "out2"),
            make_event("u1", "2024-03-04T03:00:00", "out1"),
            make_event("u2", "2024-03-04T11:00:00", "metro"),
        ]
        once = filter_events(events, _registry())
        flattened = [e for day in once.user_days for e in day.events]
        twice = filter_events(flattened, _registry())
        assert twice.user_days == once.user_days
        assert (twice.dropped_indoor, twice.dropped_window,
                twice.dropped_unknown_tower) == (0, 0, 0)


class TestReportAndStreams:
    def test_report_schema(self):
        body = HEADER + ("u1,2024-03-04T08:00:00,out1\n"
                         "u1,bad,out1\n"
                         "u1,2024-03-04T04:00:00,out1\n"
                         "u1,2024-03-04T08:00:00,mall\n"
                         "u1,2024-03-04T08:00:00,ghost\n")
        parsed = parse_events(io.StringIO(body))
        filtered = filter_events(parsed.events, _registry())
        report = make_report(parsed, filtered).to_dict()
        assert report == {
            "rows_read": 5,
            "rows_malformed": 1,
            "events_dropped_indoor": 1,
            "events_dropped_window": 1,
            "events_dropped_unknown_tower": 1,
        }

    def test_gzip_stream(self, tmp_path):
        body = HEADER + "u1,2024-03-04T08:00:00,out1\n"
        path = tmp_path / "events.csv.gz"
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            fh.write(body)
        with open_event_stream(path) as stream:
            result = parse_events(stream)
        assert len(result.events) == 1

    def test_plain_stream(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text(HEADER + "u1,2024-03-04T08:00:00,out1\n")
        with open_event_stream(path) as stream:
            assert len(parse_events(stream).events) == 1
