from datetime import date

import numpy as np
import pytest

from mobilicity.geo import GeoPoint
from mobilicity.ingest import UserDay
from mobilicity.trips import EventClass
from mobilicity.waypoints import (build_waypoints, load_waypoints, matrix_stats,
                                  retained_tower_ids, save_waypoints)

from conftest import make_event, make_tower

DAY = date(2024, 3, 5)

W_ = EventClass.WITHIN_TRIP
S_ = EventClass.STATIONARY


def _registry():
    return {
        "A": make_tower("A", GeoPoint(-33.45, -70.66)),
        "B": make_tower("B", GeoPoint(-33.46, -70.67)),
        "X": make_tower("X", GeoPoint(-33.47, -70.68)),
        "mall": make_tower("mall", GeoPoint(-33.48, -70.69), indoor=True),
        "metro": make_tower("metro", GeoPoint(-33.49, -70.70), indoor=True,
                            underground=True),
    }


def _classified_day(user, towers_classes, day=DAY):
    events = [make_event(user, f"{day.isoformat()}T08:{i:02d}:00", t)
              for i, (t, _) in enumerate(towers_classes)]
    classes = {i: c for i, (_, c) in enumerate(towers_classes)}
    return UserDay(user_id=user, date=day, events=events), classes


class TestBuild:
    def test_retained_columns(self):
        assert retained_tower_ids(_registry()) == ["A", "B", "X", "metro"]

    def test_even_split(self):
        day = _classified_day("u1", [("A", W_), ("B", W_), ("A", W_), ("B", W_),
                                     ("X", S_)])
        W = build_waypoints([day], _registry())
        assert W.row_index == ["u1"]
        row = W.matrix.toarray()[0]
        assert dict(zip(W.col_index, row)) == {"A": 0.5, "B": 0.5, "X": 0.0,
                                               "metro": 0.0}

    def test_single_tower_row(self):
        day = _classified_day("u1", [("X", W_), ("X", W_), ("X", W_)])
        W = build_waypoints([day], _registry())
        assert W.matrix.toarray()[0].tolist() == [0.0, 0.0, 1.0, 0.0]

    def test_users_without_within_events_absent(self):
        d1 = _classified_day("quiet", [("A", S_), ("B", S_)])
        d2 = _classified_day("mover", [("A", W_)])
        W = build_waypoints([d1, d2], _registry())
        assert W.row_index == ["mover"]

    def test_empty_input(self):
        W = build_waypoints([], _registry())
        assert W.shape == (0, 4)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        days = []
        towers = ["A", "B", "X", "metro"]
        for u in range(25):
            picks = rng.integers(0, 4, size=int(rng.integers(1, 12)))
            days.append(_classified_day(f"u{u}", [(towers[j], W_) for j in picks]))
        W = build_waypoints(days, _registry())
        assert np.abs(W.row_sums() - 1.0).max() <= 1e-9
        assert W.matrix.min() >= 0
        assert (W.matrix.data > 0).all()

    def test_aggregates_across_days_and_order_invariance(self):
        d1 = _classified_day("u1", [("A", W_)], day=date(2024, 3, 5))
        d2 = _classified_day("u1", [("B", W_)], day=date(2024, 3, 6))
        W_fwd = build_waypoints([d1, d2], _registry())
        W_rev = build_waypoints([d2, d1], _registry())
        assert (W_fwd.matrix != W_rev.matrix).nnz == 0
        assert W_fwd.matrix.toarray()[0].tolist() == [0.5, 0.5, 0.0, 0.0]

    def test_date_range_filter(self):
        d1 = _classified_day("u1", [("A", W_)], day=date(2024, 3, 5))
        d2 = _classified_day("u1", [("B", W_)], day=date(2024, 3, 12))
        W = build_waypoints([d1, d2], _registry(), date_end=date(2024, 3, 8))
        assert W.matrix.toarray()[0].tolist() == [1.0, 0.0, 0.0, 0.0]

    def test_unregistered_within_tower_rejected(self):
        day = _classified_day("u1", [("mall", W_)])  # indoor: not a column
        with pytest.raises(ValueError):
            build_waypoints([day], _registry())


class TestStats:
    def test_empty_matrix(self):
        stats = matrix_stats(build_waypoints([], _registry()))
        assert (stats.rows, stats.nnz, stats.density,
                stats.max_row_sum_deviation) == (0, 0, 0.0, 0.0)

    def test_counts(self):
        d1 = _classified_day("u1", [("A", W_), ("B", W_)])
        d2 = _classified_day("u2", [("A", W_)])
        W = build_waypoints([d1, d2], _registry())
        stats = matrix_stats(W)
        assert (stats.rows, stats.cols, stats.nnz) == (2, 4, 3)
        assert stats.density == pytest.approx(3 / 8)
        assert stats.max_row_sum_deviation <= 1e-9


class TestSerialization:
    def _sample(self):
        d1 = _classified_day("u1", [("A", W_), ("B", W_), ("A", W_)])
        d2 = _classified_day("u2", [("metro", W_)])
        return build_waypoints([d1, d2], _registry())

    def test_round_trip(self, tmp_path):
        W = self._sample()
        save_waypoints(W, tmp_path / "w.mtx", tmp_path / "w.json")
        loaded = load_waypoints(tmp_path / "w.mtx", tmp_path / "w.json")
        assert loaded.row_index == W.row_index
        assert loaded.col_index == W.col_index
        assert np.array_equal(loaded.matrix.toarray(), W.matrix.toarray())

    def test_bytes_stable(self, tmp_path):
        W = self._sample()
        save_waypoints(W, tmp_path / "a.mtx", tmp_path / "a.json")
        save_waypoints(W, tmp_path / "b.mtx", tmp_path / "b.json")
        assert (tmp_path / "a.mtx").read_bytes() == (tmp_path / "b.mtx").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
