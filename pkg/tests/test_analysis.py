from datetime import date

import numpy as np
import pytest

from mobilicity.analysis import (UNASSIGNED, component_geojson,
                                 departure_histogram, dominant_component,
                                 event_counts, label_association,
                                 user_component_sample, write_association_csv,
                                 write_histogram_csv)
from mobilicity.factorize import Factorization
from mobilicity.geo import GeoPoint, TowerLabel
from mobilicity.trips import Trip

from conftest import make_event, make_tower


def _factorization(T, U=None):
    T = np.asarray(T, dtype=float)
    k = T.shape[0]
    if U is None:
        U = np.ones((4, k))
    return Factorization(U=np.asarray(U, dtype=float), T=T, k=k, seed=0,
                         objective_history=[1.0], iterations_run=1,
                         converged=True)


def _towers(n):
    return [make_tower(f"t{j}", GeoPoint(-33.4 - 0.01 * j, -70.6)) for j in range(n)]


class TestDominantComponent:
    def test_argmax(self):
        assert dominant_component(np.array([0.2, 0.8])) == 1

    def test_tie_breaks_low_index(self):
        assert dominant_component(np.array([0.5, 0.5])) == 0

    def test_all_zero_unassigned(self):
        assert dominant_component(np.zeros(3)) == UNASSIGNED

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            dominant_component(np.array([0.5, -0.1]))

    def test_scale_invariant(self):
        row = np.array([0.1, 0.7, 0.2])
        assert dominant_component(row) == dominant_component(row * 37.0)


class TestComponentGeojson:
    def test_two_features(self):
        F = _factorization([[0.7, 0.3, 0.0]])
        doc = component_geojson(F, _towers(3), 0)
        assert doc["type"] == "FeatureCollection"
        assert not doc["degenerate"]
        assert [f["properties"]["tower_id"] for f in doc["features"]] == ["t0", "t1"]
        assert [f["properties"]["weight"] for f in doc["features"]] == [0.7, 0.3]
        lon, lat = doc["features"][0]["geometry"]["coordinates"]
        assert (lat, lon) == (-33.4, -70.6)

    def test_all_zero_component_degenerate(self):
        F = _factorization([[0.0, 0.0], [1.0, 0.0]])
        doc = component_geojson(F, _towers(2), 0)
        assert doc["features"] == [] and doc["degenerate"]

    def test_normalized_weights_sum_to_one(self):
        rng = np.random.default_rng(1)
        T = rng.uniform(0, 1, size=(3, 10))
        T /= T.sum(axis=1, keepdims=True)
        F = _factorization(T)
        for c in range(3):
            doc = component_geojson(F, _towers(10), c)
            total = sum(f["properties"]["weight"] for f in doc["features"])
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_component_out_of_range(self):
        F = _factorization([[1.0, 0.0]])
        with pytest.raises(ValueError):
            component_geojson(F, _towers(2), 1)


class TestLabelAssociation:
    def test_uniform_single_label(self):
        n = 5
        F = _factorization([np.full(n, 1.0 / n)])
        labels = {f"t{j}": {TowerLabel.HIGHWAY} for j in range(n)}
        table = label_association(F, labels, [f"t{j}" for j in range(n)])
        assert table.means[(0, TowerLabel.HIGHWAY)] == pytest.approx(1.0 / n)
        assert table.group_sizes[TowerLabel.HIGHWAY] == n

    def test_empty_group_absent(self):
        F = _factorization([[0.5, 0.5]])
        labels = {"t0": {TowerLabel.HIGHWAY}, "t1": {TowerLabel.HIGHWAY}}
        table = label_association(F, labels, ["t0", "t1"])
        keys = {label for _, label in table.means}
        assert TowerLabel.METRO_SURFACE not in keys
        assert not any(np.isnan(v) for v in table.means.values())

    def test_unlabeled_towers_fall_in_none_group(self):
        F = _factorization([[0.25, 0.75]])
        table = label_association(F, {}, ["t0", "t1"])
        assert table.means[(0, TowerLabel.NONE)] == pytest.approx(0.5)

    def test_display_precedence_buckets(self):
        F = _factorization([[0.6, 0.4]])
        labels = {
            "t0": {TowerLabel.HIGHWAY, TowerLabel.METRO_UNDERGROUND},
            "t1": {TowerLabel.HIGHWAY},
        }
        table = label_association(F, labels, ["t0", "t1"])
        assert table.means[(0, TowerLabel.METRO_UNDERGROUND)] == pytest.approx(0.6)
        assert table.means[(0, TowerLabel.HIGHWAY)] == pytest.approx(0.4)

    def test_positive_only_flag(self):
        F = _factorization([[0.0, 0.5, 0.5, 0.0]])
        labels = {f"t{j}": {TowerLabel.HIGHWAY} for j in range(4)}
        ids = [f"t{j}" for j in range(4)]
        default = label_association(F, labels, ids)
        positive = label_association(F, labels, ids, positive_only=True)
        assert default.means[(0, TowerLabel.HIGHWAY)] == pytest.approx(0.25)
        assert positive.means[(0, TowerLabel.HIGHWAY)] == pytest.approx(0.5)


class TestUserComponentSample:
    def _factor_users(self):
        rng = np.random.default_rng(5)
        U = rng.uniform(0, 1, size=(60, 4))
        return _factorization(rng.uniform(0, 1, size=(4, 8)), U=U)

    def test_clamps_to_user_count(self):
        F = self._factor_users()
        sample = user_component_sample(F, n=10_000, seed=0)
        assert sample.shape == (60, 4)

    def test_deterministic(self):
        F = self._factor_users()
        a = user_component_sample(F, n=30, seed=11)
        b = user_component_sample(F, n=30, seed=11)
        assert np.array_equal(a, b)

    def test_rows_normalized_and_ordered(self):
        F = self._factor_users()
        sample = user_component_sample(F, n=60, seed=3)
        assert np.allclose(sample.sum(axis=1), 1.0, atol=1e-9)
        doms = np.argmax(sample, axis=1)
        assert (np.diff(doms) >= 0).all()  # contiguous blocks
        for c in set(doms):
            block = sample[doms == c][:, c]
            assert (np.diff(block) <= 1e-12).all()  # descending dominant weight

    def test_strong_user_sorts_high_in_block(self):
        U = np.vstack([np.full((5, 2), 0.5),
                       np.array([[0.9, 0.1]])])
        F = _factorization(np.ones((2, 3)), U=U)
        sample = user_component_sample(F, n=6, seed=0)
        assert sample[0, 0] == pytest.approx(0.9)


class TestHistogramsAndCounts:
    def _trip(self, day, start_t):
        origin = make_event("u", f"{day.isoformat()}T08:00:00", "a")
        dest = make_event("u", f"{day.isoformat()}T09:00:00", "b")
        return Trip(user_id="u", date=day, origin_event=origin,
                    destination_event=dest, within_events=[],
                    start_t=float(start_t), end_t=float(start_t) + 1800.0)

    def test_empty_histogram(self):
        hist = departure_histogram([])
        assert hist.shape == (7, 24) and hist.sum() == 0

    def test_single_trip_bins(self):
        tuesday = date(2024, 3, 5)
        hist = departure_histogram([self._trip(tuesday, 8 * 3600 + 1800)])
        assert hist[1, 8] == 1 and hist.sum() == 1

    def test_bin_boundaries(self):
        monday = date(2024, 3, 4)
        trips = [self._trip(monday, 9 * 3600), self._trip(monday, 9 * 3600 + 3599)]
        hist = departure_histogram(trips)
        assert hist[0, 9] == 2

    def test_event_counts(self):
        assert event_counts([]) == {}
        events = [make_event("u", "2024-03-04T08:00:00", "a"),
                  make_event("u", "2024-03-04T09:00:00", "a"),
                  make_event("u", "2024-03-05T08:00:00", "a")]
        counts = event_counts(events)
        assert counts == {date(2024, 3, 4): 2, date(2024, 3, 5): 1}


def test_export_writers(tmp_path):
    F = _factorization([[0.5, 0.5], [1.0, 0.0]])
    labels = {"t0": {TowerLabel.HIGHWAY}, "t1": {TowerLabel.NONE}}
    table = label_association(F, labels, ["t0", "t1"])
    write_association_csv(table, tmp_path / "assoc.csv")
    lines = (tmp_path / "assoc.csv").read_text().splitlines()
    assert lines[0] == "component,label,mean_weight,group_size"
    assert len(lines) == 1 + 4  # 2 components x 2 label groups

    hist = departure_histogram([])
    write_histogram_csv(hist, tmp_path / "hist.csv")
    lines = (tmp_path / "hist.csv").read_text().splitlines()
    assert len(lines) == 8 and lines[0].startswith("day_of_week,h00")
