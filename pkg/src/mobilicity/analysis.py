"""Figure-grade exportable artifacts: component maps, label associations,
user heatmap samples, departure histograms, and event counts."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date as date_type
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .factorize import Factorization
from .geo import Tower, TowerLabel, display_label
from .ingest import Event
from .trips import Trip

UNASSIGNED = -1


@dataclass
class ComponentMap:
    component_id: int
    features: list[tuple[str, float, float, float]]  # (tower_id, lat, lon, weight)
    display_name: str | None = None
    degenerate: bool = False


@dataclass
class AssociationTable:
    k: int
    means: dict[tuple[int, TowerLabel], float]
    group_sizes: dict[TowerLabel, int]

    def to_rows(self) -> list[dict]:
        rows = []
        for (c, label), mean in sorted(self.means.items(),
                                       key=lambda it: (it[0][0], it[0][1].value)):
            rows.append({
                "component": c,
                "label": label.value,
                "mean_weight": mean,
                "group_size": self.group_sizes[label],
            })
        return rows


def dominant_component(row: np.ndarray) -> int:
    """Index of a user's primary component; UNASSIGNED for an all-zero row.

    Ties break toward the lowest component index.
    """
    row = np.asarray(row, dtype=float)
    if (row < 0).any():
        raise ValueError("component weights must be non-negative")
    if not row.any():
        return UNASSIGNED
    return int(np.argmax(row))


def component_map(F: Factorization, towers: Sequence[Tower], c: int) -> ComponentMap:
    if not 0 <= c < F.k:
        raise ValueError(f"component {c} out of range for k={F.k}")
    if len(towers) != F.T.shape[1]:
        raise ValueError("tower list does not match factor width")
    weights = F.T[c]
    features = [(t.id, t.location.lat, t.location.lon, float(w))
                for t, w in zip(towers, weights) if w > 0]
    return ComponentMap(component_id=c, features=features,
                        degenerate=not features)


def component_geojson(F: Factorization, towers: Sequence[Tower], c: int,
                      display_name: str | None = None) -> dict:
    """One component as a GeoJSON FeatureCollection of weighted tower points."""
    cmap = component_map(F, towers, c)
    features = [
        {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [lon, lat]},
            "properties": {"tower_id": tid, "weight": w, "component": c},
        }
        for tid, lat, lon, w in cmap.features
    ]
    doc = {
        "type": "FeatureCollection",
        "component": c,
        "degenerate": cmap.degenerate,
        "features": features,
    }
    if display_name:
        doc["display_name"] = display_name
    return doc


def label_association(F: Factorization, labels: Mapping[str, set[TowerLabel]],
                      tower_ids: Sequence[str],
                      positive_only: bool = False) -> AssociationTable:
    """Mean component weight over each display-label group of towers.

    Empty groups are absent from the table rather than reported as zero.
    With ``positive_only`` the mean runs over positively-weighted towers
    of the group only.
    """
    if len(tower_ids) != F.T.shape[1]:
        raise ValueError("tower id list does not match factor width")
    groups: dict[TowerLabel, list[int]] = {}
    for j, tid in enumerate(tower_ids):
        label = display_label(labels.get(tid, {TowerLabel.NONE}))
        groups.setdefault(label, []).append(j)

    means: dict[tuple[int, TowerLabel], float] = {}
    for label, cols in sorted(groups.items(), key=lambda it: it[0].value):
        for c in range(F.k):
            values = F.T[c, cols]
            if positive_only:
                values = values[values > 0]
            if values.size == 0:
                continue
            means[(c, label)] = float(values.mean())
    group_sizes = {label: len(cols) for label, cols in groups.items()}
    return AssociationTable(k=F.k, means=means, group_sizes=group_sizes)


def user_component_sample(F: Factorization, n: int = 25000,
                          seed: int = 0) -> np.ndarray:
    """A seeded sample of L1-normalized U rows, ordered for heatmap display.

    Rows sort by dominant component, then by dominant weight descending;
    all-zero rows go last. n is clamped to the number of users.
    """
    U = F.U
    n_users = U.shape[0]
    n = min(n, n_users)
    rng = np.random.default_rng(seed)
    idx = rng.choice(n_users, size=n, replace=False)
    rows = U[idx].astype(float)
    sums = rows.sum(axis=1)
    nonzero = sums > 0
    rows[nonzero] = rows[nonzero] / sums[nonzero, np.newaxis]

    dom = np.where(nonzero, np.argmax(rows, axis=1), F.k)  # unassigned last
    dom_weight = np.where(nonzero, rows.max(axis=1), 0.0)
    order = np.lexsort((-dom_weight, dom))
    return rows[order]


def departure_histogram(trips: Iterable[Trip]) -> np.ndarray:
    """Trip-start counts per (day-of-week, hour): a 7 x 24 integer grid."""
    hist = np.zeros((7, 24), dtype=np.int64)
    for trip in trips:
        hour = int(trip.start_t // 3600)
        if 0 <= hour < 24:
            hist[trip.date.weekday(), hour] += 1
    return hist


def event_counts(events: Iterable[Event]) -> dict[date_type, int]:
    """Exact event totals per calendar day."""
    counts: dict[date_type, int] = {}
    for ev in events:
        day = ev.timestamp.date()
        counts[day] = counts.get(day, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# Export writers. Everything below is byte-deterministic for fixed inputs.

def write_association_csv(table: AssociationTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["component", "label", "mean_weight", "group_size"])
        for row in table.to_rows():
            writer.writerow([row["component"], row["label"],
                             repr(row["mean_weight"]), row["group_size"]])


def write_association_json(table: AssociationTable, path: str | Path) -> None:
    doc = {
        "k": table.k,
        "rows": table.to_rows(),
        "group_sizes": {label.value: size
                        for label, size in sorted(table.group_sizes.items(),
                                                  key=lambda it: it[0].value)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def write_histogram_csv(hist: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["day_of_week"] + [f"h{h:02d}" for h in range(24)])
        for dow in range(7):
            writer.writerow([dow] + [int(x) for x in hist[dow]])


def write_event_counts_csv(counts: Mapping[date_type, int], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "n_events"])
        for day in sorted(counts):
            writer.writerow([day.isoformat(), counts[day]])


def write_heatmap_csv(sample: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"c{c}" for c in range(sample.shape[1])) + "\n")
        for row in sample:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
