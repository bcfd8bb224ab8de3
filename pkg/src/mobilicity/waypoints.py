"""Aggregate within-trip events into the sparse row-stochastic Waypoints Matrix.

Entry (i, j) is the fraction of user i's within-trip events that touched
tower j over the analysis period: the L1-normalized count ratio, with no
reweighting of any kind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date as date_type
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import FormatError
from .geo import Tower
from .ingest import UserDay
from .trips import EventClass

ROW_SUM_TOL = 1e-9


@dataclass
class WaypointsMatrix:
    row_index: list[str]  # user ids, one per matrix row
    col_index: list[str]  # tower ids, one per matrix column
    matrix: sp.csr_matrix  # row-stochastic, entries in (0, 1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()


@dataclass(frozen=True)
class MatrixStats:
    rows: int
    cols: int
    nnz: int
    density: float
    max_row_sum_deviation: float

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "nnz": self.nnz,
            "density": self.density,
            "max_row_sum_deviation": self.max_row_sum_deviation,
        }


def retained_tower_ids(registry: Mapping[str, Tower]) -> list[str]:
    """Tower ids kept for analysis: out-door towers plus underground metro."""
    return sorted(tid for tid, t in registry.items()
                  if not t.indoor or t.underground_metro)


def build_waypoints(classified_days: Iterable[tuple[UserDay, Mapping[int, EventClass]]],
                    registry: Mapping[str, Tower],
                    date_start: date_type | None = None,
                    date_end: date_type | None = None) -> WaypointsMatrix:
    """Build the user x tower Waypoints Matrix from classified user-days.

    Users without any within-trip event in the (optionally date-bounded)
    period have no row. Columns cover the whole retained tower registry,
    so a column may be empty.
    """
    cols = retained_tower_ids(registry)
    col_pos = {tid: j for j, tid in enumerate(cols)}

    counts: dict[str, dict[int, int]] = {}
    for day, classes in classified_days:
        if date_start is not None and day.date < date_start:
            continue
        if date_end is not None and day.date > date_end:
            continue
        for i, ev in enumerate(day.events):
            if classes[i] is not EventClass.WITHIN_TRIP:
                continue
            j = col_pos.get(ev.tower_id)
            if j is None:
                raise ValueError(f"within-trip event at unregistered tower {ev.tower_id!r}")
            user_counts = counts.setdefault(day.user_id, {})
            user_counts[j] = user_counts.get(j, 0) + 1

    rows = sorted(counts)
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    for user_id in rows:
        user_counts = counts[user_id]
        total = sum(user_counts.values())
        for j in sorted(user_counts):
            indices.append(j)
            data.append(user_counts[j] / total)
        indptr.append(len(indices))
    matrix = sp.csr_matrix((np.array(data, dtype=np.float64),
                            np.array(indices, dtype=np.int64),
                            np.array(indptr, dtype=np.int64)),
                           shape=(len(rows), len(cols)))
    return WaypointsMatrix(row_index=rows, col_index=cols, matrix=matrix)


def matrix_stats(W: WaypointsMatrix) -> MatrixStats:
    rows, cols = W.shape
    nnz = int(W.matrix.nnz)
    density = nnz / (rows * cols) if rows and cols else 0.0
    if rows:
        deviation = float(np.abs(W.row_sums() - 1.0).max())
    else:
        deviation = 0.0
    return MatrixStats(rows=rows, cols=cols, nnz=nnz, density=density,
                       max_row_sum_deviation=deviation)


def aligned_towers(W: WaypointsMatrix, registry: Mapping[str, Tower]) -> list[Tower]:
    """The registry towers in matrix column order."""
    return [registry[tid] for tid in W.col_index]


def save_waypoints(W: WaypointsMatrix, triplet_path: str | Path,
                   sidecar_path: str | Path) -> None:
    """Write the triplet file (`row col value` lines) and the index sidecar."""
    coo = W.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(triplet_path, "w", encoding="utf-8") as fh:
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {float(coo.data[i])!r}\n")
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump({"rows": W.row_index, "cols": W.col_index}, fh, sort_keys=True)
        fh.write("\n")


def load_waypoints(triplet_path: str | Path, sidecar_path: str | Path) -> WaypointsMatrix:
    with open(sidecar_path, encoding="utf-8") as fh:
        sidecar = json.load(fh)
    rows = list(sidecar["rows"])
    cols = list(sidecar["cols"])
    ii: list[int] = []
    jj: list[int] = []
    vv: list[float] = []
    with open(triplet_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"{triplet_path}:{lineno}: expected 'row col value'")
            ii.append(int(parts[0]))
            jj.append(int(parts[1]))
            vv.append(float(parts[2]))
    matrix = sp.coo_matrix((vv, (ii, jj)), shape=(len(rows), len(cols))).tocsr()
    return WaypointsMatrix(row_index=rows, col_index=cols, matrix=matrix)
