"""End-to-end run orchestration: stages, exports, and the run manifest.

A run directory is the single source of truth for one pipeline
execution. Every export is byte-deterministic for a fixed config, seed,
and inputs; the manifest records their digests.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, replace
from datetime import date as date_type, datetime
from pathlib import Path

from . import analysis, factorize, geo, ingest, synth, trips, waypoints
from .errors import ConfigError

SYNTH_PRESETS: dict[str, synth.SynthConfig] = {
    "small": synth.SynthConfig(n_users=120, n_towers=60, k_true=4, n_days=4),
    "medium": synth.SynthConfig(n_users=1000, n_towers=200, k_true=4, n_days=14),
}


class StageFailure(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    out_dir: str
    events_path: str | None = None
    towers_path: str | None = None
    infra_path: str | None = None
    synth_preset: str | None = None
    k: int = 8
    seed: int = 0
    restarts: int = 1
    max_iter: int = 200
    tol: float = 1e-4
    date_start: date_type | None = None
    date_end: date_type | None = None
    window_start_s: int = ingest.DEFAULT_WINDOW_START_S
    window_end_s: int = ingest.DEFAULT_WINDOW_END_S
    simplify_tol_m: float = 500.0
    v_stationary_ms: float = 0.42
    v_max_ms: float = 42.0
    d_min_m: float = 500.0
    label_radius_m: float = 250.0
    metro_radius_m: float | None = None
    heatmap_n: int = 25000

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        if not self.window_start_s < self.window_end_s <= 24 * 3600:
            raise ConfigError("bad daily window")
        if self.synth_preset is not None:
            if self.synth_preset not in SYNTH_PRESETS:
                raise ConfigError(
                    f"unknown synth preset {self.synth_preset!r}; "
                    f"choose from {sorted(SYNTH_PRESETS)}")
            return
        for name, path in (("events", self.events_path),
                           ("tower registry", self.towers_path),
                           ("infrastructure", self.infra_path)):
            if path is None:
                raise ConfigError(f"missing {name} input (and no --synth preset)")
            if not Path(path).exists():
                raise ConfigError(f"{name} file not found: {path}")

    def trip_rules(self) -> trips.TripRuleConfig:
        return trips.TripRuleConfig(
            simplify_tol_m=self.simplify_tol_m,
            v_stationary_ms=self.v_stationary_ms,
            v_max_ms=self.v_max_ms,
            d_min_m=self.d_min_m,
        )

    def snapshot(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["date_start"] = self.date_start.isoformat() if self.date_start else None
        doc["date_end"] = self.date_end.isoformat() if self.date_end else None
        return doc

    def identity(self) -> dict:
        # semantic identity only: file locations do not affect the run id
        doc = self.snapshot()
        for key in ("out_dir", "events_path", "towers_path", "infra_path"):
            doc.pop(key, None)
        return doc


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat `key = value` config text; `#` starts a comment."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _now() -> str:
    return datetime.now().isoformat(timespec="seconds")


def generate_synth_inputs(preset: str, seed: int, inputs_dir: Path) -> dict[str, Path]:
    """Materialize a synthetic city and event log in the ingestion formats."""
    cfg = replace(SYNTH_PRESETS[preset], seed=seed)
    city = synth.synth_city(cfg)
    events, gt = synth.synth_events(cfg, city)
    inputs_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": inputs_dir / "events.csv",
        "towers": inputs_dir / "towers.csv",
        "infra": inputs_dir / "infrastructure.geojson",
        "ground_truth": inputs_dir / "ground_truth.json",
    }
    synth.write_events_csv(events, paths["events"])
    geo.write_tower_csv(city.towers, paths["towers"])
    geo.write_infrastructure_geojson(city.lines, paths["infra"])
    synth.write_ground_truth(gt, paths["ground_truth"])
    return paths


def export_factorization(run_dir: Path, W: waypoints.WaypointsMatrix,
                         registry: dict[str, geo.Tower],
                         labels: dict[str, set[geo.TowerLabel]],
                         F: factorize.Factorization) -> list[Path]:
    """Write one factorization's artifacts; returns the written paths.

    F must already be component-normalized.
    """
    written: list[Path] = []
    k = F.k
    fdir = run_dir / "factorization" / f"k{k}"
    factorize.save_factorization(F, fdir)
    written += [fdir / "factorization.json", fdir / "U.csv", fdir / "T.csv"]

    towers_aligned = waypoints.aligned_towers(W, registry)
    cdir = run_dir / "components" / f"k{k}"
    cdir.mkdir(parents=True, exist_ok=True)
    for c in range(k):
        doc = analysis.component_geojson(F, towers_aligned, c)
        path = cdir / f"component_{c}.geojson"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")
        written.append(path)

    table = analysis.label_association(F, labels, W.col_index)
    adir = run_dir / "association"
    adir.mkdir(parents=True, exist_ok=True)
    analysis.write_association_json(table, adir / f"k{k}.json")
    analysis.write_association_csv(table, adir / f"k{k}.csv")
    written += [adir / f"k{k}.json", adir / f"k{k}.csv"]
    return written


def update_rss_curve(run_dir: Path, points: list[factorize.KSweepPoint]) -> Path:
    """Merge sweep points into rss_curve.csv, keyed and sorted by k."""
    path = run_dir / "rss_curve.csv"
    rows: dict[int, tuple[float, float]] = {}
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            next(fh, None)
            for line in fh:
                line = line.strip()
                if line:
                    k_s, n_s, s_s = line.split(",")
                    rows[int(k_s)] = (float(n_s), float(s_s))
    for p in points:
        rows[p.k] = (p.nmf_rss, p.svd_rss)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,nmf_rss,svd_rss\n")
        for k in sorted(rows):
            n, s = rows[k]
            fh.write(f"{k},{n!r},{s!r}\n")
    return path


def run_pipeline(cfg: PipelineConfig) -> Path:
    """Execute ingest, trips, waypoints, factorize, analysis; write the manifest."""
    stage = "config"
    try:
        cfg.validate()
        run_dir = Path(cfg.out_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        stage_times: dict[str, str] = {}

        stage = "inputs"
        if cfg.synth_preset is not None:
            paths = generate_synth_inputs(cfg.synth_preset, cfg.seed,
                                          run_dir / "inputs")
            events_path = paths["events"]
            towers_path = paths["towers"]
            infra_path = paths["infra"]
        else:
            events_path = Path(cfg.events_path)  # type: ignore[arg-type]
            towers_path = Path(cfg.towers_path)  # type: ignore[arg-type]
            infra_path = Path(cfg.infra_path)  # type: ignore[arg-type]
        input_digests = {
            "events": sha256_file(events_path),
            "towers": sha256_file(towers_path),
            "infrastructure": sha256_file(infra_path),
        }
        stage_times["inputs"] = _now()

        stage = "ingest"
        registry = geo.load_tower_csv(towers_path)
        lines = geo.load_infrastructure_geojson(infra_path)
        with ingest.open_event_stream(events_path) as stream:
            parsed = ingest.parse_events(stream)
        filtered = ingest.filter_events(parsed.events, registry,
                                        window_start_s=cfg.window_start_s,
                                        window_end_s=cfg.window_end_s)
        report = ingest.make_report(parsed, filtered)
        _write_json(run_dir / "ingest_report.json", report.to_dict())
        stage_times["ingest"] = _now()

        stage = "trips"
        rules = cfg.trip_rules()
        all_trips: list[trips.Trip] = []
        classified: list[tuple[ingest.UserDay, dict[int, trips.EventClass]]] = []
        for day in filtered.user_days:
            day_trips, classes = trips.detect_trips(day, registry, rules)
            all_trips.extend(day_trips)
            classified.append((day, classes))
        trips.write_trips_csv(all_trips, run_dir / "trips.csv")
        trips.write_event_classes_csv(classified, run_dir / "event_classes.csv")
        _write_json(run_dir / "trip_stats.json", trips.trip_stats(all_trips).to_dict())
        analysis.write_histogram_csv(analysis.departure_histogram(all_trips),
                                     run_dir / "departure_histogram.csv")
        analysis.write_event_counts_csv(analysis.event_counts(parsed.events),
                                        run_dir / "event_counts.csv")
        stage_times["trips"] = _now()

        stage = "waypoints"
        W = waypoints.build_waypoints(classified, registry,
                                      date_start=cfg.date_start,
                                      date_end=cfg.date_end)
        waypoints.save_waypoints(W, run_dir / "waypoints.mtx",
                                 run_dir / "waypoints_index.json")
        _write_json(run_dir / "matrix_stats.json",
                    waypoints.matrix_stats(W).to_dict())
        stage_times["waypoints"] = _now()

        stage = "factorize"
        F = factorize.nmf(W, cfg.k, max_iter=cfg.max_iter, tol=cfg.tol,
                          seed=cfg.seed, n_restarts=cfg.restarts)
        F = factorize.normalize_components(F)
        nmf_rss = factorize.rss(W, F.U, F.T)
        svd_rss = factorize.svd_rss(W, cfg.k)
        update_rss_curve(run_dir, [factorize.KSweepPoint(cfg.k, nmf_rss, svd_rss)])
        stage_times["factorize"] = _now()

        stage = "analysis"
        labels = geo.label_towers(list(registry.values()), lines,
                                  radius_m=cfg.label_radius_m,
                                  metro_radius_m=cfg.metro_radius_m)
        export_factorization(run_dir, W, registry, labels, F)
        sample = analysis.user_component_sample(
            F, n=min(cfg.heatmap_n, W.shape[0]), seed=cfg.seed)
        hdir = run_dir / "heatmap"
        hdir.mkdir(parents=True, exist_ok=True)
        analysis.write_heatmap_csv(sample, hdir / f"k{cfg.k}.csv")
        stage_times["analysis"] = _now()

        stage = "manifest"
        outputs = {}
        for path in sorted(run_dir.rglob("*")):
            if path.is_file() and path.name != "manifest.json":
                outputs[path.relative_to(run_dir).as_posix()] = sha256_file(path)
        identity = json.dumps({"config": cfg.identity(), "inputs": input_digests},
                              sort_keys=True)
        manifest = {
            "run_id": hashlib.sha256(identity.encode()).hexdigest()[:12],
            "created_at": _now(),
            "config": cfg.snapshot(),
            "stage_timestamps": stage_times,
            "inputs": input_digests,
            "outputs": outputs,
        }
        manifest_path = run_dir / "manifest.json"
        _write_json(manifest_path, manifest)
        return manifest_path
    except StageFailure:
        raise
    except BaseException as exc:
        raise StageFailure(stage, exc) from exc


def run_sweep(run_dir: str | Path, ks: list[int], seed: int = 0,
              restarts: int = 3, max_iter: int = 200,
              tol: float = 1e-4) -> list[factorize.KSweepPoint]:
    """k-sweep over a completed run's Waypoints Matrix, with per-k exports."""
    stage = "sweep"
    try:
        run_dir = Path(run_dir)
        if not ks:
            raise ConfigError("`--ks` must name at least one k")
        triplet = run_dir / "waypoints.mtx"
        sidecar = run_dir / "waypoints_index.json"
        if not triplet.exists() or not sidecar.exists():
            raise ConfigError(f"no waypoints matrix under {run_dir}")
        W = waypoints.load_waypoints(triplet, sidecar)
        registry, lines = load_run_inputs(run_dir)
        labels = geo.label_towers(list(registry.values()), lines)

        svals = factorize.exact_singular_values(W, max(ks))
        points = []
        for k in ks:
            F = factorize.nmf(W, k, max_iter=max_iter, tol=tol, seed=seed,
                              n_restarts=restarts)
            F = factorize.normalize_components(F)
            points.append(factorize.KSweepPoint(
                k=k,
                nmf_rss=factorize.rss(W, F.U, F.T),
                svd_rss=factorize.svd_rss(W, k, singular_values=svals)))
            export_factorization(run_dir, W, registry, labels, F)
        update_rss_curve(run_dir, points)
        return points
    except StageFailure:
        raise
    except BaseException as exc:
        raise StageFailure(stage, exc) from exc


def load_run_inputs(run_dir: str | Path) -> tuple[dict[str, geo.Tower], list[geo.InfraPolyline]]:
    """Locate and load the registry and infrastructure a run was built from."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    towers_path = run_dir / "inputs" / "towers.csv"
    infra_path = run_dir / "inputs" / "infrastructure.geojson"
    if not towers_path.exists() and manifest_path.exists():
        with open(manifest_path, encoding="utf-8") as fh:
            config = json.load(fh).get("config", {})
        if config.get("towers_path"):
            towers_path = Path(config["towers_path"])
        if config.get("infra_path"):
            infra_path = Path(config["infra_path"])
    if not towers_path.exists():
        raise ConfigError(f"cannot locate tower registry for run {run_dir}")
    return geo.load_tower_csv(towers_path), geo.load_infrastructure_geojson(infra_path)


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
