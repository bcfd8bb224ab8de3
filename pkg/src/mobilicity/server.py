"""HTTP JSON API over a completed run directory.

Reads are served concurrently from immutable run artifacts; expensive
refactorizations go through a job queue drained by a single background
worker, so the expert's iterate-on-k loop never blocks the UI.
"""

from __future__ import annotations

import json
import mimetypes
import queue
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import analysis, factorize, geo, pipeline, waypoints

_COMPONENT_NAME_ROUTE = re.compile(r"^/api/components/(\d+)/(\d+)/name$")
_JOB_ROUTE = re.compile(r"^/api/jobs/([A-Za-z0-9_-]+)$")


class RunState:
    """Shared server state: run artifacts, job queue, and the names store."""

    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)
        manifest_path = self.run_dir / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest.json under {run_dir}")
        with open(manifest_path, encoding="utf-8") as fh:
            self.manifest = json.load(fh)
        self.registry, self.lines = pipeline.load_run_inputs(self.run_dir)
        self.labels = geo.label_towers(list(self.registry.values()), self.lines)
        self.W = waypoints.load_waypoints(self.run_dir / "waypoints.mtx",
                                          self.run_dir / "waypoints_index.json")
        self.names_path = self.run_dir / "names.json"
        self.names_lock = threading.Lock()
        self.jobs: dict[str, dict] = {}
        self.jobs_lock = threading.Lock()
        self.job_queue: "queue.Queue[str]" = queue.Queue()
        self._job_counter = 0
        self.worker = threading.Thread(target=self._drain_jobs, daemon=True)
        self.worker.start()

    # -- jobs ---------------------------------------------------------------

    def submit_job(self, k: int, seed: int, restarts: int) -> dict:
        with self.jobs_lock:
            self._job_counter += 1
            job = {"id": f"job-{self._job_counter}", "k": k, "seed": seed,
                   "restarts": restarts, "status": "queued", "error": None}
            self.jobs[job["id"]] = job
        self.job_queue.put(job["id"])
        return job

    def get_job(self, job_id: str) -> dict | None:
        with self.jobs_lock:
            job = self.jobs.get(job_id)
            return dict(job) if job else None

    def _drain_jobs(self) -> None:
        while True:
            job_id = self.job_queue.get()
            if job_id is None:  # shutdown sentinel
                return
            with self.jobs_lock:
                job = self.jobs[job_id]
                job["status"] = "running"
            try:
                F = factorize.nmf(self.W, job["k"], seed=job["seed"],
                                  n_restarts=job["restarts"])
                F = factorize.normalize_components(F)
                pipeline.export_factorization(self.run_dir, self.W,
                                              self.registry, self.labels, F)
                point = factorize.KSweepPoint(
                    k=job["k"],
                    nmf_rss=factorize.rss(self.W, F.U, F.T),
                    svd_rss=factorize.svd_rss(self.W, job["k"]))
                pipeline.update_rss_curve(self.run_dir, [point])
                with self.jobs_lock:
                    job["status"] = "done"
            except Exception as exc:  # job errors are reported, not fatal
                with self.jobs_lock:
                    job["status"] = "failed"
                    job["error"] = str(exc)

    def stop_worker(self) -> None:
        self.job_queue.put(None)

    # -- persisted component names -------------------------------------------

    def read_names(self) -> dict:
        with self.names_lock:
            if not self.names_path.exists():
                return {}
            with open(self.names_path, encoding="utf-8") as fh:
                return json.load(fh)

    def set_name(self, k: int, c: int, name: str) -> None:
        with self.names_lock:
            names = {}
            if self.names_path.exists():
                with open(self.names_path, encoding="utf-8") as fh:
                    names = json.load(fh)
            names.setdefault(str(k), {})[str(c)] = name
            with open(self.names_path, "w", encoding="utf-8") as fh:
                json.dump(names, fh, sort_keys=True)
                fh.write("\n")

    # -- artifact lookups ------------------------------------------------------

    def factorization_dir(self, k: int) -> Path | None:
        d = self.run_dir / "factorization" / f"k{k}"
        return d if (d / "factorization.json").exists() else None

    def components_payload(self, k: int) -> dict | None:
        if self.factorization_dir(k) is None:
            return None
        cdir = self.run_dir / "components" / f"k{k}"
        names = self.read_names().get(str(k), {})
        collections = []
        for c in range(k):
            path = cdir / f"component_{c}.geojson"
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            if str(c) in names:
                doc["display_name"] = names[str(c)]
            collections.append(doc)
        return {"k": k, "names": names, "components": collections}

    def towers_payload(self) -> dict:
        rows = []
        for tid in sorted(self.registry):
            t = self.registry[tid]
            labels = sorted(l.value for l in self.labels.get(tid, set()))
            rows.append({
                "tower_id": t.id,
                "name": t.name,
                "lat": t.location.lat,
                "lon": t.location.lon,
                "indoor": t.indoor,
                "underground_metro": t.underground_metro,
                "labels": labels,
                "display_label": geo.display_label(self.labels.get(tid, set())).value,
            })
        infra = [{"kind": line.kind,
                  "coordinates": [[v.lon, v.lat] for v in line.vertices]}
                 for line in self.lines]
        return {"towers": rows, "infrastructure": infra}

    def rss_curve_payload(self) -> dict:
        path = self.run_dir / "rss_curve.csv"
        points = []
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                next(fh, None)
                for line in fh:
                    line = line.strip()
                    if line:
                        k_s, n_s, s_s = line.split(",")
                        points.append({"k": int(k_s), "nmf_rss": float(n_s),
                                       "svd_rss": float(s_s)})
        return {"points": points}

    def heatmap_payload(self, k: int, n: int, seed: int) -> dict | None:
        fdir = self.factorization_dir(k)
        if fdir is None:
            return None
        F = factorize.load_factorization(fdir)
        sample = analysis.user_component_sample(F, n=n, seed=seed)
        return {"k": k, "n": int(sample.shape[0]), "seed": seed,
                "values": [[float(x) for x in row] for row in sample]}

    def association_payload(self, k: int) -> dict | None:
        path = self.run_dir / "association" / f"k{k}.json"
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)


def _make_handler(state: RunState, static_dir: Path | None, quiet: bool):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # noqa: N802
            if not quiet:
                super().log_message(fmt, *args)

        # -- plumbing ------------------------------------------------------

        def _send_json(self, code: int, doc) -> None:
            body = json.dumps(doc).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _error(self, code: int, message: str) -> None:
            self._send_json(code, {"error": message})

        def _read_body(self) -> dict | None:
            try:
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length) if length else b""
                doc = json.loads(raw.decode("utf-8")) if raw else {}
            except (ValueError, UnicodeDecodeError):
                return None
            return doc if isinstance(doc, dict) else None

        def _query(self) -> dict[str, str]:
            qs = parse_qs(urlparse(self.path).query)
            return {k: v[-1] for k, v in qs.items()}

        def _int_param(self, params: dict[str, str], name: str,
                       default: int | None = None) -> int | None:
            if name not in params:
                return default
            try:
                return int(params[name])
            except ValueError:
                raise _BadRequest(f"parameter {name!r} must be an integer")

        # -- methods ---------------------------------------------------------

        def do_OPTIONS(self):  # noqa: N802
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods",
                             "GET, POST, PUT, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):  # noqa: N802
            try:
                self._route_get()
            except _BadRequest as exc:
                self._error(400, str(exc))
            except BrokenPipeError:
                pass
            except Exception as exc:
                self._error(500, f"internal error: {exc}")

        def _route_get(self) -> None:
            path = urlparse(self.path).path
            params = self._query()
            if path == "/api/run":
                self._send_json(200, state.manifest)
            elif path == "/api/towers":
                self._send_json(200, state.towers_payload())
            elif path == "/api/components":
                k = self._int_param(params, "k")
                if k is None:
                    raise _BadRequest("missing required parameter 'k'")
                payload = state.components_payload(k)
                if payload is None:
                    self._error(404, f"no factorization at k={k}")
                else:
                    self._send_json(200, payload)
            elif path == "/api/rss-curve":
                self._send_json(200, state.rss_curve_payload())
            elif path == "/api/label-association":
                k = self._int_param(params, "k")
                if k is None:
                    raise _BadRequest("missing required parameter 'k'")
                payload = state.association_payload(k)
                if payload is None:
                    self._error(404, f"no association table at k={k}")
                else:
                    self._send_json(200, payload)
            elif path == "/api/heatmap":
                k = self._int_param(params, "k")
                if k is None:
                    raise _BadRequest("missing required parameter 'k'")
                n = self._int_param(params, "n", 25000)
                seed = self._int_param(params, "seed", 0)
                payload = state.heatmap_payload(k, n, seed)
                if payload is None:
                    self._error(404, f"no factorization at k={k}")
                else:
                    self._send_json(200, payload)
            elif _JOB_ROUTE.match(path):
                job = state.get_job(_JOB_ROUTE.match(path).group(1))
                if job is None:
                    self._error(404, "unknown job")
                else:
                    self._send_json(200, job)
            elif static_dir is not None:
                self._serve_static(path)
            else:
                self._error(404, f"unknown endpoint {path}")

        def do_POST(self):  # noqa: N802
            path = urlparse(self.path).path
            if path != "/api/factorize":
                self._error(404, f"unknown endpoint {path}")
                return
            body = self._read_body()
            if body is None or "k" not in body:
                self._error(400, "body must be JSON with an integer 'k'")
                return
            k = body.get("k")
            seed = body.get("seed", 0)
            restarts = body.get("restarts", 1)
            if not isinstance(k, int) or isinstance(k, bool) \
                    or not isinstance(seed, int) or not isinstance(restarts, int):
                self._error(400, "k, seed, restarts must be integers")
                return
            if not 1 <= k <= min(state.W.shape):
                self._error(400, f"k={k} out of range for a "
                                 f"{state.W.shape[0]}x{state.W.shape[1]} matrix")
                return
            if restarts < 1:
                self._error(400, "restarts must be at least 1")
                return
            job = state.submit_job(k, seed, restarts)
            self._send_json(200, {"job_id": job["id"], "status": job["status"]})

        def do_PUT(self):  # noqa: N802
            path = urlparse(self.path).path
            match = _COMPONENT_NAME_ROUTE.match(path)
            if not match:
                self._error(404, f"unknown endpoint {path}")
                return
            k, c = int(match.group(1)), int(match.group(2))
            body = self._read_body()
            if body is None or not isinstance(body.get("name"), str) \
                    or not body["name"].strip():
                self._error(400, "body must be JSON with a non-empty 'name'")
                return
            if state.factorization_dir(k) is None:
                self._error(404, f"no factorization at k={k}")
                return
            if not 0 <= c < k:
                self._error(404, f"component {c} out of range for k={k}")
                return
            state.set_name(k, c, body["name"].strip())
            self._send_json(200, {"k": k, "component": c, "name": body["name"].strip()})

        def _serve_static(self, path: str) -> None:
            rel = path.lstrip("/") or "index.html"
            target = (static_dir / rel).resolve()
            if not str(target).startswith(str(static_dir.resolve())) \
                    or not target.is_file():
                self._error(404, f"not found: {path}")
                return
            body = target.read_bytes()
            ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

    return Handler


class _BadRequest(Exception):
    pass


class RunServer:
    """The API server bound to one run directory."""

    def __init__(self, run_dir: str | Path, host: str = "127.0.0.1",
                 port: int = 0, static_dir: str | Path | None = None,
                 quiet: bool = False):
        self.state = RunState(run_dir)
        static = Path(static_dir) if static_dir else None
        handler = _make_handler(self.state, static, quiet)
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.host, self.port = self.httpd.server_address[:2]
        self._thread: threading.Thread | None = None

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        self.state.stop_worker()
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
