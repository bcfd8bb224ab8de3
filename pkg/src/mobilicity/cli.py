"""Command-line entry points: pipeline, sweep, serve."""

from __future__ import annotations

import argparse
import sys
from datetime import date as date_type
from pathlib import Path

from .errors import ConfigError, FormatError
from .pipeline import (PipelineConfig, StageFailure, SYNTH_PRESETS,
                       parse_config_file, run_pipeline, run_sweep)
from .server import RunServer

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_COMPUTE = 4


def _parse_date(raw: str) -> date_type:
    try:
        return date_type.fromisoformat(raw)
    except ValueError as exc:
        raise ConfigError(f"bad date {raw!r} (expected YYYY-MM-DD)") from exc


def _parse_hhmm(raw: str) -> int:
    parts = raw.split(":")
    try:
        if len(parts) != 2:
            raise ValueError
        hours, minutes = int(parts[0]), int(parts[1])
        if not (0 <= hours <= 24 and 0 <= minutes < 60) or (hours == 24 and minutes != 0):
            raise ValueError
    except ValueError:
        raise ConfigError(f"bad time {raw!r} (expected HH:MM, up to 24:00)") from None
    return hours * 3600 + minutes * 60


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {raw!r}") from exc


def _parse_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {raw!r}") from exc


# config-file key, CLI flag attribute, parser, PipelineConfig field
_PIPELINE_OPTIONS = [
    ("events", "events", str, "events_path"),
    ("towers", "towers", str, "towers_path"),
    ("infra", "infra", str, "infra_path"),
    ("synth", "synth", str, "synth_preset"),
    ("k", "k", _parse_int, "k"),
    ("seed", "seed", _parse_int, "seed"),
    ("restarts", "restarts", _parse_int, "restarts"),
    ("max_iter", "max_iter", _parse_int, "max_iter"),
    ("tol", "tol", _parse_float, "tol"),
    ("date_start", "date_start", _parse_date, "date_start"),
    ("date_end", "date_end", _parse_date, "date_end"),
    ("window_start", "window_start", _parse_hhmm, "window_start_s"),
    ("window_end", "window_end", _parse_hhmm, "window_end_s"),
    ("simplify_tol", "simplify_tol", _parse_float, "simplify_tol_m"),
    ("v_stationary", "v_stationary", _parse_float, "v_stationary_ms"),
    ("v_max", "v_max", _parse_float, "v_max_ms"),
    ("d_min", "d_min", _parse_float, "d_min_m"),
    ("label_radius", "label_radius", _parse_float, "label_radius_m"),
    ("metro_radius", "metro_radius", _parse_float, "metro_radius_m"),
    ("heatmap_n", "heatmap_n", _parse_int, "heatmap_n"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobilicity",
        description="Trip inference and latent mobility structure discovery "
                    "from cell-tower event logs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run the full pipeline into a run directory")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--config", help="flat key = value config file; flags win")
    for key, flag, _, _field in _PIPELINE_OPTIONS:
        p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, default=None,
                       metavar=key.upper())

    s = sub.add_parser("sweep", help="factorize an existing run at several k")
    s.add_argument("--run", required=True, help="existing run directory")
    s.add_argument("--ks", default="4,8,12", help="comma-separated component counts")
    s.add_argument("--seed", default="0")
    s.add_argument("--restarts", default="3")

    v = sub.add_parser("serve", help="serve the JSON API for a run directory")
    v.add_argument("--run", required=True, help="completed run directory")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", default="8765")
    v.add_argument("--static", default=None,
                   help="optionally serve a built web client from this directory")
    return parser


def build_pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    unknown = set(file_values) - {key for key, *_ in _PIPELINE_OPTIONS}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    values: dict[str, object] = {"out_dir": args.out}
    for key, flag, parse, field in _PIPELINE_OPTIONS:
        raw = getattr(args, flag)
        if raw is None:
            raw = file_values.get(key)
        if raw is None:
            continue
        values[field] = parse(raw)
    return PipelineConfig(**values)  # type: ignore[arg-type]


def _cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = build_pipeline_config(args)
    cfg.validate()
    manifest_path = run_pipeline(cfg)
    print(f"pipeline complete: {manifest_path}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    try:
        ks = [int(x) for x in args.ks.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad --ks value {args.ks!r}")
    points = run_sweep(args.run, ks,
                       seed=_parse_int(args.seed),
                       restarts=_parse_int(args.restarts))
    for p in points:
        print(f"k={p.k}  nmf_rss={p.nmf_rss:.6g}  svd_rss={p.svd_rss:.6g}")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    if not (run_dir / "manifest.json").exists():
        raise ConfigError(f"not a completed run directory: {run_dir}")
    server = RunServer(run_dir, host=args.host, port=_parse_int(args.port),
                       static_dir=args.static)
    print(f"serving {run_dir} on http://{server.host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, FormatError):
        return EXIT_FORMAT
    return EXIT_COMPUTE


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "pipeline":
            return _cmd_pipeline(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "serve":
            return _cmd_serve(args)
        parser.error(f"unknown command {args.command!r}")
        return EXIT_CONFIG
    except StageFailure as exc:
        print(f"error [{exc.stage}]: {exc.cause}", file=sys.stderr)
        return _exit_code(exc.cause)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
