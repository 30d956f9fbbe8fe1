"""``dailylog`` command line.

Exit codes: 0 success, 2 bad usage/config/input, 1 runtime failure. Errors
are written to stderr as one JSON object ``{"error", "message", ...}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import ConfigError, DailyLogError, InvalidInput, SchemaError, DecodeError, EmptyStream, EmptyWindow
from .metrics import confusion, metric_report
from .vocab import ACTIVITIES, SYNTH_CLASSES

EVAL_VOCABULARY = tuple(ACTIVITIES) + tuple(c for c in SYNTH_CLASSES if c not in ACTIVITIES)


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra


def _fail(err: CliError) -> int:
    print(json.dumps({"error": err.kind, "message": str(err), **err.extra}), file=sys.stderr)
    return err.code


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise CliError(2, "missing_file", f"{what} not found: {path}", path=str(path))
    return path


def _load_run_config(path: str):
    from .pipeline import RunConfig

    cfg = RunConfig.load(_require(Path(path), "config file"))
    missing = cfg.missing_paths()
    if missing:
        raise CliError(2, "missing_file", f"file not found: {missing[0]}", path=str(missing[0]))
    return cfg


def cmd_run(args) -> int:
    from .logbook import LogStore, summarize
    from .pipeline import run

    cfg = _load_run_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    entries, pipe = run(cfg, workers=args.workers)
    out = {"entries": len(entries), "warnings": len(pipe.warnings), "log_store": str(cfg.log_store)}
    if entries:
        report = summarize(LogStore(cfg.log_store), cfg.summary_window_h, cfg.backend,
                           max_entries=cfg.max_summary_entries, model=pipe.model)
        if report.backend_error:
            out["warnings"] += 1
        target = Path(args.out) if args.out else cfg.summary_out
        if target is not None:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(report.to_json() + "\n", encoding="utf-8")
            out["summary"] = str(target)
        else:
            print(report.render_text())
    print(json.dumps(out))
    return 0


def cmd_summarize(args) -> int:
    from .logbook import LogStore, summarize

    cfg = _load_run_config(args.config)
    store = LogStore(_require(cfg.log_store, "log store"))
    window_h = args.window_h or cfg.summary_window_h
    report = summarize(store, window_h, cfg.backend, max_entries=cfg.max_summary_entries)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.text or not args.out:
        print(report.render_text())
    return 0


def cmd_synth(args) -> int:
    from .synth import SynthConfig, fit_centroid_model, samples_to_records, synthesize_day, write_gazetteer, \
        write_jsonl
    from .ingest import serialize_stream

    cfg = SynthConfig.load(_require(Path(args.config), "config file")) if args.config else SynthConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    samples = synthesize_day(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(samples, out)
    if args.stream:
        Path(args.stream).write_bytes(serialize_stream(samples_to_records(samples)))
    if args.gazetteer:
        write_gazetteer(cfg, args.gazetteer)
    if args.centroids:
        model = fit_centroid_model(cfg, seed=cfg.seed)
        Path(args.centroids).write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")
    print(json.dumps({"samples": len(samples), "out": str(out), "seed": cfg.seed}))
    return 0


def read_labels(path: Path) -> list[str]:
    """One label per line; JSON-object lines contribute their ``activity`` (or ``label``) field."""
    labels = []
    for line in _require(path, "label file").read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            obj = json.loads(line)
            line = obj.get("activity", obj.get("label"))
        labels.append(line)
    return labels


def cmd_eval(args) -> int:
    pred, truth = read_labels(Path(args.pred)), read_labels(Path(args.truth))
    vocab = args.classes.split(",") if args.classes else None
    if vocab is None:
        bad = sorted({l for l in pred + truth if l not in EVAL_VOCABULARY})
        if bad:
            raise CliError(2, "unknown_label", f"label {bad[0]!r} outside the vocabulary", label=bad[0])
        vocab = sorted(set(pred) | set(truth))
    report = metric_report(confusion(truth, pred, vocab))
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_features(args) -> int:
    from .ingest import parse_stream, window_align
    from .pipeline import window_features

    if args.config:
        cfg = _load_run_config(args.config)
        src, fmt, window_s, imu_cfg = cfg.input, cfg.input_format, cfg.window_s, cfg.imu
    else:
        if not args.input:
            raise CliError(2, "usage", "features needs --config or --input")
        from .imu_features import ImuConfig

        src, fmt, window_s, imu_cfg = Path(args.input), args.format, args.window_s, ImuConfig()
    records = parse_stream(_require(Path(src), "input stream").read_bytes(), fmt)
    lines = []
    for w in window_align(records, window_s):
        f = window_features(w, imu_cfg)
        lines.append(json.dumps({
            "start_unix_ts": w.start_unix_ts,
            "imu": None if f.imu is None else json.loads(f.imu.to_json()),
            "audio": None if f.audio is None else json.loads(f.audio.to_json()),
            "env": f.env.to_dict(),
        }))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dailylog", description="Sensor streams to activity logs and summaries.")
    p.add_argument("--version", action="version", version=f"dailylog {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="process a stream into log entries and a summary")
    r.add_argument("--config", required=True, help="run config (JSON or TOML)")
    r.add_argument("--seed", type=int, help="seed for the fallback mock model")
    r.add_argument("--workers", type=int, default=1, help="parallel feature-extraction workers")
    r.add_argument("--out", help="summary JSON path (overrides paths.summary_out)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("synth", help="generate one synthetic labeled day")
    s.add_argument("--config", help="synth config (JSON or TOML)")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--out", required=True, help="output JSONL of samples")
    s.add_argument("--stream", help="also write the day as a raw JSONL sensor stream")
    s.add_argument("--gazetteer", help="also write a gazetteer CSV of the synthetic places")
    s.add_argument("--centroids", help="also write a centroid model fitted on synthetic windows")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="classification metrics for predicted vs true labels")
    e.add_argument("--pred", required=True, help="predicted labels (one per line, or JSONL)")
    e.add_argument("--truth", required=True, help="true labels (one per line, or JSONL)")
    e.add_argument("--classes", help="comma-separated label vocabulary")
    e.add_argument("--out", help="write the JSON report here too")
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("summarize", help="summarize the trailing window of a log store")
    m.add_argument("--config", required=True, help="run config (JSON or TOML)")
    m.add_argument("--window-h", type=float, help="trailing window in hours")
    m.add_argument("--out", help="summary JSON path")
    m.add_argument("--text", action="store_true", help="also print the plain-text report")
    m.set_defaults(func=cmd_summarize)

    f = sub.add_parser("features", help="dump per-window feature vectors as JSONL")
    f.add_argument("--config", help="run config (JSON or TOML)")
    f.add_argument("--input", help="sensor stream, when no config is given")
    f.add_argument("--format", default="jsonl", choices=("jsonl", "csv"), help="stream format")
    f.add_argument("--window-s", type=float, default=120.0, help="window length in seconds")
    f.add_argument("--out", help="output JSONL path (default stdout)")
    f.set_defaults(func=cmd_features)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as err:
        return _fail(err)
    except ConfigError as exc:
        return _fail(CliError(2, "config", str(exc), field=exc.field))
    except (SchemaError, DecodeError, EmptyStream, EmptyWindow, InvalidInput) as exc:
        return _fail(CliError(2, type(exc).__name__, str(exc)))
    except DailyLogError as exc:
        return _fail(CliError(1, type(exc).__name__, str(exc)))


if __name__ == "__main__":
    sys.exit(main())
