"""Command-line harness: generate corpora, run the pipeline, evaluate, sweep.

Every command is a pure function of its input files, flags, and seed, and all
output files are written atomically (write-then-rename), so repeated
invocations produce byte-identical artifacts. Reports are machine-readable
JSON/CSV; a short human summary goes to stderr.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from .activation import ActivationEvent, EventKind
from .core import Alignment, ConfigError, FilterKind, PipelineConfig, validate_config
from .evaluate import EarlyStats, SweepRow, early_detection_stats, evaluate_video, sweep
from .pipeline import CorpusRun, run_corpus
from .scoring import (
    Corpus,
    StreamFormatError,
    SynthConfig,
    generate_synthetic,
    load_annotations,
    load_corpus,
    validate_synth_config,
    write_annotation_file,
    write_score_file,
)

DETECTOR_FILE = "detector_scores.jsonl"
CLASSIFIER_FILE = "classifier_scores.jsonl"
ANNOTATION_FILE = "annotations.jsonl"
MANIFEST_FILE = "manifest.json"
EVENTS_FILE = "events.jsonl"
REPORT_FILE = "report.json"
SWEEP_FILE = "sweep.csv"

DEFAULT_TAUS = tuple(i / 10 for i in range(2, 11))  # 0.2 .. 1.0 in 0.1 steps
DEFAULT_GRACE = 32

_PIPELINE_COERCERS = {
    "num_classes": int,
    "detector_window": int,
    "classifier_window": int,
    "stride": int,
    "filter_kind": FilterKind,
    "filter_size": int,
    "gate_on_threshold": float,
    "deactivate_count": int,
    "tau_early": float,
    "tau_late": float,
    "mean_duration": float,
    "sigmoid_slope": float,
    "sigmoid_midpoint": int,
    "alignment": Alignment,
}


def _parse_fractions(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


_SYNTH_COERCERS = {
    "num_videos": int,
    "gestures_per_video": int,
    "num_classes": int,
    "duration_mean": float,
    "duration_spread": float,
    "gap_mean": float,
    "gap_spread": float,
    "phase_fractions": _parse_fractions,
    "detector_base": float,
    "noise_sigma": float,
    "prep_ambiguity": float,
    "seed": int,
    "edge_ramp": int,
}


def parse_flat_config(path) -> dict[str, str]:
    """Read a flat `key = value` config file; # starts a comment."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _coerced_overrides(args, coercers, config_path) -> dict:
    """Merge config-file values and CLI flags (flags win) into typed overrides."""
    overrides: dict = {}
    if config_path:
        for key, text in parse_flat_config(config_path).items():
            if key not in coercers:
                raise ConfigError(f"{config_path}: unknown config key {key!r}")
            try:
                overrides[key] = coercers[key](text)
            except (TypeError, ValueError):
                raise ConfigError(f"{config_path}: bad value for {key}: {text!r}") from None
    for key in coercers:
        flag = getattr(args, key, None)
        if flag is not None:
            overrides[key] = flag
    return overrides


def _build_synth_config(args) -> SynthConfig:
    overrides = _coerced_overrides(args, _SYNTH_COERCERS, args.config)
    return validate_synth_config(SynthConfig(**overrides))


def _build_pipeline_config(args, inferred_classes: int) -> PipelineConfig:
    overrides = _coerced_overrides(args, _PIPELINE_COERCERS, args.config)
    declared = overrides.pop("num_classes", None)
    if declared is not None and declared != inferred_classes:
        raise ConfigError(
            f"num_classes {declared} does not match classifier stream arity {inferred_classes}"
        )
    return validate_config(PipelineConfig(num_classes=inferred_classes, **overrides))


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_write_with(path: Path, writer):
    """Run a path-taking writer against a temp file, then rename into place."""
    tmp = path.with_name(path.name + ".tmp")
    result = writer(tmp)
    os.replace(tmp, path)
    return result


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def write_events_file(path, run: CorpusRun) -> int:
    """Persist emitted events as line-delimited video/class/frame/kind/score records."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for video_id in sorted(run.videos):
            for event in run.videos[video_id].trace.events:
                record = {
                    "video": video_id,
                    "class": event.label,
                    "frame": event.emit_frame,
                    "kind": event.kind.value,
                    "score": event.margin_or_score,
                }
                fh.write(json.dumps(record) + "\n")
                count += 1
    return count


def load_events_file(path) -> dict[str, list[ActivationEvent]]:
    """Load an events file back into per-video event lists."""
    per_video: dict[str, list[ActivationEvent]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StreamFormatError(f"{where}: invalid JSON ({exc.msg})") from None
            try:
                event = ActivationEvent(
                    label=int(record["class"]),
                    emit_frame=int(record["frame"]),
                    kind=EventKind(record["kind"]),
                    margin_or_score=float(record["score"]),
                )
                video = record["video"]
            except (KeyError, TypeError, ValueError) as exc:
                raise StreamFormatError(f"{where}: bad event record ({exc})") from None
            if not isinstance(video, str):
                raise StreamFormatError(f"{where}: missing or invalid field 'video'")
            per_video.setdefault(video, []).append(event)
    return per_video


def _early_dict(early: Optional[EarlyStats]):
    if early is None:
        return None
    return {"mean": early.mean, "median": early.median, "count": early.count}


def _config_dict(cfg: PipelineConfig) -> dict:
    out = asdict(cfg)
    out["filter_kind"] = cfg.filter_kind.value
    out["alignment"] = cfg.alignment.value
    return out


def build_run_report(run: CorpusRun, cfg: PipelineConfig) -> dict:
    """Serialize a corpus run into the stable report layout."""
    videos = []
    for video_id in sorted(run.videos):
        vr = run.videos[video_id]
        events = vr.trace.events
        videos.append(
            {
                "video": video_id,
                "gt": list(vr.result.gt_labels),
                "pred": list(vr.result.pred_labels),
                "distance": vr.result.distance,
                "accuracy": vr.result.accuracy,
                "events": {
                    "early": sum(1 for e in events if e.kind is EventKind.EARLY),
                    "late": sum(1 for e in events if e.kind is EventKind.LATE),
                },
                "matched": len(vr.matches.matches),
                "correct": len(vr.matches.correct_matches),
                "duplicates": len(vr.matches.duplicates),
                "unmatched_events": len(vr.matches.unmatched_events),
                "missed_segments": len(vr.matches.missed_segments),
                "early_frames": _early_dict(vr.early),
            }
        )
    agg = run.aggregate
    return {
        "config": _config_dict(cfg),
        "grace": agg.grace,
        "aggregate": {
            "videos": agg.video_count,
            "mean_levenshtein_accuracy": agg.mean_accuracy,
            "events": {"early": agg.events_early, "late": agg.events_late},
            "matched": agg.matched,
            "duplicates": agg.duplicates,
            "unmatched_events": agg.unmatched_events,
            "missed_segments": agg.missed_segments,
            "early_frames": _early_dict(agg.early),
            "windows_processed": agg.windows_processed,
            "classifier_invocations": agg.classifier_invocations,
        },
        "negative_accuracy_videos": [
            v["video"] for v in videos if v["accuracy"] is not None and v["accuracy"] < 0
        ],
        "skipped_missing_annotations": list(run.skipped),
        "videos": videos,
    }


def build_eval_report(events_by_video, segments_by_video, grace: int) -> dict:
    """Re-score stored events against annotations, without rerunning the pipeline."""
    known = sorted(segments_by_video)
    unknown = sorted(set(events_by_video) - set(segments_by_video))
    videos = []
    accuracies = []
    pooled_early = []
    totals = {"matched": 0, "duplicates": 0, "unmatched_events": 0, "missed_segments": 0}
    kind_counts = {"early": 0, "late": 0}
    for video_id in known:
        events = events_by_video.get(video_id, [])
        result, report = evaluate_video(video_id, events, segments_by_video[video_id], grace)
        if result.accuracy is not None:
            accuracies.append(result.accuracy)
        early = early_detection_stats(report.matches)
        pooled_early.extend(m.early_frames for m in report.matches if m.correct)
        totals["matched"] += len(report.matches)
        totals["duplicates"] += len(report.duplicates)
        totals["unmatched_events"] += len(report.unmatched_events)
        totals["missed_segments"] += len(report.missed_segments)
        for event in events:
            kind_counts[event.kind.value] += 1
        videos.append(
            {
                "video": video_id,
                "gt": list(result.gt_labels),
                "pred": list(result.pred_labels),
                "distance": result.distance,
                "accuracy": result.accuracy,
                "events": {
                    "early": sum(1 for e in events if e.kind is EventKind.EARLY),
                    "late": sum(1 for e in events if e.kind is EventKind.LATE),
                },
                "matched": len(report.matches),
                "correct": len(report.correct_matches),
                "duplicates": len(report.duplicates),
                "unmatched_events": len(report.unmatched_events),
                "missed_segments": len(report.missed_segments),
                "early_frames": _early_dict(early),
            }
        )
    early_agg = None
    if pooled_early:
        early_agg = {
            "mean": statistics.fmean(pooled_early),
            "median": float(statistics.median(pooled_early)),
            "count": len(pooled_early),
        }
    return {
        "grace": grace,
        "aggregate": {
            "videos": len(known),
            "mean_levenshtein_accuracy": sum(accuracies) / len(accuracies) if accuracies else None,
            "events": kind_counts,
            "matched": totals["matched"],
            "duplicates": totals["duplicates"],
            "unmatched_events": totals["unmatched_events"],
            "missed_segments": totals["missed_segments"],
            "early_frames": early_agg,
        },
        "negative_accuracy_videos": [
            v["video"] for v in videos if v["accuracy"] is not None and v["accuracy"] < 0
        ],
        "unknown_videos": unknown,
        "videos": videos,
    }


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _write_trace_files(out_dir: Path, run: CorpusRun) -> None:
    trace_dir = out_dir / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    header = "t\traw_prob\tfiltered_prob\tmode\tj\tweight\ttop_label\ttop1\ttop2\n"
    for video_id in sorted(run.videos):
        rows = run.videos[video_id].trace.rows
        lines = [header]
        for r in rows:
            lines.append(
                f"{r.t}\t{r.raw_prob!r}\t{r.filtered_prob!r}\t{r.mode}\t{r.j}\t"
                f"{r.weight!r}\t{r.top_label}\t{r.top1!r}\t{r.top2!r}\n"
            )
        _atomic_write_text(trace_dir / f"{video_id}.tsv", "".join(lines))


def _format_sweep_csv(rows: Sequence[SweepRow]) -> str:
    def num(x) -> str:
        return "" if x is None else f"{x:.6f}"

    lines = ["tau_early,levenshtein_accuracy,mean_early_frames,median_early_frames,matched,duplicates,misses\n"]
    for row in rows:
        lines.append(
            f"{row.tau_early:g},{num(row.mean_levenshtein_accuracy)},{num(row.mean_early_frames)},"
            f"{num(row.median_early_frames)},{row.matched_count},{row.duplicate_count},{row.missed_count}\n"
        )
    return "".join(lines)


def _load_data_dir(data: str) -> Corpus:
    base = Path(data)
    return load_corpus(base / DETECTOR_FILE, base / CLASSIFIER_FILE, base / ANNOTATION_FILE)


def _classifier_arity(corpus: Corpus) -> int:
    first = next(iter(sorted(corpus.classifier)))
    return corpus.classifier[first].arity


def cmd_gen(args) -> int:
    cfg = _build_synth_config(args)
    corpus = generate_synthetic(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counts = {
        "detector": _atomic_write_with(out / DETECTOR_FILE, lambda p: write_score_file(p, corpus.detector)),
        "classifier": _atomic_write_with(out / CLASSIFIER_FILE, lambda p: write_score_file(p, corpus.classifier)),
        "annotations": _atomic_write_with(out / ANNOTATION_FILE, lambda p: write_annotation_file(p, corpus.segments)),
    }
    synth = asdict(cfg)
    synth["phase_fractions"] = list(cfg.phase_fractions)
    manifest = {
        "format": "gesturestream-corpus/1",
        "synth_config": synth,
        "files": {
            "detector": DETECTOR_FILE,
            "classifier": CLASSIFIER_FILE,
            "annotations": ANNOTATION_FILE,
        },
        "videos": corpus.video_ids(),
        "entry_counts": counts,
    }
    _atomic_write_text(out / MANIFEST_FILE, _dump_json(manifest))
    _say(
        f"gen: {cfg.num_videos} videos x {cfg.gestures_per_video} gestures "
        f"(C={cfg.num_classes}, seed={cfg.seed}) -> {out}"
    )
    return 0


def cmd_run(args) -> int:
    corpus = _load_data_dir(args.data)
    cfg = _build_pipeline_config(args, _classifier_arity(corpus))
    run = run_corpus(corpus, cfg, grace=args.grace, collect_trace=args.trace)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_with(out / EVENTS_FILE, lambda p: write_events_file(p, run))
    report = build_run_report(run, cfg)
    _atomic_write_text(out / REPORT_FILE, _dump_json(report))
    if args.trace:
        _write_trace_files(out, run)
    agg = run.aggregate
    acc = "n/a" if agg.mean_accuracy is None else f"{agg.mean_accuracy:.2f}%"
    _say(
        f"run: {agg.video_count} videos, accuracy {acc}, "
        f"events {agg.events_early} early / {agg.events_late} late, "
        f"classifier active {agg.classifier_invocations}/{agg.windows_processed} windows -> {out}"
    )
    return 0


def cmd_eval(args) -> int:
    events = load_events_file(args.events)
    segments = load_annotations(args.annotations)
    report = build_eval_report(events, segments, args.grace)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / REPORT_FILE, _dump_json(report))
    agg = report["aggregate"]
    acc = "n/a" if agg["mean_levenshtein_accuracy"] is None else f"{agg['mean_levenshtein_accuracy']:.2f}%"
    _say(f"eval: {agg['videos']} videos, accuracy {acc} -> {out / REPORT_FILE}")
    if report["unknown_videos"]:
        _say(f"eval: events reference unannotated videos: {', '.join(report['unknown_videos'])}")
    return 0


def cmd_sweep(args) -> int:
    corpus = _load_data_dir(args.data)
    cfg = _build_pipeline_config(args, _classifier_arity(corpus))
    taus = list(args.taus) if args.taus else list(DEFAULT_TAUS)
    rows = sweep(corpus, cfg, taus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / SWEEP_FILE, _format_sweep_csv(rows))
    first, last = rows[0], rows[-1]

    def brief(row: SweepRow) -> str:
        acc = "n/a" if row.mean_levenshtein_accuracy is None else f"{row.mean_levenshtein_accuracy:.2f}%"
        early = "n/a" if row.mean_early_frames is None else f"{row.mean_early_frames:.1f}"
        return f"tau={row.tau_early:g}: accuracy {acc}, mean early {early} frames"

    _say(f"sweep: {len(rows)} thresholds -> {out / SWEEP_FILE}")
    _say(f"sweep: {brief(first)}  |  {brief(last)}")
    _say("sweep: higher thresholds trade earliness for accuracy")
    return 0


def _add_config_flag(parser) -> None:
    parser.add_argument("--config", help="flat key = value config file; flags take precedence")


def _add_pipeline_flags(parser) -> None:
    parser.add_argument("--num-classes", dest="num_classes", type=int)
    parser.add_argument("--detector-window", dest="detector_window", type=int)
    parser.add_argument("--classifier-window", dest="classifier_window", type=int)
    parser.add_argument("--stride", dest="stride", type=int)
    parser.add_argument(
        "--filter-kind", dest="filter_kind", type=FilterKind, choices=list(FilterKind)
    )
    parser.add_argument("--filter-size", dest="filter_size", type=int)
    parser.add_argument("--gate-on-threshold", dest="gate_on_threshold", type=float)
    parser.add_argument("--deactivate-count", dest="deactivate_count", type=int)
    parser.add_argument("--tau-early", dest="tau_early", type=float)
    parser.add_argument("--tau-late", dest="tau_late", type=float)
    parser.add_argument("--mean-duration", dest="mean_duration", type=float)
    parser.add_argument("--sigmoid-slope", dest="sigmoid_slope", type=float)
    parser.add_argument("--sigmoid-midpoint", dest="sigmoid_midpoint", type=int)
    parser.add_argument(
        "--alignment", dest="alignment", type=Alignment, choices=list(Alignment)
    )
    parser.add_argument("--grace", type=int, default=None, help="event matching grace (frames)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gesturestream",
        description="Streaming two-stage gesture recognition over probability-score streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a seeded synthetic corpus")
    gen.add_argument("--out", required=True, help="output directory")
    _add_config_flag(gen)
    gen.add_argument("--seed", dest="seed", type=int)
    gen.add_argument("--videos", "--num-videos", dest="num_videos", type=int)
    gen.add_argument("--gestures-per-video", dest="gestures_per_video", type=int)
    gen.add_argument("--num-classes", dest="num_classes", type=int)
    gen.add_argument("--duration-mean", dest="duration_mean", type=float)
    gen.add_argument("--duration-spread", dest="duration_spread", type=float)
    gen.add_argument("--gap-mean", dest="gap_mean", type=float)
    gen.add_argument("--gap-spread", dest="gap_spread", type=float)
    gen.add_argument(
        "--phase-fractions", dest="phase_fractions", type=_parse_fractions,
        help="prep,nucleus,retract fractions summing to 1",
    )
    gen.add_argument("--detector-base", dest="detector_base", type=float)
    gen.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    gen.add_argument("--prep-ambiguity", dest="prep_ambiguity", type=float)
    gen.add_argument("--edge-ramp", dest="edge_ramp", type=int)
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run the pipeline over a corpus and evaluate")
    run.add_argument("--data", required=True, help="directory holding a generated/loaded corpus")
    run.add_argument("--out", required=True)
    _add_config_flag(run)
    _add_pipeline_flags(run)
    run.add_argument("--trace", action="store_true", help="also write per-video trace files")
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="re-score a stored events file against annotations")
    ev.add_argument("--events", required=True)
    ev.add_argument("--annotations", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--grace", type=int, default=DEFAULT_GRACE)
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="run once per early threshold and tabulate the tradeoff")
    sw.add_argument("--data", required=True)
    sw.add_argument("--out", required=True)
    _add_config_flag(sw)
    _add_pipeline_flags(sw)
    sw.add_argument("--taus", nargs="+", type=float, help="early thresholds to sweep")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap to validation
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ConfigError, StreamFormatError) as exc:
        _say(f"error: {exc}")
        return 1
    except ValueError as exc:
        _say(f"error: {exc}")
        return 1
    except OSError as exc:
        _say(f"i/o error: {exc}")
        return 2
    except Exception as exc:  # internal invariant violation
        _say(f"internal error: {exc!r}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
