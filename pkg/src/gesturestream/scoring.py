"""Score streams and their sources: file-backed loading and synthetic generation.

A scorer stands in for the neural models: given a window-end frame it returns
a probability vector. Streams are dense maps from frame index to vector, one
pair of streams (detector, classifier) per video, precomputed for every frame
so a stored corpus replays under any window geometry; the gate alone decides
which classifier entries are ever consulted.

File formats (one JSON object per line, UTF-8, unknown fields ignored):
  score file:      {"video": str, "t": int, "p": [float, ...]}
  annotation file: {"video": str, "class": int, "start": int, "end": int}
Spans are inclusive; detector vectors are [no_gesture, gesture].
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, ProbVector, ingest_probs

log = logging.getLogger(__name__)

# Frames reserved before the first gesture of every synthetic video, so the
# default 32-frame classifier warm-up completes inside background.
LEAD_IN_MIN = 32
# Probability mass spread uniformly over all classes during the preparation
# phase; the rest is split between the true and the confusable class.
PREP_LEAK = 0.1
# True-class mass during the nucleus phase (before noise).
NUCLEUS_PEAK = 0.9
MAX_DRAW_RETRIES = 100


class StreamFormatError(ValueError):
    """Malformed score or annotation file."""


class SynthesisError(ValueError):
    """Synthetic timing draws could not satisfy the layout constraints."""


@dataclass(frozen=True, slots=True)
class GroundTruthSegment:
    """An annotated gesture span, inclusive on both ends."""

    video_id: str
    label: int
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"{self.video_id}: segment start {self.start} > end {self.end}")
        if self.label < 0:
            raise ValueError(f"{self.video_id}: negative class label {self.label}")

    @property
    def duration(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True, slots=True)
class ScoreStream:
    """Probability vectors for one video, keyed by window-end frame index."""

    video_id: str
    arity: int
    entries: dict[int, ProbVector]
    length: int  # one past the largest frame index

    def score(self, t: int) -> ProbVector:
        try:
            return self.entries[t]
        except KeyError:
            raise ValueError(f"no score for {self.video_id}@{t}") from None


@dataclass(frozen=True, slots=True)
class Corpus:
    """Paired detector/classifier streams plus annotations, keyed by video."""

    detector: dict[str, ScoreStream]
    classifier: dict[str, ScoreStream]
    segments: dict[str, list[GroundTruthSegment]]

    def video_ids(self) -> list[str]:
        return sorted(self.detector)


@dataclass(frozen=True, slots=True)
class SynthConfig:
    """Knobs of the synthetic corpus generator.

    Gestures carry the usual three temporal phases: an ambiguous preparation
    (probability mass shared with a confusable class, controlled by
    prep_ambiguity), a discriminative nucleus, and a retraction decaying
    toward uniform. Detector confidence ramps linearly over edge_ramp frames
    at segment boundaries, mimicking a detection window sliding across them.
    """

    num_videos: int = 10
    gestures_per_video: int = 8
    num_classes: int = 83
    duration_mean: float = 38.4
    duration_spread: float = 6.0
    gap_mean: float = 48.0
    gap_spread: float = 12.0
    phase_fractions: tuple[float, float, float] = (0.25, 0.5, 0.25)
    detector_base: float = 0.9
    noise_sigma: float = 0.05
    prep_ambiguity: float = 0.5
    seed: int = 0
    edge_ramp: int = 8


def validate_synth_config(cfg: SynthConfig) -> SynthConfig:
    """Check every SynthConfig invariant; raises ConfigError naming each violation."""
    problems: list[str] = []
    if cfg.num_videos < 1:
        problems.append("num_videos must be >= 1")
    if cfg.gestures_per_video < 1:
        problems.append("gestures_per_video must be >= 1")
    if cfg.num_classes < 2:
        problems.append("num_classes must be >= 2")
    if not cfg.duration_mean > 0:
        problems.append("duration_mean must be > 0")
    if cfg.duration_spread < 0:
        problems.append("duration_spread must be >= 0")
    if cfg.gap_mean < 0:
        problems.append("gap_mean must be >= 0")
    if cfg.gap_spread < 0:
        problems.append("gap_spread must be >= 0")
    if len(cfg.phase_fractions) != 3 or any(f < 0 for f in cfg.phase_fractions):
        problems.append("phase_fractions must be three non-negative reals")
    elif abs(sum(cfg.phase_fractions) - 1.0) > 1e-9:
        problems.append("phase_fractions must sum to 1")
    if not (0.0 <= cfg.detector_base <= 1.0):
        problems.append("detector_base must be in [0, 1]")
    if cfg.noise_sigma < 0:
        problems.append("noise_sigma must be >= 0")
    if not (0.0 <= cfg.prep_ambiguity <= 1.0):
        problems.append("prep_ambiguity must be in [0, 1]")
    if cfg.seed < 0:
        problems.append("seed must be >= 0")
    if cfg.edge_ramp < 1:
        problems.append("edge_ramp must be >= 1")
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def _draw_at_least(rng, mean: float, spread: float, floor: int, what: str, video_id: str) -> int:
    """Round a gaussian draw to frames, retrying until it clears the floor."""
    for _ in range(MAX_DRAW_RETRIES):
        value = int(round(rng.normal(mean, spread)))
        if value >= floor:
            return value
    raise SynthesisError(
        f"{video_id}: no {what} draw >= {floor} frames after {MAX_DRAW_RETRIES} tries "
        f"(mean {mean}, spread {spread})"
    )


def _phase_lengths(duration: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Split a duration into preparation/nucleus/retraction frames, each >= 1."""
    prep = max(1, int(round(duration * fractions[0])))
    retract = max(1, int(round(duration * fractions[2])))
    nucleus = duration - prep - retract
    while nucleus < 1:
        if prep >= retract and prep > 1:
            prep -= 1
        elif retract > 1:
            retract -= 1
        else:
            raise SynthesisError(f"cannot fit three phases into {duration} frames")
        nucleus = duration - prep - retract
    return prep, nucleus, retract


def _layout_video(video_id: str, cfg: SynthConfig, rng):
    """Draw the gap/gesture layout of one video.

    Returns (segments, confusable labels, stream length). Gaps are floored
    so consecutive gestures keep the gate's activations separate, the lead-in
    covers classifier warm-up, and the tail leaves room for the final
    deactivation.
    """
    min_duration = max(3, cfg.edge_ramp)
    min_gap = 2 * cfg.edge_ramp
    tail_floor = 3 * cfg.edge_ramp

    segments: list[GroundTruthSegment] = []
    confusables: list[int] = []
    pos = _draw_at_least(rng, cfg.gap_mean, cfg.gap_spread, max(min_gap, LEAD_IN_MIN), "lead-in", video_id)
    for _ in range(cfg.gestures_per_video):
        duration = _draw_at_least(rng, cfg.duration_mean, cfg.duration_spread, min_duration, "duration", video_id)
        label = int(rng.integers(cfg.num_classes))
        confusable = int((label + 1 + rng.integers(cfg.num_classes - 1)) % cfg.num_classes)
        segments.append(GroundTruthSegment(video_id, label, pos, pos + duration - 1))
        confusables.append(confusable)
        gap = _draw_at_least(rng, cfg.gap_mean, cfg.gap_spread, min_gap, "gap", video_id)
        pos = segments[-1].end + 1 + gap
    tail = max(pos - segments[-1].end - 1, tail_floor)
    length = segments[-1].end + 1 + tail
    return segments, confusables, length


def _detector_signal(segments, length: int, cfg: SynthConfig) -> np.ndarray:
    """Gesture-class probability per frame: base inside segments, 1-base outside,
    linear ramps of edge_ramp frames at the boundaries."""
    base = cfg.detector_base
    low = 1.0 - base
    ramp = cfg.edge_ramp
    p = np.full(length, low)
    for seg in segments:
        for t in range(seg.start, min(seg.start + ramp, length)):
            p[t] = max(p[t], low + (base - low) * (t - seg.start + 1) / ramp)
        hi = min(seg.end, length - 1)
        if seg.start + ramp - 1 <= hi:
            p[seg.start + ramp - 1 : hi + 1] = base
        for t in range(seg.end + 1, min(seg.end + ramp + 1, length)):
            p[t] = max(p[t], base - (base - low) * (t - seg.end) / ramp)
    return p


def _classifier_signal(segments, confusables, length: int, cfg: SynthConfig) -> np.ndarray:
    """Class-probability row per frame following the three-phase gesture model."""
    count = cfg.num_classes
    rho = cfg.prep_ambiguity
    uniform = 1.0 / count
    rows = np.full((length, count), uniform)
    for seg, confusable in zip(segments, confusables):
        prep, nucleus, retract = _phase_lengths(seg.duration, cfg.phase_fractions)
        prep_vec = np.full(count, PREP_LEAK / count)
        prep_vec[seg.label] += (1.0 - PREP_LEAK) * (1.0 - rho)
        prep_vec[confusable] += (1.0 - PREP_LEAK) * rho
        nuc_vec = np.full(count, (1.0 - NUCLEUS_PEAK) / (count - 1))
        nuc_vec[seg.label] = NUCLEUS_PEAK
        rows[seg.start : seg.start + prep] = prep_vec
        rows[seg.start + prep : seg.start + prep + nucleus] = nuc_vec
        for i in range(retract):
            frac = (i + 1) / retract
            rows[seg.start + prep + nucleus + i] = (1.0 - frac) * nuc_vec + frac * uniform
    return rows


def _add_vector_noise(rows: np.ndarray, sigma: float, rng) -> np.ndarray:
    """Clamped gaussian noise followed by renormalization, per row."""
    noisy = np.clip(rows + rng.normal(0.0, sigma, rows.shape), 0.0, 1.0)
    sums = noisy.sum(axis=1)
    dead = sums <= 0.0
    if dead.any():
        noisy[dead] = 1.0 / rows.shape[1]
        sums[dead] = 1.0
    return noisy / sums[:, None]


def generate_synthetic(cfg: SynthConfig) -> Corpus:
    """Build a seeded corpus of detector/classifier streams plus annotations.

    Deterministic for a given config: video v<i> uses an RNG derived from
    seed XOR i, with layout draws consumed before noise draws.
    """
    validate_synth_config(cfg)
    detector: dict[str, ScoreStream] = {}
    classifier: dict[str, ScoreStream] = {}
    annotations: dict[str, list[GroundTruthSegment]] = {}
    for i in range(cfg.num_videos):
        video_id = f"v{i:03d}"
        rng = np.random.default_rng(cfg.seed ^ i)
        segments, confusables, length = _layout_video(video_id, cfg, rng)

        det = _detector_signal(segments, length, cfg)
        cls = _classifier_signal(segments, confusables, length, cfg)
        if cfg.noise_sigma > 0:
            det = np.clip(det + rng.normal(0.0, cfg.noise_sigma, length), 0.0, 1.0)
            cls = _add_vector_noise(cls, cfg.noise_sigma, rng)

        det_probs = det.tolist()
        det_entries = {t: ProbVector((1.0 - det_probs[t], det_probs[t])) for t in range(length)}
        cls_entries = {t: ProbVector(tuple(cls[t].tolist())) for t in range(length)}
        detector[video_id] = ScoreStream(video_id, 2, det_entries, length)
        classifier[video_id] = ScoreStream(video_id, cfg.num_classes, cls_entries, length)
        annotations[video_id] = segments
    return Corpus(detector=detector, classifier=classifier, segments=annotations)


def _require_field(record: dict, name: str, kinds, where: str):
    value = record.get(name)
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise StreamFormatError(f"{where}: missing or invalid field {name!r}")
    return value


def load_score_stream(path, expected_arity: int | None = None) -> dict[str, ScoreStream]:
    """Load one score file into per-video streams.

    Enforces a single arity across all entries (the expected one when given)
    and rejects duplicate (video, t) keys, reporting offending line numbers.
    """
    per_video: dict[str, dict[int, ProbVector]] = {}
    arity = expected_arity
    total = 0
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
            if not isinstance(record, dict):
                raise StreamFormatError(f"{where}: expected a JSON object")
            video = _require_field(record, "video", str, where)
            t = _require_field(record, "t", int, where)
            p = _require_field(record, "p", list, where)
            if t < 0:
                raise StreamFormatError(f"{where}: negative frame index {t}")
            if arity is None:
                arity = len(p)
            if len(p) != arity:
                raise StreamFormatError(f"{where}: expected {arity} probabilities, got {len(p)}")
            try:
                vec = ingest_probs(p)
            except (TypeError, ValueError) as exc:
                raise StreamFormatError(f"{where}: {exc}") from None
            bucket = per_video.setdefault(video, {})
            if t in bucket:
                raise StreamFormatError(f"{where}: duplicate entry for {video}@{t}")
            bucket[t] = vec
            total += 1
    if not per_video:
        raise StreamFormatError(f"{path}: no score records")
    streams = {
        video: ScoreStream(video, arity, entries, max(entries) + 1)
        for video, entries in per_video.items()
    }
    log.info("loaded %d score entries for %d videos from %s", total, len(streams), path)
    return streams


def load_annotations(path, num_classes: int | None = None) -> dict[str, list[GroundTruthSegment]]:
    """Load ground-truth segments, sorted by start and checked for overlap."""
    per_video: dict[str, list[GroundTruthSegment]] = {}
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
            if not isinstance(record, dict):
                raise StreamFormatError(f"{where}: expected a JSON object")
            video = _require_field(record, "video", str, where)
            label = _require_field(record, "class", int, where)
            start = _require_field(record, "start", int, where)
            end = _require_field(record, "end", int, where)
            if num_classes is not None and not (0 <= label < num_classes):
                raise StreamFormatError(f"{where}: class {label} outside [0, {num_classes})")
            try:
                segment = GroundTruthSegment(video, label, start, end)
            except ValueError as exc:
                raise StreamFormatError(f"{where}: {exc}") from None
            per_video.setdefault(video, []).append(segment)
    for video, segments in per_video.items():
        segments.sort(key=lambda s: s.start)
        for prev, cur in zip(segments, segments[1:]):
            if cur.start <= prev.end:
                raise StreamFormatError(
                    f"{path}: overlapping segments in {video}: "
                    f"[{prev.start}, {prev.end}] and [{cur.start}, {cur.end}]"
                )
    return per_video


def load_corpus(detector_path, classifier_path, annotation_path) -> Corpus:
    """Assemble a corpus from its three files; detector arity is fixed at 2."""
    detector = load_score_stream(detector_path, expected_arity=2)
    classifier = load_score_stream(classifier_path)
    segments = load_annotations(annotation_path)
    return Corpus(detector=detector, classifier=classifier, segments=segments)


def write_score_file(path, streams: dict[str, ScoreStream]) -> int:
    """Write streams as line-delimited records, sorted by video then frame."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for video in sorted(streams):
            stream = streams[video]
            for t in sorted(stream.entries):
                record = {"video": video, "t": t, "p": list(stream.entries[t].values)}
                fh.write(json.dumps(record) + "\n")
                count += 1
    return count


def write_annotation_file(path, segments: dict[str, list[GroundTruthSegment]]) -> int:
    """Write annotations as line-delimited records, sorted by video then start."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for video in sorted(segments):
            for seg in sorted(segments[video], key=lambda s: s.start):
                record = {"video": video, "class": seg.label, "start": seg.start, "end": seg.end}
                fh.write(json.dumps(record) + "\n")
                count += 1
    return count
