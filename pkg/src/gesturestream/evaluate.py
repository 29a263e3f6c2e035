"""Sequence-level scoring of emitted events against ground truth.

Per video, the predicted label sequence (events ordered by emission frame) is
compared to the annotated one with Levenshtein distance, which charges
misclassifications, duplicate detections, and misses alike. Accuracy is
(1 - distance/len(gt)) * 100, deliberately unclamped so floods of spurious
events show up as negative scores rather than zeros.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .activation import ActivationEvent
from .core import PipelineConfig
from .scoring import Corpus, GroundTruthSegment


def levenshtein_distance(a: Sequence, b: Sequence) -> int:
    """Edit distance with unit insert/delete/substitute costs.

    Dynamic programming over two rolling rows, O(len(a)*len(b)) time and
    O(min(len)) memory.
    """
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, xa in enumerate(a, 1):
        cur = [i]
        for j, xb in enumerate(b, 1):
            cost = 0 if xa == xb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def levenshtein_accuracy(gt: Sequence, pred: Sequence) -> float:
    """Percent closeness of pred to gt: (1 - distance/len(gt)) * 100.

    Not clamped at zero; heavily over-predicting goes negative. Empty ground
    truth is rejected here and excluded from aggregation by callers.
    """
    if len(gt) < 1:
        raise ValueError("levenshtein accuracy needs at least one ground-truth label")
    return (1.0 - levenshtein_distance(gt, pred) / len(gt)) * 100.0


@dataclass(frozen=True, slots=True)
class Match:
    """One event attributed to a segment; correct when the labels agree."""

    event: ActivationEvent
    segment: GroundTruthSegment
    correct: bool

    @property
    def early_frames(self) -> int:
        """Frames before segment end the event fired (negative = after)."""
        return self.segment.end - self.event.emit_frame


@dataclass(frozen=True, slots=True)
class MatchReport:
    """Outcome of attributing a video's events to its segments."""

    matches: tuple[Match, ...]
    duplicates: tuple[ActivationEvent, ...]
    unmatched_events: tuple[ActivationEvent, ...]
    missed_segments: tuple[GroundTruthSegment, ...]

    @property
    def correct_matches(self) -> tuple[Match, ...]:
        return tuple(m for m in self.matches if m.correct)


def match_activations(
    events: Sequence[ActivationEvent],
    segments: Sequence[GroundTruthSegment],
    grace: int,
) -> MatchReport:
    """Attribute events to segments within [start, end + grace].

    The grace window admits late detections that legitimately land after a
    gesture ends. Where extended spans overlap, the latest-starting one wins.
    A segment consumes only its first attributed event; later ones are
    flagged as duplicates.
    """
    ordered = sorted(events, key=lambda e: e.emit_frame)
    claimed: set[int] = set()
    matches: list[Match] = []
    duplicates: list[ActivationEvent] = []
    unmatched: list[ActivationEvent] = []
    for event in ordered:
        candidate = None
        candidate_idx = -1
        for idx, seg in enumerate(segments):
            if seg.start <= event.emit_frame <= seg.end + grace:
                if candidate is None or seg.start > candidate.start:
                    candidate, candidate_idx = seg, idx
        if candidate is None:
            unmatched.append(event)
        elif candidate_idx in claimed:
            duplicates.append(event)
        else:
            claimed.add(candidate_idx)
            matches.append(Match(event, candidate, correct=event.label == candidate.label))
    missed = tuple(seg for idx, seg in enumerate(segments) if idx not in claimed)
    return MatchReport(
        matches=tuple(matches),
        duplicates=tuple(duplicates),
        unmatched_events=tuple(unmatched),
        missed_segments=missed,
    )


@dataclass(frozen=True, slots=True)
class EarlyStats:
    """Early-detection frames over correct matches only."""

    mean: float
    median: float
    count: int


def early_detection_stats(matches: Sequence[Match]) -> Optional[EarlyStats]:
    """Mean/median frames-before-segment-end over correct matches.

    Returns None (stats absent, not zero) when nothing was correctly matched.
    """
    frames = [m.early_frames for m in matches if m.correct]
    if not frames:
        return None
    return EarlyStats(
        mean=statistics.fmean(frames), median=float(statistics.median(frames)), count=len(frames)
    )


@dataclass(frozen=True, slots=True)
class VideoResult:
    """Sequence comparison for one video; accuracy is None for empty gt."""

    video_id: str
    gt_labels: tuple[int, ...]
    pred_labels: tuple[int, ...]
    distance: int
    accuracy: Optional[float]


def evaluate_video(
    video_id: str,
    events: Sequence[ActivationEvent],
    segments: Sequence[GroundTruthSegment],
    grace: int,
) -> tuple[VideoResult, MatchReport]:
    """Score one video's events: Levenshtein result plus the match report."""
    ordered_segments = sorted(segments, key=lambda s: s.start)
    gt = tuple(seg.label for seg in ordered_segments)
    pred = tuple(e.label for e in sorted(events, key=lambda e: e.emit_frame))
    distance = levenshtein_distance(gt, pred)
    accuracy = (1.0 - distance / len(gt)) * 100.0 if gt else None
    report = match_activations(events, ordered_segments, grace)
    return VideoResult(video_id, gt, pred, distance, accuracy), report


@dataclass(frozen=True, slots=True)
class SweepRow:
    """Aggregate outcome of one full corpus run at a fixed tau_early."""

    tau_early: float
    mean_levenshtein_accuracy: Optional[float]
    mean_early_frames: Optional[float]
    median_early_frames: Optional[float]
    matched_count: int
    duplicate_count: int
    missed_count: int


def sweep(corpus: Corpus, cfg: PipelineConfig, taus: Sequence[float]) -> list[SweepRow]:
    """Run the full pipeline once per early threshold, all else fixed.

    Rows come back in the given tau order; runs are independent and
    deterministic, so the table reproduces bit-for-bit on a fixed corpus.
    """
    from .pipeline import run_corpus  # local import to avoid a module cycle

    if len(set(taus)) != len(taus):
        raise ValueError("sweep thresholds must be distinct")
    rows: list[SweepRow] = []
    for tau in taus:
        run = run_corpus(corpus, replace(cfg, tau_early=tau))
        agg = run.aggregate
        rows.append(
            SweepRow(
                tau_early=tau,
                mean_levenshtein_accuracy=agg.mean_accuracy,
                mean_early_frames=agg.early.mean if agg.early else None,
                median_early_frames=agg.early.median if agg.early else None,
                matched_count=agg.matched,
                duplicate_count=agg.duplicates,
                missed_count=agg.missed_segments,
            )
        )
    return rows
