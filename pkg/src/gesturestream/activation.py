"""Single-time activation: sigmoid-weighted score averaging with one event per gesture.

While the gate is open, classifier scores are folded into a running weighted
mean whose weights follow a sigmoid over the active-iteration index. The
weights sit below 0.5 before the midpoint and above it after, which discounts
the ambiguous opening phase of a gesture. An early event fires as soon as the
top-2 margin of the mean reaches tau_early; otherwise a late event fires at
gate deactivation when the maximum clears tau_late. Each active period emits
at most one event.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .core import PipelineConfig, ProbVector, WeightedMean, top2
from .gate import GateDecision
from .windows import WindowPair


class EventKind(str, enum.Enum):
    EARLY = "early"
    LATE = "late"


@dataclass(frozen=True, slots=True)
class ActivationEvent:
    """A single-time recognition: one label emitted at one window end.

    margin_or_score holds the top-2 margin for early events and the maximum
    of the weighted mean for late events.
    """

    label: int
    emit_frame: int
    kind: EventKind
    margin_or_score: float


@dataclass(frozen=True, slots=True)
class ActivationState:
    """Classifier-side accumulator threaded through activation_step."""

    mean: WeightedMean
    early_fired: bool = False
    active: bool = False

    @classmethod
    def inactive(cls, arity: int) -> ActivationState:
        return cls(mean=WeightedMean.zeros(arity), early_fired=False, active=False)


def midpoint(mean_duration: float, stride: int) -> int:
    """Sigmoid midpoint in active iterations: floor(mean_duration / (4 * stride)).

    Anchors the weight function so iterations past roughly the first quarter
    of an average gesture carry weight >= 0.5.
    """
    if mean_duration <= 0:
        raise ValueError("mean_duration must be > 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return math.floor(mean_duration / (4.0 * stride))


def sigmoid_weight(j: int, t: int, slope: float) -> float:
    """Weight for the j-th active iteration: 1 / (1 + exp(-slope * (j - t)))."""
    return 1.0 / (1.0 + math.exp(-slope * (j - t)))


def effective_midpoint(cfg: PipelineConfig) -> int:
    """The configured midpoint override, or the one derived from mean_duration."""
    if cfg.sigmoid_midpoint is not None:
        return cfg.sigmoid_midpoint
    return midpoint(cfg.mean_duration, cfg.stride)


def update_mean(state: ActivationState, probs: ProbVector, weight: float) -> ActivationState:
    """Fold one weighted classifier score into the running mean.

    With j the new update count, the mean becomes
    (previous_mean * (j - 1) + weight * probs) / j elementwise, which keeps
    it equal to the batch average of all weighted scores so far.
    """
    old = state.mean.values
    if len(old) != len(probs.values):
        raise ValueError(f"arity mismatch: mean has {len(old)} classes, scores have {len(probs.values)}")
    j = state.mean.count + 1
    prev = j - 1
    vals = probs.values
    new_values = tuple((old[i] * prev + weight * vals[i]) / j for i in range(len(old)))
    return ActivationState(
        mean=WeightedMean(values=new_values, count=j),
        early_fired=state.early_fired,
        active=state.active,
    )


def try_early(
    state: ActivationState, tau_early: float, emit_frame: int
) -> tuple[ActivationState, Optional[ActivationEvent]]:
    """Emit an early event if the top-2 margin of the mean reaches tau_early.

    Fires at most once per active period; afterwards the state keeps
    accumulating but emits nothing further.
    """
    if state.early_fired:
        return state, None
    label, max1, max2 = top2(state.mean)
    margin = max1 - max2
    if margin >= tau_early:
        event = ActivationEvent(
            label=label, emit_frame=emit_frame, kind=EventKind.EARLY, margin_or_score=margin
        )
        return ActivationState(mean=state.mean, early_fired=True, active=state.active), event
    return state, None


def finalize_late(
    state: ActivationState, tau_late: float, emit_frame: int
) -> tuple[ActivationState, Optional[ActivationEvent]]:
    """Close an active period at gate deactivation.

    Emits a late event when no early event fired and the mean's maximum
    clears tau_late (anything lower is dismissed as noise). Always resets
    the accumulator to inactive.
    """
    event: Optional[ActivationEvent] = None
    if not state.early_fired:
        label, max1, _ = top2(state.mean)
        if max1 >= tau_late:
            event = ActivationEvent(
                label=label, emit_frame=emit_frame, kind=EventKind.LATE, margin_or_score=max1
            )
    return ActivationState.inactive(len(state.mean.values)), event


def activation_step(
    state: ActivationState,
    decision: GateDecision,
    classifier,
    window: WindowPair,
    cfg: PipelineConfig,
) -> tuple[ActivationState, Optional[ActivationEvent]]:
    """Advance the activation machine by one window given the gate's decision.

    The classifier scorer is consulted only on Activate/StayActive windows;
    while the gate is idle it is never touched. Activate restarts the
    iteration index at 1, so gestures separated by an idle period are
    independent activations.
    """
    if decision is GateDecision.STAY_IDLE:
        return state, None
    if decision is GateDecision.DEACTIVATE:
        if not state.active:
            raise RuntimeError("deactivate without a preceding active period")
        return finalize_late(state, cfg.tau_late, window.end)
    if decision is GateDecision.ACTIVATE:
        state = ActivationState(mean=WeightedMean.zeros(cfg.num_classes), early_fired=False, active=True)
    elif not state.active:
        raise RuntimeError("stay-active decision while the activation state is inactive")
    probs = classifier.score(window.end)
    t_mid = effective_midpoint(cfg)
    weight = sigmoid_weight(state.mean.count + 1, t_mid, cfg.sigmoid_slope)
    state = update_mean(state, probs, weight)
    return try_early(state, cfg.tau_early, window.end)
