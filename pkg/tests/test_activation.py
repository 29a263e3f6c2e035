import math
import random

import pytest

from gesturestream.activation import (
    ActivationState,
    EventKind,
    activation_step,
    effective_midpoint,
    finalize_late,
    midpoint,
    sigmoid_weight,
    try_early,
    update_mean,
)
from gesturestream.core import PipelineConfig, ProbVector, WeightedMean, normalize
from gesturestream.gate import GateDecision
from gesturestream.windows import window_bounds


class TestMidpoint:
    def test_default_duration_stride_one(self):
        assert midpoint(38.4, 1) == 9

    def test_exact_division(self):
        assert midpoint(40, 1) == 10

    def test_stride_two(self):
        assert midpoint(38.4, 2) == 4

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            midpoint(0, 1)
        with pytest.raises(ValueError):
            midpoint(38.4, 0)

    def test_config_override(self):
        assert effective_midpoint(PipelineConfig(num_classes=5)) == 9
        assert effective_midpoint(PipelineConfig(num_classes=5, sigmoid_midpoint=3)) == 3


class TestSigmoidWeight:
    def test_half_at_midpoint(self):
        assert sigmoid_weight(9, 9, 0.2) == 0.5

    def test_first_iteration(self):
        expected = 1.0 / (1.0 + math.exp(1.6))
        assert sigmoid_weight(1, 9, 0.2) == pytest.approx(expected, abs=1e-12)
        assert sigmoid_weight(1, 9, 0.2) == pytest.approx(0.1680, abs=1e-4)

    def test_late_iteration(self):
        assert sigmoid_weight(32, 9, 0.2) == pytest.approx(0.9900, abs=1e-4)

    def test_strictly_increasing_and_bounded(self):
        prev = 0.0
        for j in range(1, 100):
            w = sigmoid_weight(j, 9, 0.2)
            assert 0.0 < w < 1.0
            assert w > prev
            prev = w
        # far past the midpoint doubles saturate toward 1.0; still non-decreasing
        for j in range(100, 400):
            w = sigmoid_weight(j, 9, 0.2)
            assert prev <= w <= 1.0
            prev = w

    def test_half_threshold_matches_midpoint(self):
        for t in (1, 5, 9, 40):
            for j in range(1, 201):
                assert (sigmoid_weight(j, t, 0.2) >= 0.5) == (j >= t)


def batch_mean(scores, weights):
    """Independent oracle: recompute the weighted running mean from scratch."""
    count = len(scores)
    arity = len(scores[0])
    return [
        math.fsum(w * s[i] for w, s in zip(weights, scores)) / count for i in range(arity)
    ]


class TestUpdateMean:
    def test_first_update_is_weighted_score(self):
        state = ActivationState(mean=WeightedMean.zeros(3), active=True)
        probs = ProbVector((0.2, 0.5, 0.3))
        out = update_mean(state, probs, 0.4)
        assert out.mean.count == 1
        assert out.mean.values == pytest.approx((0.08, 0.2, 0.12), abs=1e-15)

    def test_matches_batch_recomputation(self):
        rng = random.Random(3)
        for _ in range(50):
            arity = rng.randint(2, 8)
            state = ActivationState(mean=WeightedMean.zeros(arity), active=True)
            scores, weights = [], []
            for _ in range(rng.randint(1, 40)):
                vec = normalize([rng.random() + 1e-9 for _ in range(arity)])
                w = rng.uniform(0.01, 1.0)
                scores.append(vec.values)
                weights.append(w)
                state = update_mean(state, vec, w)
                expected = batch_mean(scores, weights)
                assert state.mean.values == pytest.approx(expected, abs=1e-12)
                assert all(0.0 <= x <= 1.0 for x in state.mean.values)

    def test_one_hot_approaches_one_monotonically(self):
        # all weights near 1 when the midpoint is 0, so the mean of class a rises toward 1
        state = ActivationState(mean=WeightedMean.zeros(4), active=True)
        probs = ProbVector((0.0, 1.0, 0.0, 0.0))
        prev = 0.0
        for j in range(1, 201):
            state = update_mean(state, probs, sigmoid_weight(j, 0, 0.2))
            assert state.mean.values[1] > prev
            prev = state.mean.values[1]
        assert prev > 0.95

    def test_arity_mismatch(self):
        state = ActivationState(mean=WeightedMean.zeros(3), active=True)
        with pytest.raises(ValueError, match="arity"):
            update_mean(state, ProbVector((0.5, 0.5)), 0.5)


class TestTryEarly:
    def test_emits_on_margin(self):
        state = ActivationState(mean=WeightedMean((0.6, 0.1, 0.05), count=3), active=True)
        state, event = try_early(state, 0.4, emit_frame=77)
        assert event is not None
        assert event.kind is EventKind.EARLY
        assert event.label == 0
        assert event.margin_or_score == pytest.approx(0.5)
        assert event.emit_frame == 77
        assert state.early_fired

    def test_never_fires_above_one(self):
        rng = random.Random(17)
        for _ in range(100):
            vals = normalize([rng.random() + 1e-9 for _ in range(5)])
            mean = WeightedMean(tuple(0.9 * x for x in vals.values), count=2)
            state = ActivationState(mean=mean, active=True)
            _, event = try_early(state, 1.000001, emit_frame=0)
            assert event is None

    def test_single_emission_contract(self):
        state = ActivationState(
            mean=WeightedMean((0.9, 0.0), count=1), early_fired=True, active=True
        )
        same, event = try_early(state, 0.1, emit_frame=5)
        assert event is None
        assert same is state


class TestFinalizeLate:
    def test_fires_above_tau_late(self):
        state = ActivationState(mean=WeightedMean((0.4, 0.1), count=5), active=True)
        reset, event = finalize_late(state, 0.15, emit_frame=90)
        assert event is not None
        assert event.kind is EventKind.LATE
        assert event.label == 0
        assert event.margin_or_score == pytest.approx(0.4)
        assert reset.mean.count == 0
        assert not reset.active and not reset.early_fired

    def test_suppressed_after_early(self):
        state = ActivationState(
            mean=WeightedMean((0.9, 0.0), count=5), early_fired=True, active=True
        )
        reset, event = finalize_late(state, 0.15, emit_frame=90)
        assert event is None
        assert reset.mean.count == 0

    def test_noise_floor_rejected(self):
        state = ActivationState(mean=WeightedMean((0.10, 0.02), count=5), active=True)
        _, event = finalize_late(state, 0.15, emit_frame=90)
        assert event is None


class StubScorer:
    """Classifier stand-in that counts lookups."""

    def __init__(self, probs):
        self.probs = probs
        self.lookups = 0

    def score(self, t):
        self.lookups += 1
        return self.probs


class TestActivationStep:
    CFG = PipelineConfig(num_classes=3, tau_early=0.3)

    def window(self, t):
        return window_bounds(t, self.CFG)

    def test_idle_never_touches_classifier(self):
        scorer = StubScorer(ProbVector((0.5, 0.3, 0.2)))
        state = ActivationState.inactive(3)
        for t in range(31, 131):
            state, event = activation_step(state, GateDecision.STAY_IDLE, scorer, self.window(t), self.CFG)
            assert event is None
        assert scorer.lookups == 0

    def test_zero_tau_fires_on_first_active_window(self):
        cfg = PipelineConfig(num_classes=3, tau_early=0.0)
        scorer = StubScorer(ProbVector((0.5, 0.3, 0.2)))
        state = ActivationState.inactive(3)
        state, event = activation_step(state, GateDecision.ACTIVATE, scorer, self.window(31), cfg)
        assert event is not None and event.kind is EventKind.EARLY
        assert event.emit_frame == 31
        assert scorer.lookups == 1

    def test_deactivate_emits_late_and_resets(self):
        cfg = PipelineConfig(num_classes=3, tau_early=1.0, sigmoid_midpoint=0)
        scorer = StubScorer(ProbVector((0.1, 0.8, 0.1)))
        state = ActivationState.inactive(3)
        state, event = activation_step(state, GateDecision.ACTIVATE, scorer, self.window(31), cfg)
        assert event is None
        for t in range(32, 40):
            state, event = activation_step(state, GateDecision.STAY_ACTIVE, scorer, self.window(t), cfg)
            assert event is None
        state, event = activation_step(state, GateDecision.DEACTIVATE, scorer, self.window(40), cfg)
        assert event is not None and event.kind is EventKind.LATE
        assert event.label == 1
        assert state.mean.count == 0 and not state.active
        assert scorer.lookups == 9  # activate + 8 stay-active; none on deactivate

    def test_deactivate_without_active_period_is_error(self):
        scorer = StubScorer(ProbVector((0.5, 0.3, 0.2)))
        with pytest.raises(RuntimeError):
            activation_step(
                ActivationState.inactive(3), GateDecision.DEACTIVATE, scorer, self.window(31), self.CFG
            )

    def test_scoring_continues_after_early_emission(self):
        cfg = PipelineConfig(num_classes=3, tau_early=0.0)
        scorer = StubScorer(ProbVector((0.6, 0.3, 0.1)))
        state = ActivationState.inactive(3)
        state, first = activation_step(state, GateDecision.ACTIVATE, scorer, self.window(31), cfg)
        assert first is not None
        events = []
        for t in range(32, 50):
            state, event = activation_step(state, GateDecision.STAY_ACTIVE, scorer, self.window(t), cfg)
            events.append(event)
        assert all(e is None for e in events)  # single-time contract
        assert scorer.lookups == 19  # state kept current for diagnostics
        assert state.mean.count == 19


def emission_index(margins, tau):
    """First iteration whose top-2 margin reaches tau, or None (late)."""
    for i, margin in enumerate(margins):
        if margin >= tau:
            return i
    return None


class TestEmissionMonotonicity:
    def test_emission_never_earlier_for_higher_tau(self):
        rng = random.Random(29)
        cfg_base = PipelineConfig(num_classes=5)
        for _ in range(200):
            # simulate one active period and record the margin trajectory
            state = ActivationState(mean=WeightedMean.zeros(5), active=True)
            margins = []
            for j in range(1, rng.randint(5, 45)):
                vec = normalize([rng.random() + 1e-9 for _ in range(5)])
                w = sigmoid_weight(j, 9, cfg_base.sigmoid_slope)
                state = update_mean(state, vec, w)
                vals = sorted(state.mean.values, reverse=True)
                margins.append(vals[0] - vals[1])
            taus = [0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0]
            indices = [emission_index(margins, tau) for tau in taus]
            fired = [i for i in indices if i is not None]
            assert fired == sorted(fired)
            # once a tau stops firing, all higher taus stop too
            seen_none = False
            for i in indices:
                if i is None:
                    seen_none = True
                else:
                    assert not seen_none
