import itertools

import pytest

from conftest import build_decision_inputs, expected_decision
from damtrack.masks import BinaryMask, union
from damtrack.policy import (
    VARIANTS,
    PolicyConfig,
    PolicyState,
    apply_decision,
    decide,
    detect_anchor,
    stable,
    target_present,
)
CFG = PolicyConfig()


class TestTargetPresent:
    def test_empty(self):
        assert not target_present(BinaryMask.zeros(3, 3))

    def test_single_bit(self):
        assert target_present(BinaryMask.from_points(3, 3, [(1, 1)]))

    def test_full(self):
        assert target_present(BinaryMask.full(3, 3))


class TestDetectAnchor:
    def test_identical_alternatives(self):
        out = BinaryMask.from_rect(20, 20, 2, 2, 10, 10)
        is_anchor, ratio = detect_anchor(out, [out, out], CFG)
        assert (is_anchor, ratio) == (False, 1.0)

    def test_divergent_alternative_fires(self):
        # Output box 10x10; the alternative extends the union box to 10x20.
        out = BinaryMask.from_rect(10, 30, 0, 0, 10, 10)
        alt = BinaryMask.from_rect(10, 30, 0, 15, 10, 5)
        is_anchor, ratio = detect_anchor(out, [alt, out], CFG)
        assert ratio == pytest.approx(0.5, abs=0)
        assert is_anchor

    def test_mild_divergence_does_not_fire(self):
        # Union box grows to 10x13: ratio just above the threshold.
        out = BinaryMask.from_rect(10, 30, 0, 0, 10, 10)
        alt = BinaryMask.from_rect(10, 30, 0, 12, 10, 1)
        is_anchor, ratio = detect_anchor(out, [alt, out], CFG)
        assert ratio == pytest.approx(100 / 130, abs=1e-15)
        assert not is_anchor

    def test_boundary_ratio_is_not_an_anchor(self):
        # Exactly 0.7: strict comparison keeps it out.
        out = BinaryMask.from_rect(10, 10, 0, 0, 7, 10)
        alt = BinaryMask.from_rect(10, 10, 9, 0, 1, 10)
        is_anchor, ratio = detect_anchor(out, [alt], CFG)
        assert ratio == 0.7
        assert not is_anchor

    def test_empty_alternatives_contribute_one(self):
        out = BinaryMask.from_rect(10, 10, 0, 0, 5, 5)
        empty = BinaryMask.zeros(10, 10)
        assert detect_anchor(out, [empty, empty], CFG) == (False, 1.0)

    def test_empty_output_rejected(self):
        with pytest.raises(ValueError):
            detect_anchor(BinaryMask.zeros(5, 5), [BinaryMask.zeros(5, 5)], CFG)

    def test_dimension_mismatch_rejected(self):
        out = BinaryMask.full(5, 5)
        with pytest.raises(ValueError):
            detect_anchor(out, [BinaryMask.zeros(6, 5)], CFG)

    def test_growing_component_never_raises_ratio(self):
        out = BinaryMask.from_rect(40, 10, 0, 0, 8, 8)
        last = 1.0
        alt = BinaryMask.from_rect(40, 10, 12, 0, 2, 2)
        for extra in range(6):
            grown = union(alt, BinaryMask.from_rect(40, 10, 12, 0, 2 + 4 * extra, 2))
            _, ratio = detect_anchor(out, [grown], CFG)
            assert 0.0 < ratio <= last
            last = ratio


class TestStable:
    def fresh_state(self, areas):
        state = PolicyState(theta_m=CFG.theta_m)
        state.area_history.extend(areas)
        return state

    def test_within_band(self):
        state = self.fresh_state([100] * 10)
        assert stable(0.85, 115, state, CFG)

    def test_outside_band(self):
        state = self.fresh_state([100] * 10)
        assert not stable(0.85, 130, state, CFG)

    def test_iou_gate_is_strict(self):
        state = self.fresh_state([100] * 10)
        assert not stable(0.79, 100, state, CFG)
        assert not stable(0.8, 100, state, CFG)

    def test_history_must_be_full(self):
        state = self.fresh_state([100] * 9)
        assert not stable(0.95, 100, state, CFG)

    def test_even_window_median(self):
        cfg = PolicyConfig(theta_m=4)
        state = PolicyState(theta_m=4)
        state.area_history.extend([10, 20, 30, 40])
        # median 25, band 5: 30 passes, 31 does not
        assert stable(0.9, 30, state, cfg)
        assert not stable(0.9, 31, state, cfg)


class TestDecide:
    def test_absent_target(self):
        cands, state = build_decision_inputs(False, True, True, False, False, CFG)
        d = decide(10, cands, 0, state, CFG)
        assert (d.update_ram, d.update_drm, d.set_latest) == (False, False, False)
        assert d.reasons == ("absent",)
        assert d.anchor_ratio is None

    def test_interval_blocks_ram_but_latest_updates(self):
        cands, state = build_decision_inputs(True, True, True, False, True, CFG)
        state.last_ram_update = 7  # 3 frames ago at frame 10
        d = decide(10, cands, 0, state, CFG)
        assert not d.update_ram
        assert d.set_latest
        assert "interval" in d.reasons

    def test_full_update(self):
        cands, state = build_decision_inputs(True, True, True, True, True, CFG)
        d = decide(100, cands, 0, state, CFG)
        assert d.update_ram and d.update_drm and d.set_latest

    def test_baseline_updates_even_when_absent(self):
        cfg = PolicyConfig(variant="sam21_baseline")
        cands, state = build_decision_inputs(False, True, True, False, False, cfg)
        d = decide(5, cands, 0, state, cfg)
        assert d.update_ram
        assert d.reasons == ("absent",)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_decision_table(self, variant):
        cfg = PolicyConfig(variant=variant)
        for combo in itertools.product([False, True], repeat=5):
            present, ram_e, drm_e, anchor, stable_flag = combo
            cands, state = build_decision_inputs(*combo, cfg)
            d = decide(100, cands, 0, state, cfg)
            want = expected_decision(variant, present, ram_e, drm_e, anchor, stable_flag)
            got = {
                "update_ram": d.update_ram,
                "update_drm": d.update_drm,
                "set_latest": d.set_latest,
                "anchor_ratio": d.anchor_ratio,
                "reasons": d.reasons,
            }
            assert got == want, f"{variant} {combo}"

    def test_no_latest_flag_suppresses_set_latest(self):
        cfg = PolicyConfig(variant="dam_full", include_latest_in_ram=False)
        cands, state = build_decision_inputs(True, True, True, False, True, cfg)
        assert not decide(100, cands, 0, state, cfg).set_latest


class TestApplyDecision:
    def test_counters_advance_only_on_updates(self):
        cfg = PolicyConfig()
        cands, state = build_decision_inputs(True, True, True, True, True, cfg)
        d = decide(50, cands, 0, state, cfg)
        apply_decision(state, 50, d, 120)
        assert state.last_ram_update == 50
        assert state.last_drm_update == 50
        assert state.area_history[-1] == 120
        assert len(state.area_history) == cfg.theta_m

    def test_absent_frames_do_not_touch_history(self):
        cfg = PolicyConfig()
        state = PolicyState.for_config(cfg)
        cands, _ = build_decision_inputs(False, True, True, False, False, cfg)
        d = decide(5, cands, 0, state, cfg)
        apply_decision(state, 5, d, 0)
        assert not state.area_history
        assert state.last_ram_update is None

    def test_history_is_a_ring(self):
        cfg = PolicyConfig(theta_m=3)
        state = PolicyState.for_config(cfg)
        for i, a in enumerate([10, 20, 30, 40]):
            cands, _ = build_decision_inputs(True, True, True, False, True, cfg)
            apply_decision(state, i, decide(i, cands, 0, state, cfg), a)
        assert list(state.area_history) == [20, 30, 40]


class TestRateLimit:
    @pytest.mark.parametrize("variant", ["delta_only", "drm1", "drm2", "dam_full"])
    def test_updates_separated_by_delta(self, variant):
        cfg = PolicyConfig(variant=variant)
        state = PolicyState.for_config(cfg)
        ram_frames, drm_frames = [], []
        for t in range(1, 60):
            cands, _ = build_decision_inputs(True, True, True, True, True, cfg)
            d = decide(t, cands, 0, state, cfg)
            if d.update_ram:
                ram_frames.append(t)
            if d.update_drm:
                drm_frames.append(t)
            apply_decision(state, t, d, 100)
        checked = [ram_frames] if variant == "delta_only" else [ram_frames, drm_frames]
        for seq in checked:
            assert seq, "expected at least one update in the stream"
            assert all(b - a >= cfg.delta for a, b in zip(seq, seq[1:]))
