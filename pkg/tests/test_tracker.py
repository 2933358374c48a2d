import pytest

from damtrack.config import RunConfig
from damtrack.masks import BinaryMask
from damtrack.membank import KIND_INIT
from damtrack.tracker import (
    CandidateSet,
    TrackerError,
    processed_frame_indices,
    rt_replay,
    run_sequence,
    select_output,
)

W, H = 16, 12
INIT = BinaryMask.from_rect(W, H, 2, 2, 4, 4)
CFG = RunConfig()


def cands(mask: BinaryMask, score: float = 0.9) -> CandidateSet:
    empty = BinaryMask.zeros(mask.width, mask.height)
    return CandidateSet((mask, empty, empty), (score, 0.0, 0.0))


class StubPredictor:
    def __init__(self, candidate_sets, width=W, height=H):
        self._sets = candidate_sets
        self.width = width
        self.height = height

    @property
    def num_frames(self):
        return len(self._sets) + 1

    def predict(self, frame_index, view):
        return self._sets[frame_index - 1]


class TestSelectOutput:
    def test_first_wins(self):
        c = CandidateSet(
            (INIT, BinaryMask.zeros(W, H), BinaryMask.zeros(W, H)), (0.9, 0.2, 0.1)
        )
        assert select_output(c) == 0

    def test_tie_breaks_low(self):
        c = CandidateSet((INIT, INIT, INIT), (0.5, 0.5, 0.1))
        assert select_output(c) == 0

    def test_last_wins(self):
        c = CandidateSet((INIT, INIT, INIT), (0.1, 0.2, 0.9))
        assert select_output(c) == 2


class TestRunSequence:
    def test_single_frame_sequence(self):
        result = run_sequence(StubPredictor([]), INIT, CFG.policy_config(), CFG.bank_config())
        assert len(result.frames) == 1
        row = result.frames[0]
        assert row.frame_index == 0
        assert row.mask == INIT
        assert row.decision is None
        assert row.view_digest == [{"frame_index": 0, "kind": KIND_INIT, "temporal_rank": None}]

    def test_all_empty_candidates_freeze_memory(self):
        empty = cands(BinaryMask.zeros(W, H), 0.0)
        result = run_sequence(
            StubPredictor([empty] * 10), INIT, CFG.policy_config(), CFG.bank_config()
        )
        decisions = [f.decision for f in result.frames[1:]]
        assert all(d.reasons == ("absent",) for d in decisions)
        assert not any(d.update_ram or d.update_drm or d.set_latest for d in decisions)
        # Memory stays init-only, so every digest is the singleton view.
        assert all(len(f.view_digest) == 1 for f in result.frames[1:])

    def test_deterministic(self):
        sets = [cands(BinaryMask.from_rect(W, H, i % 4, 2, 4, 4)) for i in range(8)]
        a = run_sequence(StubPredictor(sets), INIT, CFG.policy_config(), CFG.bank_config())
        b = run_sequence(StubPredictor(sets), INIT, CFG.policy_config(), CFG.bank_config())
        assert [f.to_json() for f in a.frames] == [f.to_json() for f in b.frames]

    def test_empty_init_rejected(self):
        with pytest.raises(TrackerError):
            run_sequence(
                StubPredictor([]), BinaryMask.zeros(W, H), CFG.policy_config(), CFG.bank_config()
            )

    def test_init_dimension_mismatch_rejected(self):
        with pytest.raises(TrackerError):
            run_sequence(
                StubPredictor([]), BinaryMask.full(4, 4), CFG.policy_config(), CFG.bank_config()
            )

    def test_dimension_drift_rejected(self):
        drifted = cands(BinaryMask.full(4, 4))
        with pytest.raises(TrackerError, match="drift at frame 1"):
            run_sequence(
                StubPredictor([drifted]), INIT, CFG.policy_config(), CFG.bank_config()
            )

    def test_predictor_failure_carries_frame_context(self):
        class Exploding(StubPredictor):
            def predict(self, frame_index, view):
                raise RuntimeError("boom")

        with pytest.raises(TrackerError, match="frame 1"):
            run_sequence(
                Exploding([cands(INIT)]), INIT, CFG.policy_config(), CFG.bank_config()
            )

    def test_memory_updates_follow_decisions(self):
        sets = [cands(BinaryMask.from_rect(W, H, 2, 2, 4, 4))] * 12
        result = run_sequence(StubPredictor(sets), INIT, CFG.policy_config(), CFG.bank_config())
        ram_updates = [f.frame_index for f in result.frames[1:] if f.decision.update_ram]
        assert ram_updates == [1, 6, 11]
        # The latest slot follows every present frame: view at t>=2 shows it.
        kinds = [d["kind"] for d in result.frames[5].view_digest]
        assert "ram_latest" in kinds


class TestRtReplay:
    def make_sets(self, n=10):
        return [cands(BinaryMask.from_rect(W, H, (i % 3) * 2, 2, 4, 4)) for i in range(n)]

    def test_no_deadline_equals_offline(self):
        sets = self.make_sets()
        offline = run_sequence(StubPredictor(sets), INIT, CFG.policy_config(), CFG.bank_config())
        rt = rt_replay(
            StubPredictor(sets), INIT, CFG.policy_config(), CFG.bank_config(), [10.0] * 10, 0.0
        )
        assert [f.to_json() for f in rt.frames] == [f.to_json() for f in offline.frames]

    def test_fast_tracker_never_skips(self):
        sets = self.make_sets()
        rt = rt_replay(
            StubPredictor(sets), INIT, CFG.policy_config(), CFG.bank_config(), [10.0] * 10, 20.0
        )
        assert processed_frame_indices(rt) == list(range(1, 11))

    def test_alternating_skip_pattern(self):
        sets = self.make_sets()
        rt = rt_replay(
            StubPredictor(sets), INIT, CFG.policy_config(), CFG.bank_config(), [75.0] * 10, 20.0
        )
        assert processed_frame_indices(rt) == [1, 3, 5, 7, 9]
        skipped = [f for f in rt.frames[1:] if not f.processed]
        assert [f.frame_index for f in skipped] == [2, 4, 6, 8, 10]
        # Skipped frames copy the last completed prediction.
        for f in skipped:
            prev = rt.frames[f.frame_index - 1]
            assert f.mask == prev.mask
            assert f.decision is None

    def test_tiny_budget_processes_only_first_frame(self):
        sets = self.make_sets()
        rt = rt_replay(
            StubPredictor(sets), INIT, CFG.policy_config(), CFG.bank_config(), [10.0] * 10, 10000.0
        )
        assert processed_frame_indices(rt) == [1]
        assert all(f.mask == rt.frames[1].mask for f in rt.frames[2:])

    def test_latency_length_mismatch(self):
        with pytest.raises(TrackerError):
            rt_replay(
                StubPredictor(self.make_sets()), INIT, CFG.policy_config(), CFG.bank_config(), [10.0], 20.0
            )
