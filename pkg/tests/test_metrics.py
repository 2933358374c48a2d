import numpy as np
import pytest

from damtrack.masks import BBox, BinaryMask
from damtrack.metrics import (
    aggregate,
    average_overlap,
    box_iou,
    evaluate_sequence,
    failed_frames,
    identity_switches,
    mask_to_box,
    qar,
    success_auc,
)

W, H = 10, 10
FULL = BinaryMask.full(W, H)
EMPTY = BinaryMask.zeros(W, H)


def mask_fraction(frac: float) -> BinaryMask:
    """A mask overlapping FULL with the given IoU."""
    rows = int(round(frac * H))
    return BinaryMask.from_rect(W, H, 0, 0, W, rows)


class TestQar:
    def test_perfect(self):
        preds = [FULL] * 6
        assert qar(preds, [FULL] * 6) == (1.0, 1.0, 1.0)

    def test_half_tracked(self):
        preds = [mask_fraction(0.8)] * 3 + [EMPTY] * 3
        gt = [FULL] * 6
        quality, accuracy, robustness = qar(preds, gt)
        assert quality == pytest.approx(0.4, abs=1e-12)
        assert accuracy == pytest.approx(0.8, abs=1e-12)
        assert robustness == pytest.approx(0.5, abs=1e-12)

    def test_all_absent_conventions(self):
        preds = [EMPTY] * 4
        gt = [EMPTY] * 4
        assert qar(preds, gt) == (1.0, 1.0, 1.0)

    def test_false_positive_during_absence_scores_zero(self):
        quality, accuracy, robustness = qar([FULL, EMPTY], [EMPTY, EMPTY])
        assert quality == 0.5
        assert (accuracy, robustness) == (1.0, 1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            qar([FULL], [FULL, FULL])

    def test_quality_at_most_accuracy_when_always_visible(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            gt = [FULL] * n
            preds = [mask_fraction(float(rng.uniform(0, 1))) for _ in range(n)]
            quality, accuracy, _ = qar(preds, gt)
            assert quality <= accuracy + 1e-12

    def test_quality_factorizes_on_uniform_streams(self):
        for v_rows, k, n in [(7, 3, 9), (5, 4, 4), (9, 1, 7)]:
            preds = [mask_fraction(v_rows / H)] * k + [EMPTY] * (n - k)
            gt = [FULL] * n
            quality, accuracy, robustness = qar(preds, gt)
            assert abs(quality - accuracy * robustness) <= 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(11)
        preds = [mask_fraction(float(rng.uniform(0, 1))) for _ in range(8)]
        gt = [FULL if rng.random() > 0.3 else EMPTY for _ in range(8)]
        base = qar(preds, gt)
        order = rng.permutation(8)
        shuffled = qar([preds[i] for i in order], [gt[i] for i in order])
        assert base == pytest.approx(shuffled, abs=1e-12)


class TestSuccessAuc:
    def test_perfect_boxes(self):
        boxes = [BBox(0, 0, 4, 4)] * 5
        assert success_auc(boxes, boxes) == pytest.approx(100 / 101, abs=1e-12)

    def test_all_misses(self):
        pred = [BBox(0, 0, 1, 1)] * 4
        gt = [BBox(5, 5, 6, 6)] * 4
        assert success_auc(pred, gt) == 0.0

    def test_half_overlap(self):
        # Boxes overlapping with IoU exactly 0.5: 10x10 vs 10x15 stacked.
        pred = [BBox(0, 0, 9, 9)] * 3
        gt = [BBox(0, 5, 9, 19)] * 3
        assert box_iou(pred[0], gt[0]) == 0.25
        pred2 = [BBox(0, 0, 9, 4)] * 3
        gt2 = [BBox(0, 0, 9, 9)] * 3
        assert box_iou(pred2[0], gt2[0]) == 0.5
        assert success_auc(pred2, gt2) == pytest.approx(50 / 101, abs=1e-12)

    def test_absent_prediction_counts_zero(self):
        gt = [BBox(0, 0, 4, 4)] * 2
        assert success_auc([None, BBox(0, 0, 4, 4)], gt) == pytest.approx(50 / 101, abs=1e-12)

    def test_monotone_under_improvement(self):
        gt = [BBox(0, 0, 9, 9)] * 4
        worse = [BBox(0, 0, 9, 4)] * 4
        better = [BBox(0, 0, 9, 7)] * 4
        assert success_auc(better, gt) >= success_auc(worse, gt)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            success_auc([None], [])


class TestAverageOverlap:
    def test_identical(self):
        assert average_overlap([FULL] * 3, [FULL] * 3) == 1.0

    def test_mean(self):
        preds = [FULL, EMPTY, mask_fraction(0.5)]
        gt = [FULL, FULL, FULL]
        assert average_overlap(preds, gt) == pytest.approx(0.5, abs=1e-12)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            average_overlap([], [])

    def test_boxes_supported(self):
        assert average_overlap([BBox(0, 0, 1, 1)], [BBox(0, 0, 1, 1)]) == 1.0

    def test_mixed_types_rejected(self):
        with pytest.raises(ValueError):
            average_overlap([BBox(0, 0, 1, 1)], [FULL])


class TestHelpers:
    def test_mask_to_box(self):
        assert mask_to_box(EMPTY) is None
        assert mask_to_box(BinaryMask.from_points(6, 6, [(2, 5)])) == BBox(2, 5, 2, 5)

    def test_box_iou_disjoint(self):
        assert box_iou(BBox(0, 0, 1, 1), BBox(3, 3, 4, 4)) == 0.0

    def test_identity_switches(self):
        gt = [FULL, FULL, EMPTY]
        preds = [
            BinaryMask.from_rect(W, H, 0, 0, 2, 2),
            EMPTY,
            FULL,
        ]
        # Frame 1 overlaps gt, frame 2 is a miss but empty, frame 3 gt-absent.
        assert identity_switches(preds, gt) == 0
        gt2 = [BinaryMask.from_rect(W, H, 0, 0, 2, 2)]
        pred2 = [BinaryMask.from_rect(W, H, 5, 5, 2, 2)]
        assert identity_switches(pred2, gt2) == 1

    def test_failed_frames(self):
        gt = [FULL, FULL, EMPTY, FULL]
        preds = [FULL, EMPTY, EMPTY, mask_fraction(0.3)]
        assert failed_frames(preds, gt) == 1
        assert failed_frames(preds, gt, success_threshold=0.5) == 2

    def test_evaluate_and_aggregate(self):
        s1 = evaluate_sequence([FULL] * 4, [FULL] * 4)
        s2 = evaluate_sequence([EMPTY] * 4, [FULL] * 4)
        agg = aggregate([s1, s2])
        assert agg.quality == pytest.approx((s1.quality + s2.quality) / 2, abs=1e-15)
        assert agg.frames_evaluated == 8
        for v in (agg.quality, agg.accuracy, agg.robustness, agg.auc, agg.ao):
            assert 0.0 <= v <= 1.0
