"""Tracking evaluation measures.

Implements a simplified quality/accuracy/robustness triple (per-frame
overlap based, with documented 0/0 conventions), the success-curve AUC over
boxes, and the plain average overlap. The initialization frame is excluded
by callers; all functions here treat their inputs as frames 1..N-1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .masks import BBox, BinaryMask, bbox, iou

MaskOrNone = Optional[BinaryMask]
BoxOrNone = Optional[BBox]


@dataclass(frozen=True)
class EvalSummary:
    quality: float
    accuracy: float
    robustness: float
    auc: float
    ao: float
    frames_evaluated: int

    def to_json(self) -> dict:
        return {
            "quality": self.quality,
            "accuracy": self.accuracy,
            "robustness": self.robustness,
            "auc": self.auc,
            "ao": self.ao,
            "frames_evaluated": self.frames_evaluated,
        }


def mask_to_box(m: BinaryMask) -> Optional[BBox]:
    """Min-max box of a predicted mask; absent for an empty mask."""
    return bbox(m)


def box_iou(a: BBox, b: BBox) -> float:
    """IoU of two inclusive-coordinate boxes."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min) + 1
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _pair_iou(pred: Union[MaskOrNone, BoxOrNone], gt: Union[MaskOrNone, BoxOrNone]) -> float:
    """Overlap for one frame; None (or an empty mask) means absent.

    Both absent counts as perfect agreement (1.0); one-sided absence is a
    miss (0.0)."""
    pred_absent = pred is None or (isinstance(pred, BinaryMask) and pred.is_empty)
    gt_absent = gt is None or (isinstance(gt, BinaryMask) and gt.is_empty)
    if pred_absent and gt_absent:
        return 1.0
    if pred_absent or gt_absent:
        return 0.0
    if isinstance(pred, BinaryMask) and isinstance(gt, BinaryMask):
        return iou(pred, gt)
    if isinstance(pred, BBox) and isinstance(gt, BBox):
        return box_iou(pred, gt)
    raise ValueError(f"cannot overlap {type(pred).__name__} with {type(gt).__name__}")


def qar(
    predictions: Sequence[BinaryMask],
    gt: Sequence[BinaryMask],
    success_threshold: float = 0.0,
) -> tuple[float, float, float]:
    """Quality, accuracy and robustness over aligned mask streams.

    Robustness is the portion of target-visible frames tracked with overlap
    above ``success_threshold``; accuracy averages the overlap over those
    successful frames. Quality averages a per-frame score over all frames:
    the overlap where the target is visible, 1 where both ground truth and
    prediction are empty, 0 where only the prediction is non-empty. On
    sequences with no visible-target frames, robustness and accuracy are
    vacuously 1.
    """
    if len(predictions) != len(gt):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gt)} gt")
    per_frame = []
    success_ious = []
    visible = 0
    for p, g in zip(predictions, gt):
        if not g.is_empty:
            visible += 1
            v = iou(p, g)
            per_frame.append(v)
            if v > success_threshold:
                success_ious.append(v)
        else:
            per_frame.append(1.0 if p.is_empty else 0.0)
    quality = sum(per_frame) / len(per_frame) if per_frame else 1.0
    if visible == 0:
        return quality, 1.0, 1.0
    robustness = len(success_ious) / visible
    accuracy = sum(success_ious) / len(success_ious) if success_ious else 0.0
    return quality, accuracy, robustness


def success_auc(
    pred_boxes: Sequence[BoxOrNone],
    gt_boxes: Sequence[BoxOrNone],
    num_thresholds: int = 101,
) -> float:
    """Mean success rate over an evenly spaced overlap-threshold grid.

    A frame succeeds at threshold t when its box overlap is strictly above
    t, so even perfect tracking fails the final threshold 1.0.
    """
    if len(pred_boxes) != len(gt_boxes):
        raise ValueError("length mismatch between prediction and ground-truth boxes")
    if not pred_boxes:
        raise ValueError("cannot evaluate an empty sequence")
    if num_thresholds < 2:
        raise ValueError("need at least 2 thresholds")
    ious = [_pair_iou(p, g) for p, g in zip(pred_boxes, gt_boxes)]
    n = len(ious)
    total = 0.0
    for i in range(num_thresholds):
        tau = i / (num_thresholds - 1)
        total += sum(1 for v in ious if v > tau) / n
    return total / num_thresholds


def average_overlap(
    pred: Sequence[Union[MaskOrNone, BoxOrNone]],
    gt: Sequence[Union[MaskOrNone, BoxOrNone]],
) -> float:
    """Mean per-frame overlap (masks or boxes)."""
    if len(pred) != len(gt):
        raise ValueError("length mismatch between prediction and ground truth")
    if not pred:
        raise ValueError("cannot average over an empty sequence")
    return sum(_pair_iou(p, g) for p, g in zip(pred, gt)) / len(pred)


def identity_switches(predictions: Sequence[BinaryMask], gt: Sequence[BinaryMask]) -> int:
    """Frames where a visible target was answered with a disjoint non-empty mask."""
    if len(predictions) != len(gt):
        raise ValueError("length mismatch")
    return sum(
        1
        for p, g in zip(predictions, gt)
        if not g.is_empty and not p.is_empty and iou(p, g) == 0.0
    )


def failed_frames(
    predictions: Sequence[BinaryMask],
    gt: Sequence[BinaryMask],
    success_threshold: float = 0.0,
) -> int:
    """Visible-target frames whose overlap did not clear the success bar."""
    if len(predictions) != len(gt):
        raise ValueError("length mismatch")
    return sum(
        1
        for p, g in zip(predictions, gt)
        if not g.is_empty and iou(p, g) <= success_threshold
    )


def evaluate_sequence(
    pred_masks: Sequence[BinaryMask],
    gt_masks: Sequence[BinaryMask],
    gt_boxes: Optional[Sequence[BoxOrNone]] = None,
    success_threshold: float = 0.0,
    num_thresholds: int = 101,
) -> EvalSummary:
    """Full summary for one sequence (initialization frame already dropped).

    Boxes for the success curve are derived from masks via the min-max
    operation unless explicit ground-truth boxes are supplied.
    """
    quality, accuracy, robustness = qar(pred_masks, gt_masks, success_threshold)
    pred_boxes = [mask_to_box(m) for m in pred_masks]
    boxes_gt = list(gt_boxes) if gt_boxes is not None else [mask_to_box(m) for m in gt_masks]
    auc = success_auc(pred_boxes, boxes_gt, num_thresholds)
    ao = average_overlap(pred_masks, gt_masks)
    return EvalSummary(quality, accuracy, robustness, auc, ao, len(pred_masks))


def aggregate(summaries: Sequence[EvalSummary]) -> EvalSummary:
    """Mean of the per-sequence measures; frame counts add up."""
    if not summaries:
        raise ValueError("nothing to aggregate")
    n = len(summaries)
    return EvalSummary(
        quality=sum(s.quality for s in summaries) / n,
        accuracy=sum(s.accuracy for s in summaries) / n,
        robustness=sum(s.robustness for s in summaries) / n,
        auc=sum(s.auc for s in summaries) / n,
        ao=sum(s.ao for s in summaries) / n,
        frames_evaluated=sum(s.frames_evaluated for s in summaries),
    )
