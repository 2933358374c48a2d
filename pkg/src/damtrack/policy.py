"""Update-decision engine for the distractor-aware memory.

Decides, per frame, whether the tracked output enters the recent-appearance
FIFO, the distractor-resolving FIFO, or the volatile latest slot. Computing
a decision never mutates state; :func:`apply_decision` advances the
counters afterwards, which keeps decisions replayable and loggable.
"""

from __future__ import annotations

import statistics
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Deque, Optional, Sequence

from .masks import BinaryMask, area, bbox, largest_component

if TYPE_CHECKING:
    from .tracker import CandidateSet

VARIANT_SAM21_BASELINE = "sam21_baseline"
VARIANT_PRES = "pres"
VARIANT_DELTA_ONLY = "delta_only"
VARIANT_DRM1 = "drm1"
VARIANT_DRM2 = "drm2"
VARIANT_DAM_FULL = "dam_full"

VARIANTS = (
    VARIANT_SAM21_BASELINE,
    VARIANT_PRES,
    VARIANT_DELTA_ONLY,
    VARIANT_DRM1,
    VARIANT_DRM2,
    VARIANT_DAM_FULL,
)

# Variants whose RAM updates are interval-gated; the DRM subset also runs
# a distractor-resolving buffer.
_DELTA_GATED = frozenset({VARIANT_DELTA_ONLY, VARIANT_DRM1, VARIANT_DRM2, VARIANT_DAM_FULL})
_DRM_CAPABLE = frozenset({VARIANT_DRM1, VARIANT_DRM2, VARIANT_DAM_FULL})

REASON_ABSENT = "absent"
REASON_INTERVAL = "interval"
REASON_ANCHOR = "anchor"
REASON_UNSTABLE_IOU = "unstable_iou"
REASON_UNSTABLE_AREA = "unstable_area"


@dataclass(frozen=True)
class PolicyConfig:
    """Thresholds and variant selection.

    Defaults are the production values: updates every 5th frame, anchor
    divergence below 0.7, reliability above 0.8 predicted IoU, and area
    within 20% of the median over the last 10 tracked frames.
    """

    delta: int = 5
    theta_anc: float = 0.7
    theta_iou: float = 0.8
    theta_area: float = 0.2
    theta_m: int = 10
    variant: str = VARIANT_DAM_FULL
    include_latest_in_ram: bool = True

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if not 0 < self.theta_anc <= 1:
            raise ValueError("theta_anc must be in (0, 1]")
        if not 0 <= self.theta_iou <= 1:
            raise ValueError("theta_iou must be in [0, 1]")
        if self.theta_area <= 0:
            raise ValueError("theta_area must be positive")
        if self.theta_m < 1:
            raise ValueError("theta_m must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")


@dataclass
class PolicyState:
    """Per-sequence mutable counters and the output-area history ring."""

    theta_m: int
    last_ram_update: Optional[int] = None
    last_drm_update: Optional[int] = None
    area_history: Deque[int] = field(default_factory=deque)

    def __post_init__(self) -> None:
        self.area_history = deque(self.area_history, maxlen=self.theta_m)

    @classmethod
    def for_config(cls, cfg: PolicyConfig) -> "PolicyState":
        return cls(theta_m=cfg.theta_m)


@dataclass(frozen=True)
class UpdateDecision:
    """Per-frame outcome plus diagnostic tags.

    Reason tags describe the frame uniformly across variants:

    - ``absent``: the selected output mask was empty (sole tag).
    - ``interval``: a delta gate withheld an otherwise possible update this
      frame (RAM for interval-gated variants, DRM for DRM variants).
    - ``anchor``: candidate divergence crossed the anchor threshold.
    - ``unstable_iou`` / ``unstable_area``: the corresponding reliability
      check failed this frame.
    """

    update_ram: bool
    update_drm: bool
    set_latest: bool
    anchor_ratio: Optional[float]
    reasons: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "update_ram": self.update_ram,
            "update_drm": self.update_drm,
            "set_latest": self.set_latest,
            "anchor_ratio": self.anchor_ratio,
            "reasons": list(self.reasons),
        }


def target_present(output_mask: BinaryMask) -> bool:
    """The target counts as present whenever the output mask is non-empty."""
    return area(output_mask) > 0


def detect_anchor(
    output: BinaryMask, alternatives: Sequence[BinaryMask], cfg: PolicyConfig
) -> tuple[bool, float]:
    """Test candidate divergence between the output and alternative masks.

    For each alternative, a box is fitted to the output mask and to the
    union of the output mask with the alternative's largest connected
    component; the ratio of the two box areas measures how far the
    hypothesis diverges. The minimum ratio over both alternatives is
    compared against the anchor threshold (strictly below fires).
    """
    if output.is_empty:
        raise ValueError("anchor detection requires a non-empty output mask")
    out_box = bbox(output)
    assert out_box is not None
    ratio = 1.0
    for alt in alternatives:
        if alt.bits.shape != output.bits.shape:
            raise ValueError("alternative mask dimensions differ from output")
        part = largest_component(alt)
        if part is None:
            continue
        part_box = bbox(part)
        assert part_box is not None
        union_box = out_box.union(part_box)
        ratio = min(ratio, out_box.area / union_box.area)
    return ratio < cfg.theta_anc, ratio


def iou_reliable(predicted_iou: float, cfg: PolicyConfig) -> bool:
    return predicted_iou > cfg.theta_iou


def area_reliable(output_area: int, state: PolicyState, cfg: PolicyConfig) -> bool:
    """Area is reliable only once the history is full and the new area sits
    within theta_area of the median (even windows use the mid-pair mean)."""
    if len(state.area_history) < cfg.theta_m:
        return False
    med = statistics.median(state.area_history)
    return abs(output_area - med) <= cfg.theta_area * med


def stable(predicted_iou: float, output_area: int, state: PolicyState, cfg: PolicyConfig) -> bool:
    """Reliable-tracking gate: both the predicted IoU and the area check pass."""
    return iou_reliable(predicted_iou, cfg) and area_reliable(output_area, state, cfg)


def _interval_elapsed(last: Optional[int], frame_index: int, delta: int) -> bool:
    return last is None or frame_index - last >= delta


def decide(
    frame_index: int,
    candidates: "CandidateSet",
    selected: int,
    state: PolicyState,
    cfg: PolicyConfig,
) -> UpdateDecision:
    """Compute the update decision for one frame under the configured variant.

    ``selected`` must index the highest-scoring candidate. The decision is a
    pure function of its inputs; call :func:`apply_decision` to commit it.
    """
    output = candidates.masks[selected]
    present = target_present(output)

    if not present:
        return UpdateDecision(
            update_ram=cfg.variant == VARIANT_SAM21_BASELINE,
            update_drm=False,
            set_latest=False,
            anchor_ratio=None,
            reasons=(REASON_ABSENT,),
        )

    alternatives = [m for i, m in enumerate(candidates.masks) if i != selected]
    is_anchor, ratio = detect_anchor(output, alternatives, cfg)
    out_area = area(output)
    iou_ok = iou_reliable(candidates.scores[selected], cfg)
    area_ok = area_reliable(out_area, state, cfg)
    is_stable = iou_ok and area_ok

    ram_elapsed = _interval_elapsed(state.last_ram_update, frame_index, cfg.delta)
    drm_elapsed = _interval_elapsed(state.last_drm_update, frame_index, cfg.delta)

    variant = cfg.variant
    if variant == VARIANT_SAM21_BASELINE:
        update_ram = True
    elif variant == VARIANT_PRES:
        update_ram = True
    else:
        update_ram = ram_elapsed

    if variant == VARIANT_DRM1:
        update_drm = drm_elapsed and is_stable
    elif variant == VARIANT_DRM2:
        update_drm = drm_elapsed and is_anchor
    elif variant == VARIANT_DAM_FULL:
        update_drm = drm_elapsed and is_anchor and is_stable
    else:
        update_drm = False

    set_latest = variant in _DELTA_GATED and cfg.include_latest_in_ram

    reasons = []
    interval_blocked = (variant in _DELTA_GATED and not ram_elapsed) or (
        variant in _DRM_CAPABLE and not drm_elapsed
    )
    if interval_blocked:
        reasons.append(REASON_INTERVAL)
    if is_anchor:
        reasons.append(REASON_ANCHOR)
    if not iou_ok:
        reasons.append(REASON_UNSTABLE_IOU)
    if not area_ok:
        reasons.append(REASON_UNSTABLE_AREA)

    return UpdateDecision(
        update_ram=update_ram,
        update_drm=update_drm,
        set_latest=set_latest,
        anchor_ratio=ratio,
        reasons=tuple(reasons),
    )


def apply_decision(
    state: PolicyState, frame_index: int, decision: UpdateDecision, output_area: int
) -> None:
    """Commit a decision: advance the update counters and the area history.

    The history admits only non-empty output areas, so stability can never
    hold across start-up or flickering-absence stretches.
    """
    if decision.update_ram:
        state.last_ram_update = frame_index
    if decision.update_drm:
        state.last_drm_update = frame_index
    if output_area > 0:
        state.area_history.append(output_area)
