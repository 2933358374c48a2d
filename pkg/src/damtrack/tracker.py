"""Per-sequence tracking loop and the real-time replay wrapper.

The loop is strictly sequential: each frame's prediction depends on the
memory state left behind by the previous frame. Given the same predictor
and configuration, :func:`run_sequence` is fully deterministic, so results
can be hashed, diffed, and replayed bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .masks import BinaryMask, area, rle_encode
from .membank import (
    KIND_DRM,
    KIND_INIT,
    KIND_RAM,
    KIND_RAM_LATEST,
    BankConfig,
    MemoryEntry,
    MemoryView,
    init_bank,
)
from .policy import PolicyConfig, PolicyState, UpdateDecision, apply_decision, decide, target_present

NUM_CANDIDATES = 3


class TrackerError(RuntimeError):
    """Raised when a sequence run cannot continue (with frame context)."""


@dataclass(frozen=True)
class CandidateSet:
    """One frame's prediction: three mask hypotheses with predicted-IoU scores."""

    masks: tuple[BinaryMask, ...]
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.masks) != NUM_CANDIDATES or len(self.scores) != NUM_CANDIDATES:
            raise ValueError(f"a candidate set holds exactly {NUM_CANDIDATES} masks and scores")
        shape = self.masks[0].bits.shape
        for m in self.masks[1:]:
            if m.bits.shape != shape:
                raise ValueError("candidate masks must share dimensions")
        for s in self.scores:
            if not 0.0 <= s <= 1.0 or not math.isfinite(s):
                raise ValueError(f"candidate score {s} outside [0, 1]")

    @property
    def width(self) -> int:
        return self.masks[0].width

    @property
    def height(self) -> int:
        return self.masks[0].height


class Predictor(Protocol):
    """Anything that can produce candidate sets for a frame stream."""

    @property
    def width(self) -> int: ...

    @property
    def height(self) -> int: ...

    @property
    def num_frames(self) -> int: ...

    def predict(self, frame_index: int, view: MemoryView) -> CandidateSet: ...


def select_output(c: CandidateSet) -> int:
    """Index of the highest-scoring candidate; ties go to the lowest index."""
    best = 0
    for i in range(1, NUM_CANDIDATES):
        if c.scores[i] > c.scores[best]:
            best = i
    return best


@dataclass(frozen=True)
class FrameResult:
    """One output row: chosen mask, decision record, and the memory-view digest."""

    frame_index: int
    mask: BinaryMask
    chosen_index: Optional[int]
    decision: Optional[UpdateDecision]
    view_digest: Optional[list]
    processed: bool = True

    def to_json(self) -> dict:
        return {
            "type": "frame",
            "frame_index": self.frame_index,
            "mask": rle_encode(self.mask),
            "chosen_index": self.chosen_index,
            "decision": self.decision.to_json() if self.decision else None,
            "view": self.view_digest,
            "processed": self.processed,
        }


@dataclass
class TrackingResult:
    """Per-frame outputs for one sequence, frame 0 (initialization) included."""

    width: int
    height: int
    frames: list[FrameResult]

    def masks(self) -> list[BinaryMask]:
        return [f.mask for f in self.frames]

    def decisions(self) -> list[Optional[UpdateDecision]]:
        return [f.decision for f in self.frames]


def run_sequence(
    predictor: Predictor,
    init_mask: BinaryMask,
    policy_cfg: PolicyConfig,
    bank_cfg: BankConfig,
) -> TrackingResult:
    """Track one sequence: query, select, decide, update memory, log.

    Frame 0 is the initialization frame; frames 1..num_frames-1 are
    predicted. Memory is updated strictly after output selection, and the
    logged view digest is the snapshot the predictor actually saw.
    """
    if init_mask.is_empty:
        raise TrackerError("initialization mask must be non-empty")
    if (init_mask.width, init_mask.height) != (predictor.width, predictor.height):
        raise TrackerError(
            f"initialization mask is {init_mask.width}x{init_mask.height}, "
            f"predictor expects {predictor.width}x{predictor.height}"
        )

    bank = init_bank(bank_cfg, MemoryEntry(0, init_mask, KIND_INIT, 0))
    state = PolicyState.for_config(policy_cfg)
    frames = [
        FrameResult(0, init_mask, None, None, bank.memory_view().digest())
    ]

    for t in range(1, predictor.num_frames):
        view = bank.memory_view()
        try:
            cands = predictor.predict(t, view)
        except TrackerError:
            raise
        except Exception as exc:
            raise TrackerError(f"predictor failed at frame {t}: {exc}") from exc
        if (cands.width, cands.height) != (init_mask.width, init_mask.height):
            raise TrackerError(
                f"dimension drift at frame {t}: got {cands.width}x{cands.height}"
            )
        _step(bank, state, policy_cfg, frames, t, cands, view)

    return TrackingResult(init_mask.width, init_mask.height, frames)


def _step(bank, state, policy_cfg, frames, t, cands, view) -> None:
    sel = select_output(cands)
    decision = decide(t, cands, sel, state, policy_cfg)
    out = cands.masks[sel]
    if decision.update_ram:
        bank.insert_ram(MemoryEntry(t, out, KIND_RAM, t))
    if decision.update_drm:
        bank.insert_drm(MemoryEntry(t, out, KIND_DRM, t))
    if decision.set_latest:
        bank.set_latest(MemoryEntry(t, out, KIND_RAM_LATEST, t))
    if not target_present(out):
        bank.clear_latest()
    apply_decision(state, t, decision, area(out))
    frames.append(FrameResult(t, out, sel, decision, view.digest()))


def rt_replay(
    predictor: Predictor,
    init_mask: BinaryMask,
    policy_cfg: PolicyConfig,
    bank_cfg: BankConfig,
    latencies_ms: Sequence[float],
    budget_fps: float,
) -> TrackingResult:
    """Run a sequence under a simulated real-time deadline.

    Frame t arrives at t * (1000 / budget_fps) ms on a simulated clock.
    While the tracker is still busy with an earlier frame at arrival time,
    the frame is skipped: its output is copied from the last completed
    prediction and it is never shown to the tracker or the memory.
    ``budget_fps=0`` disables deadlines entirely, which reproduces the
    offline run exactly.
    """
    n_pred = predictor.num_frames - 1
    if len(latencies_ms) != n_pred:
        raise TrackerError(
            f"need one latency per predicted frame: got {len(latencies_ms)}, expected {n_pred}"
        )
    if budget_fps < 0:
        raise TrackerError("budget_fps must be non-negative")
    period = math.inf if budget_fps == 0 else 1000.0 / budget_fps

    if init_mask.is_empty:
        raise TrackerError("initialization mask must be non-empty")
    if (init_mask.width, init_mask.height) != (predictor.width, predictor.height):
        raise TrackerError("initialization mask does not match predictor dimensions")

    bank = init_bank(bank_cfg, MemoryEntry(0, init_mask, KIND_INIT, 0))
    state = PolicyState.for_config(policy_cfg)
    frames = [
        FrameResult(0, init_mask, None, None, bank.memory_view().digest())
    ]

    free_at = 0.0
    last_mask = init_mask
    for t in range(1, predictor.num_frames):
        arrival = t * period
        if free_at > arrival:
            frames.append(FrameResult(t, last_mask, None, None, None, processed=False))
            continue
        view = bank.memory_view()
        try:
            cands = predictor.predict(t, view)
        except TrackerError:
            raise
        except Exception as exc:
            raise TrackerError(f"predictor failed at frame {t}: {exc}") from exc
        if (cands.width, cands.height) != (init_mask.width, init_mask.height):
            raise TrackerError(f"dimension drift at frame {t}")
        _step(bank, state, policy_cfg, frames, t, cands, view)
        last_mask = frames[-1].mask
        free_at = arrival + float(latencies_ms[t - 1])

    return TrackingResult(init_mask.width, init_mask.height, frames)


def processed_frame_indices(result: TrackingResult) -> list[int]:
    """Frame indices the tracker actually saw (initialization excluded)."""
    return [f.frame_index for f in result.frames[1:] if f.processed]
