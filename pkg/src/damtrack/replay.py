"""Offline trace files and the replay predictor.

A trace is a line-delimited UTF-8 file: one header object carrying the
frame dimensions and the initialization mask, then one object per tracked
frame with the three recorded candidates and optional ground truth. Masks
travel as canonical run-length lists, so traces are diff- and hash-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Union

from .masks import BBox, BinaryMask, rle_decode, rle_encode
from .membank import MemoryView
from .tracker import NUM_CANDIDATES, CandidateSet

TRACE_FORMAT = "damtrack-trace"
TRACE_VERSION = 1


class TraceError(ValueError):
    """Malformed trace content."""


@dataclass(frozen=True)
class FrameRecord:
    """One trace row."""

    frame_index: int
    width: int
    height: int
    candidates: CandidateSet
    gt_mask: Optional[BinaryMask] = None
    gt_box: Optional[BBox] = None


@dataclass
class Trace:
    """Parsed trace: initialization plus the recorded frame stream."""

    width: int
    height: int
    init_mask: BinaryMask
    records: list[FrameRecord]

    @property
    def num_frames(self) -> int:
        """Total frame count including the initialization frame."""
        if not self.records:
            return 1
        return self.records[-1].frame_index + 1

    def gt_masks(self) -> list[Optional[BinaryMask]]:
        """Ground-truth masks for frames 1..N-1 (None where unannotated)."""
        return [r.gt_mask for r in self.records]

    def gt_boxes(self) -> list[Optional[BBox]]:
        return [r.gt_box for r in self.records]


def _record_to_json(rec: FrameRecord) -> dict:
    return {
        "type": "frame",
        "frame_index": rec.frame_index,
        "width": rec.width,
        "height": rec.height,
        "candidates": [
            {"runs": rle_encode(m), "score": s}
            for m, s in zip(rec.candidates.masks, rec.candidates.scores)
        ],
        "gt_mask": rle_encode(rec.gt_mask) if rec.gt_mask is not None else None,
        "gt_box": [rec.gt_box.x_min, rec.gt_box.y_min, rec.gt_box.x_max, rec.gt_box.y_max]
        if rec.gt_box is not None
        else None,
    }


def write_trace(path_or_file: Union[str, IO[str]], trace: Trace) -> None:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        header = {
            "type": "header",
            "format": TRACE_FORMAT,
            "version": TRACE_VERSION,
            "width": trace.width,
            "height": trace.height,
            "init_mask": rle_encode(trace.init_mask),
        }
        fh.write(json.dumps(header) + "\n")
        for rec in trace.records:
            fh.write(json.dumps(_record_to_json(rec)) + "\n")
    finally:
        if own:
            fh.close()


def _parse_record(obj: dict, width: int, height: int, line_no: int) -> FrameRecord:
    try:
        t = obj["frame_index"]
        rw, rh = obj["width"], obj["height"]
        raw_cands = obj["candidates"]
    except KeyError as exc:
        raise TraceError(f"line {line_no}: missing field {exc}") from exc
    if (rw, rh) != (width, height):
        raise TraceError(f"line {line_no}: dimensions {rw}x{rh} differ from header {width}x{height}")
    if not isinstance(raw_cands, list) or len(raw_cands) != NUM_CANDIDATES:
        raise TraceError(f"line {line_no}: expected {NUM_CANDIDATES} candidates")
    masks = []
    scores = []
    for c in raw_cands:
        try:
            masks.append(rle_decode(width, height, c["runs"]))
            scores.append(float(c["score"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"line {line_no}: bad candidate: {exc}") from exc
    gt_mask = None
    if obj.get("gt_mask") is not None:
        try:
            gt_mask = rle_decode(width, height, obj["gt_mask"])
        except ValueError as exc:
            raise TraceError(f"line {line_no}: bad gt_mask: {exc}") from exc
    gt_box = None
    if obj.get("gt_box") is not None:
        vals = obj["gt_box"]
        if not isinstance(vals, list) or len(vals) != 4:
            raise TraceError(f"line {line_no}: gt_box must be [x_min, y_min, x_max, y_max]")
        try:
            gt_box = BBox(*(int(v) for v in vals))
        except ValueError as exc:
            raise TraceError(f"line {line_no}: bad gt_box: {exc}") from exc
    try:
        cands = CandidateSet(tuple(masks), tuple(scores))
    except ValueError as exc:
        raise TraceError(f"line {line_no}: {exc}") from exc
    return FrameRecord(int(t), width, height, cands, gt_mask, gt_box)


def read_trace(path_or_file: Union[str, IO[str]]) -> Trace:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    finally:
        if own:
            fh.close()
    if not lines:
        raise TraceError("empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceError(f"header is not valid JSON: {exc}") from exc
    if header.get("type") != "header" or header.get("format") != TRACE_FORMAT:
        raise TraceError("first line must be a damtrack-trace header")
    try:
        width, height = int(header["width"]), int(header["height"])
        init_mask = rle_decode(width, height, header["init_mask"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceError(f"bad header: {exc}") from exc
    if init_mask.is_empty:
        raise TraceError("initialization mask in header is empty")

    records = []
    last_index = 0
    for line_no, ln in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {line_no}: invalid JSON: {exc}") from exc
        if obj.get("type") != "frame":
            raise TraceError(f"line {line_no}: expected a frame record")
        rec = _parse_record(obj, width, height, line_no)
        if rec.frame_index <= last_index:
            raise TraceError(
                f"line {line_no}: frame indices must be strictly increasing "
                f"({rec.frame_index} after {last_index})"
            )
        last_index = rec.frame_index
        records.append(rec)
    return Trace(width, height, init_mask, records)


class ReplayPredictor:
    """Serves recorded candidate sets, ignoring the memory view."""

    def __init__(self, trace: Trace) -> None:
        self._trace = trace
        self._by_index = {r.frame_index: r for r in trace.records}

    @property
    def width(self) -> int:
        return self._trace.width

    @property
    def height(self) -> int:
        return self._trace.height

    @property
    def num_frames(self) -> int:
        return self._trace.num_frames

    def predict(self, frame_index: int, view: MemoryView) -> CandidateSet:
        rec = self._by_index.get(frame_index)
        if rec is None:
            raise TraceError(f"trace has no frame {frame_index}")
        return rec.candidates


class RecordingPredictor:
    """Wraps a predictor and captures every candidate set for trace export."""

    def __init__(self, inner) -> None:
        self._inner = inner
        self.recorded: list[tuple[int, CandidateSet]] = []

    @property
    def width(self) -> int:
        return self._inner.width

    @property
    def height(self) -> int:
        return self._inner.height

    @property
    def num_frames(self) -> int:
        return self._inner.num_frames

    def predict(self, frame_index: int, view: MemoryView) -> CandidateSet:
        cands = self._inner.predict(frame_index, view)
        self.recorded.append((frame_index, cands))
        return cands

    def to_trace(
        self,
        init_mask: BinaryMask,
        gt_masks: Optional[Iterable[Optional[BinaryMask]]] = None,
        gt_boxes: Optional[Iterable[Optional[BBox]]] = None,
    ) -> Trace:
        """Assemble a trace from the capture; gt streams align with frames 1..N-1."""
        gt_mask_list = list(gt_masks) if gt_masks is not None else [None] * len(self.recorded)
        gt_box_list = list(gt_boxes) if gt_boxes is not None else [None] * len(self.recorded)
        records = [
            FrameRecord(t, self.width, self.height, cands, gm, gb)
            for (t, cands), gm, gb in zip(self.recorded, gt_mask_list, gt_box_list)
        ]
        return Trace(self.width, self.height, init_mask, records)
