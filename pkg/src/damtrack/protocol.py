"""Line-delimited wire protocol shared with external model bridges.

Messages are single-line JSON objects with a ``type`` tag: ``init`` carries
the frame dimensions, initialization mask and configuration; ``predict``
carries a frame index plus the memory-view directive (kinds, frame indices,
temporal ranks); the peer answers with ``prediction`` (three RLE masks with
scores) or ``error``. The external process owns pixel data and caches its
per-frame embeddings keyed by frame index; after ``init`` the core never
sends pixels.
"""

from __future__ import annotations

import json
import subprocess
from typing import Optional, Sequence

from .masks import BinaryMask, rle_decode, rle_encode
from .membank import ENTRY_KINDS, MemoryView
from .tracker import NUM_CANDIDATES, CandidateSet

MSG_INIT = "init"
MSG_PREDICT = "predict"
MSG_PREDICTION = "prediction"
MSG_SHUTDOWN = "shutdown"
MSG_ERROR = "error"


class ProtocolError(RuntimeError):
    """Violation of the wire protocol by either peer."""


def encode_message(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def init_message(width: int, height: int, init_mask: BinaryMask, config: dict) -> dict:
    return {
        "type": MSG_INIT,
        "width": width,
        "height": height,
        "init_rle": rle_encode(init_mask),
        "config": config,
    }


def predict_message(frame_index: int, view: MemoryView) -> dict:
    return {
        "type": MSG_PREDICT,
        "frame_index": frame_index,
        "memory_view": view.digest(),
    }


def shutdown_message() -> dict:
    return {"type": MSG_SHUTDOWN}


def error_message(message: str) -> dict:
    return {"type": MSG_ERROR, "message": message}


def parse_message(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"message is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "type" not in obj:
        raise ProtocolError("message must be an object with a 'type' tag")
    return obj


def validate_memory_view_payload(items) -> None:
    if not isinstance(items, list):
        raise ProtocolError("memory_view must be a list")
    for it in items:
        if not isinstance(it, dict):
            raise ProtocolError("memory_view entries must be objects")
        if not isinstance(it.get("frame_index"), int) or it["frame_index"] < 0:
            raise ProtocolError("memory_view entry needs a non-negative frame_index")
        if it.get("kind") not in ENTRY_KINDS:
            raise ProtocolError(f"unknown memory entry kind {it.get('kind')!r}")
        rank = it.get("temporal_rank")
        if rank is not None and (not isinstance(rank, int) or rank < 0):
            raise ProtocolError("temporal_rank must be null or a non-negative integer")


def parse_prediction(obj: dict, width: int, height: int) -> CandidateSet:
    """Validate a prediction message and decode it into a candidate set."""
    if obj.get("type") != MSG_PREDICTION:
        raise ProtocolError(f"expected a prediction message, got {obj.get('type')!r}")
    cands = obj.get("candidates")
    if not isinstance(cands, list) or len(cands) != NUM_CANDIDATES:
        raise ProtocolError(f"prediction must carry exactly {NUM_CANDIDATES} candidates")
    masks = []
    scores = []
    for c in cands:
        if not isinstance(c, dict):
            raise ProtocolError("candidates must be objects with rle and score")
        try:
            masks.append(rle_decode(width, height, c["rle"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad candidate rle: {exc}") from exc
        score = c.get("score")
        if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
            raise ProtocolError(f"candidate score {score!r} outside [0, 1]")
        scores.append(float(score))
    return CandidateSet(tuple(masks), tuple(scores))


class ProcessPredictor:
    """Predictor backed by an external process speaking the wire protocol.

    The subprocess is spawned immediately and receives the init message;
    stderr is inherited so bridge diagnostics stay visible. One request is
    in flight at a time.
    """

    def __init__(
        self,
        argv: Sequence[str],
        width: int,
        height: int,
        num_frames: int,
        init_mask: BinaryMask,
        config: Optional[dict] = None,
    ) -> None:
        if num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        self._width = width
        self._height = height
        self._num_frames = num_frames
        self._proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._send(init_message(width, height, init_mask, config or {}))

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    @property
    def num_frames(self) -> int:
        return self._num_frames

    def _send(self, obj: dict) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(encode_message(obj))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"bridge process is gone: {exc}") from exc

    def _recv(self) -> dict:
        assert self._proc.stdout is not None
        line = self._proc.stdout.readline()
        if not line:
            code = self._proc.poll()
            raise ProtocolError(f"bridge closed the stream (exit code {code})")
        return parse_message(line)

    def predict(self, frame_index: int, view: MemoryView) -> CandidateSet:
        self._send(predict_message(frame_index, view))
        reply = self._recv()
        if reply.get("type") == MSG_ERROR:
            raise ProtocolError(f"bridge error at frame {frame_index}: {reply.get('message')}")
        return parse_prediction(reply, self._width, self._height)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._send(shutdown_message())
            except ProtocolError:
                pass
            # Closing our end of the pipe lets peers that wait for EOF exit.
            if self._proc.stdin:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        elif self._proc.stdin:
            self._proc.stdin.close()
        if self._proc.stdout:
            self._proc.stdout.close()

    def __enter__(self) -> "ProcessPredictor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
