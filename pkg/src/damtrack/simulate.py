"""Closed-loop blob-world simulator.

A scenario scripts rectangular blobs moving through an arena, each with a
fixed unit-norm appearance vector and a per-frame visibility flag. The blob
predictor scores every visible blob against the supplied memory view, which
closes the loop: what the tracker stored determines what it can tell apart
next. The canonical crossing scenario is built so the baseline
update-every-frame policy emerges from an occlusion locked onto the
distractor, while the full distractor-aware policy does not.

Scoring model (per visible blob b at frame t, given memory view V):

    fg_term(b)  = max over entries m in V of cos(app(b), app(fg(m)))
    bg_term(b)  = max over entries m in V, d in bg(m) of cos(app(b), app(d))
    s(b)        = fg_term(b) - bg_term(b)

where fg(m) is the blob whose rectangle (at m's frame) best overlaps m's
stored mask, and bg(m) are the blobs visible at m's frame whose rectangles
do not touch the stored mask at all. Entries holding an empty mask teach
nothing: no foreground, no background. Empty maxima contribute 0. Reported
scores are (s + 1) / 2 clamped to [0, 1]; a blob is only emitted as a
candidate mask while its raw score is positive, which is how a fully
suppressed or occluded target yields an empty prediction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Optional, Union

import numpy as np

from .masks import BinaryMask
from .membank import MemoryView
from .tracker import NUM_CANDIDATES, CandidateSet

_UNIT_TOL = 1e-6

CROSSING_DIVERGENCE_FRAME = 11


@dataclass(frozen=True)
class BlobFrame:
    """Scripted state of one blob at one frame: rectangle (x, y, w, h) or None."""

    rect: Optional[tuple[int, int, int, int]]
    visible: bool


@dataclass(frozen=True)
class Blob:
    blob_id: int
    appearance: tuple[float, ...]
    frames: tuple[BlobFrame, ...]


@dataclass(frozen=True)
class BlobScenario:
    """Arena plus per-blob scripts; the target blob supplies ground truth."""

    name: str
    width: int
    height: int
    target_id: int
    blobs: tuple[Blob, ...]
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.blobs:
            raise ValueError("scenario needs at least one blob")
        counts = {len(b.frames) for b in self.blobs}
        if len(counts) != 1:
            raise ValueError("all blobs must script the same number of frames")
        if next(iter(counts)) < 1:
            raise ValueError("scenario needs at least one frame")
        ids = [b.blob_id for b in self.blobs]
        if len(set(ids)) != len(ids):
            raise ValueError("blob ids must be unique")
        if self.target_id not in ids:
            raise ValueError(f"target blob {self.target_id} not in scenario")
        for b in self.blobs:
            norm = math.sqrt(sum(v * v for v in b.appearance))
            if abs(norm - 1.0) > _UNIT_TOL:
                raise ValueError(f"blob {b.blob_id} appearance is not unit-norm ({norm})")
            for i, bf in enumerate(b.frames):
                if bf.visible and bf.rect is None:
                    raise ValueError(f"blob {b.blob_id} visible without a rectangle at frame {i}")
                if bf.rect is not None:
                    x, y, w, h = bf.rect
                    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                        raise ValueError(
                            f"blob {b.blob_id} rectangle {bf.rect} outside "
                            f"{self.width}x{self.height} arena at frame {i}"
                        )
        target = self.blob(self.target_id)
        if not target.frames[0].visible:
            raise ValueError("target must be visible in the initialization frame")

    @property
    def num_frames(self) -> int:
        return len(self.blobs[0].frames)

    def blob(self, blob_id: int) -> Blob:
        for b in self.blobs:
            if b.blob_id == blob_id:
                return b
        raise KeyError(blob_id)

    def rect_mask(self, blob: Blob, frame_index: int) -> BinaryMask:
        bf = blob.frames[frame_index]
        if bf.rect is None:
            return BinaryMask.zeros(self.width, self.height)
        x, y, w, h = bf.rect
        return BinaryMask.from_rect(self.width, self.height, x, y, w, h)

    def init_mask(self) -> BinaryMask:
        return self.rect_mask(self.blob(self.target_id), 0)

    def gt_masks(self) -> list[BinaryMask]:
        """Target mask per frame 1..N-1, empty while the target is hidden."""
        target = self.blob(self.target_id)
        out = []
        for t in range(1, self.num_frames):
            if target.frames[t].visible:
                out.append(self.rect_mask(target, t))
            else:
                out.append(BinaryMask.zeros(self.width, self.height))
        return out


def _rect_overlap(rect: tuple[int, int, int, int], mask: BinaryMask) -> int:
    x, y, w, h = rect
    return int(mask.bits[y : y + h, x : x + w].sum())


class BlobPredictor:
    """Memory-conditioned candidate generator over a blob scenario."""

    def __init__(self, scenario: BlobScenario) -> None:
        self.scenario = scenario
        self._apps = {b.blob_id: np.asarray(b.appearance, dtype=float) for b in scenario.blobs}

    @property
    def width(self) -> int:
        return self.scenario.width

    @property
    def height(self) -> int:
        return self.scenario.height

    @property
    def num_frames(self) -> int:
        return self.scenario.num_frames

    def _entry_knowledge(self, entry_frame: int, mask: BinaryMask):
        """Foreground appearance and background appearances taught by one entry."""
        if mask.is_empty:
            return None, []
        sc = self.scenario
        best_id = None
        best_overlap = 0
        background = []
        for b in sorted(sc.blobs, key=lambda blob: blob.blob_id):
            bf = b.frames[entry_frame]
            if not bf.visible or bf.rect is None:
                continue
            ov = _rect_overlap(bf.rect, mask)
            if ov == 0:
                background.append(self._apps[b.blob_id])
            elif ov > best_overlap:
                best_id, best_overlap = b.blob_id, ov
        fg = self._apps[best_id] if best_id is not None else None
        return fg, background

    def raw_scores(self, frame_index: int, view: MemoryView) -> dict[int, float]:
        """Unclamped memory score per visible blob at the given frame."""
        sc = self.scenario
        fg_apps = []
        bg_apps = []
        for item in view:
            e = item.entry
            if e.frame_index >= sc.num_frames:
                continue
            fg, bg = self._entry_knowledge(e.frame_index, e.mask)
            if fg is not None:
                fg_apps.append(fg)
            bg_apps.extend(bg)

        scores: dict[int, float] = {}
        for b in sc.blobs:
            if not b.frames[frame_index].visible:
                continue
            app = self._apps[b.blob_id]
            fg_term = max((float(app @ f) for f in fg_apps), default=0.0)
            bg_term = max((float(app @ d) for d in bg_apps), default=0.0)
            scores[b.blob_id] = fg_term - bg_term
        return scores

    def predict(self, frame_index: int, view: MemoryView) -> CandidateSet:
        raw = self.raw_scores(frame_index, view)
        segmentable = sorted(
            ((s, bid) for bid, s in raw.items() if s > 0.0),
            key=lambda pair: (-pair[0], pair[1]),
        )
        masks = []
        scores = []
        for s, bid in segmentable[:NUM_CANDIDATES]:
            masks.append(self.scenario.rect_mask(self.scenario.blob(bid), frame_index))
            scores.append(min(1.0, max(0.0, (s + 1.0) / 2.0)))
        while len(masks) < NUM_CANDIDATES:
            masks.append(BinaryMask.zeros(self.width, self.height))
            scores.append(0.0)
        return CandidateSet(tuple(masks), tuple(scores))


def blob_predictor(scenario: BlobScenario) -> BlobPredictor:
    return BlobPredictor(scenario)


def _script(num_frames: int, spans: list[tuple[int, int, Optional[tuple[int, int, int, int]]]]) -> tuple[BlobFrame, ...]:
    """Expand (first, last, rect-or-None) spans into a per-frame script."""
    frames: list[BlobFrame] = [BlobFrame(None, False)] * num_frames
    for first, last, rect in spans:
        for t in range(first, last + 1):
            frames[t] = BlobFrame(rect, rect is not None)
    return tuple(frames)


def _unit(values) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=float)
    return tuple(arr / np.linalg.norm(arr))


def canonical_crossing_scenario() -> BlobScenario:
    """Fixed target/distractor crossing with a three-frame full occlusion.

    The distractor shares most of the target's appearance (cosine 0.9) and a
    lower blob id, so a memory that cannot tell them apart resolves the
    post-occlusion tie in the distractor's favor. One divergence frame
    (frame 11, separated blobs) is the only anchor opportunity; afterwards
    the distractor overlaps the target, hides with it, and re-emerges one
    frame earlier on the swapped side.
    """
    n = 26
    cos_sim = 0.9
    u = (1.0, 0.0)
    v = _unit((cos_sim, math.sqrt(1.0 - cos_sim * cos_sim)))

    target = Blob(
        blob_id=1,
        appearance=u,
        frames=_script(
            n,
            [
                (0, 16, (12, 19, 10, 10)),
                (20, 25, (40, 19, 10, 10)),
            ],
        ),
    )
    distractor = Blob(
        blob_id=0,
        appearance=v,
        frames=_script(
            n,
            [
                (11, 11, (34, 19, 10, 10)),
                (12, 16, (14, 19, 10, 10)),
                (19, 25, (12, 19, 10, 10)),
            ],
        ),
    )
    return BlobScenario(
        name="crossing",
        width=64,
        height=48,
        target_id=1,
        blobs=(distractor, target),
    )


def _crossing_variant(rng: np.random.Generator, name: str) -> BlobScenario:
    """Crossing motif with jittered geometry; defeats the baseline policy."""
    n = 26
    cos_sim = float(rng.uniform(0.86, 0.94))
    u = (1.0, 0.0)
    v = _unit((cos_sim, math.sqrt(1.0 - cos_sim * cos_sim)))
    y = int(rng.integers(12, 26))
    size = int(rng.integers(8, 12))
    left = int(rng.integers(4, 10))
    right = left + size + 12 + int(rng.integers(0, 6))

    target = Blob(
        1,
        u,
        _script(n, [(0, 16, (left, y, size, size)), (20, 25, (right, y, size, size))]),
    )
    distractor = Blob(
        0,
        v,
        _script(
            n,
            [
                (11, 11, (right, y, size, size)),
                (12, 16, (left + 2, y, size, size)),
                (19, 25, (left, y, size, size)),
            ],
        ),
    )
    return BlobScenario(name, 72, 48, 1, (distractor, target), seed=None)


def _long_overlap(rng: np.random.Generator, name: str) -> BlobScenario:
    """Seven overlapped frames after divergence flush every-present-frame
    windows (baseline and presence-only), while interval-sampled memories keep
    the divergence frame."""
    n = 32
    cos_sim = float(rng.uniform(0.86, 0.94))
    u = (1.0, 0.0)
    v = _unit((cos_sim, math.sqrt(1.0 - cos_sim * cos_sim)))
    y = int(rng.integers(12, 26))

    target = Blob(
        1,
        u,
        _script(n, [(0, 18, (12, y, 10, 10)), (23, 31, (40, y, 10, 10))]),
    )
    distractor = Blob(
        0,
        v,
        _script(
            n,
            [
                (11, 11, (34, y, 10, 10)),
                (12, 18, (14, y, 10, 10)),
                (21, 31, (12, y, 10, 10)),
            ],
        ),
    )
    return BlobScenario(name, 64, 48, 1, (distractor, target), seed=None)


def _marathon(rng: np.random.Generator, name: str) -> BlobScenario:
    """Long distractor-free stretch after the divergence frame; sparse RAM
    windows eventually evict the divergence frame, the anchor memory keeps it."""
    n = 58
    cos_sim = float(rng.uniform(0.86, 0.94))
    u = (1.0, 0.0)
    v = _unit((cos_sim, math.sqrt(1.0 - cos_sim * cos_sim)))
    y = int(rng.integers(12, 26))

    target = Blob(
        1,
        u,
        _script(n, [(0, 45, (12, y, 10, 10)), (50, 57, (40, y, 10, 10))]),
    )
    distractor = Blob(
        0,
        v,
        _script(
            n,
            [
                (11, 11, (34, y, 10, 10)),
                (48, 57, (12, y, 10, 10)),
            ],
        ),
    )
    return BlobScenario(name, 64, 48, 1, (distractor, target), seed=None)


def _churn(rng: np.random.Generator, name: str) -> BlobScenario:
    """Weakly similar distractor keeps tracking 'reliable', so a
    stability-only anchor buffer churns and loses its one critical frame."""
    n = 40
    cos_sim = float(rng.uniform(0.26, 0.34))
    u = (1.0, 0.0)
    v = _unit((cos_sim, math.sqrt(1.0 - cos_sim * cos_sim)))
    y = int(rng.integers(12, 26))

    target = Blob(
        1,
        u,
        _script(n, [(0, 29, (12, y, 10, 10)), (34, 39, (40, y, 10, 10))]),
    )
    distractor = Blob(
        0,
        v,
        _script(
            n,
            [
                (11, 11, (34, y, 10, 10)),
                (32, 39, (12, y, 10, 10)),
            ],
        ),
    )
    return BlobScenario(name, 64, 48, 1, (distractor, target), seed=None)


def _flicker(rng: np.random.Generator, name: str) -> BlobScenario:
    """One-frame target dropout with two decoys; updating on divergence alone
    memorizes a wrong-object frame that later hijacks tracking."""
    n = 40
    # Orthogonal decoys, moderately target-like; the true distractor is
    # halfway similar so the anchor frame does not bury the target itself.
    u = np.array([1.0, 0.0, 0.0, 0.0])
    v_d = np.array([0.5, math.sqrt(0.75), 0.0, 0.0])
    a_e = 0.45
    x2 = (0.0 - v_d[0] * a_e) / v_d[1]
    v_e = np.array([a_e, x2, math.sqrt(1.0 - a_e * a_e - x2 * x2), 0.0])
    a_f = 0.4
    x3 = -(v_e[0] * a_f) / v_e[2]
    v_f = np.array([a_f, 0.0, x3, math.sqrt(1.0 - a_f * a_f - x3 * x3)])

    y = int(rng.integers(12, 24))
    p = 18  # dropout frame, off the delta grid (updates land on 1, 6, 11, 16, 21, ...)
    b = 30  # decoy E returns while the target is visible

    target = Blob(
        2,
        _unit(u),
        _script(n, [(0, p - 1, (12, y, 10, 10)), (p + 1, n - 1, (12, y, 10, 10))]),
    )
    distractor = Blob(
        0,
        _unit(v_d),
        _script(n, [(11, 11, (34, y, 10, 10))]),
    )
    decoy_e = Blob(
        1,
        _unit(v_e),
        _script(n, [(p, p, (30, y, 6, 6)), (b, n - 1, (40, y, 6, 6))]),
    )
    decoy_f = Blob(
        3,
        _unit(v_f),
        _script(n, [(p, p, (50, y, 6, 6))]),
    )
    return BlobScenario(name, 64, 48, 2, (distractor, decoy_e, target, decoy_f), seed=None)


def _calm(rng: np.random.Generator, name: str) -> BlobScenario:
    """No distractor at all; every policy should track cleanly."""
    n = 24
    y = int(rng.integers(12, 26))
    xs = [int(6 + round(1.5 * t)) for t in range(n)]
    target = Blob(
        1,
        (1.0, 0.0),
        tuple(BlobFrame((xs[t], y, 10, 10), True) for t in range(n)),
    )
    return BlobScenario(name, 64, 48, 1, (target,), seed=None)


_MOTIFS = (_crossing_variant, _long_overlap, _marathon, _churn, _flicker, _calm)


def scenario_suite(count: int = 20, base_seed: int = 0) -> list[BlobScenario]:
    """Deterministic seeded suite cycling through the failure-mode motifs."""
    out = []
    for i in range(count):
        seed = base_seed + i
        rng = np.random.default_rng(seed)
        builder = _MOTIFS[i % len(_MOTIFS)]
        sc = builder(rng, f"{builder.__name__.lstrip('_')}-{seed}")
        out.append(
            BlobScenario(sc.name, sc.width, sc.height, sc.target_id, sc.blobs, seed=seed)
        )
    return out


def scenario_to_json(sc: BlobScenario) -> dict:
    return {
        "type": "scenario",
        "name": sc.name,
        "width": sc.width,
        "height": sc.height,
        "target_id": sc.target_id,
        "seed": sc.seed,
        "blobs": [
            {
                "id": b.blob_id,
                "appearance": list(b.appearance),
                "frames": [
                    {"rect": list(f.rect) if f.rect else None, "visible": f.visible}
                    for f in b.frames
                ],
            }
            for b in sc.blobs
        ],
    }


def scenario_from_json(obj: dict) -> BlobScenario:
    try:
        blobs = tuple(
            Blob(
                blob_id=int(b["id"]),
                appearance=tuple(float(v) for v in b["appearance"]),
                frames=tuple(
                    BlobFrame(tuple(int(v) for v in f["rect"]) if f.get("rect") else None, bool(f["visible"]))
                    for f in b["frames"]
                ),
            )
            for b in obj["blobs"]
        )
        return BlobScenario(
            name=str(obj.get("name", "scenario")),
            width=int(obj["width"]),
            height=int(obj["height"]),
            target_id=int(obj["target_id"]),
            blobs=blobs,
            seed=obj.get("seed"),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scenario document: {exc}") from exc


def write_scenario(path_or_file: Union[str, IO[str]], sc: BlobScenario) -> None:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        json.dump(scenario_to_json(sc), fh, indent=2)
        fh.write("\n")
    finally:
        if own:
            fh.close()


def read_scenario(path_or_file: Union[str, IO[str]]) -> BlobScenario:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"scenario file is not valid JSON: {exc}") from exc
    finally:
        if own:
            fh.close()
    return scenario_from_json(obj)
