"""Distractor-presence criterion over dense feature maps.

Each feature-grid cell gets a distractor score: its mean cosine similarity
to the cells inside the ground-truth target region. A frame contains a
non-negligible distractor when clearly target-like cells outside the region
outnumber half of those inside (ratio threshold 0.5), and a sequence is
selected once at least a third of its frames pass.

The similarity reading is deliberate: scoring by literal cosine distance
would rank target-like pixels lowest and invert the criterion. The literal
mode stays available behind ``use_distance`` for comparison.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import IO, Sequence, Union

import numpy as np

from .masks import BinaryMask

_HEADER = struct.Struct("<III")


@dataclass(frozen=True)
class DistillConfig:
    ratio_threshold: float = 0.5
    frame_fraction: float = 1.0 / 3.0
    use_distance: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.ratio_threshold <= 1:
            raise ValueError("ratio_threshold must be in (0, 1]")
        if not 0 < self.frame_fraction <= 1:
            raise ValueError("frame_fraction must be in (0, 1]")


class FeatureMap:
    """Dense per-cell feature vectors on a width x height grid."""

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray) -> None:
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"feature map must be (height, width, dim), got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("feature values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def dim(self) -> int:
        return int(self.values.shape[2])


def _check_grid(f: FeatureMap, gt: BinaryMask) -> None:
    if (gt.width, gt.height) != (f.width, f.height):
        raise ValueError(
            f"ground truth is {gt.width}x{gt.height}, feature grid is {f.width}x{f.height}"
        )
    if gt.is_empty:
        raise ValueError("ground-truth region must be non-empty")


def pixel_scores(f: FeatureMap, gt: BinaryMask, use_distance: bool = False) -> np.ndarray:
    """Distractor score per cell: mean cosine similarity to the target cells.

    Zero-norm vectors contribute similarity 0 to any pairing. With
    ``use_distance`` the literal cosine-distance average (1 - similarity) is
    returned instead.
    """
    _check_grid(f, gt)
    vals = f.values
    norms = np.linalg.norm(vals, axis=2, keepdims=True)
    unit = np.divide(vals, norms, out=np.zeros_like(vals), where=norms > 0)
    centroid = unit[gt.bits].mean(axis=0)
    scores = unit @ centroid
    if use_distance:
        scores = 1.0 - scores
    return scores


def frame_has_distractor(scores: np.ndarray, gt: BinaryMask, cfg: DistillConfig) -> bool:
    """Classify one frame from its score map.

    The cutoff is the mean score inside the target region (computed per
    frame). Cells strictly above it are counted inside and outside the
    region; the frame passes when outside strictly outnumbers
    ratio_threshold times inside. A region with no above-cutoff cells passes
    whenever anything outside clears the cutoff.
    """
    if scores.shape != gt.bits.shape:
        raise ValueError("score map and ground truth dimensions differ")
    if gt.is_empty:
        raise ValueError("ground-truth region must be non-empty")
    inside = scores[gt.bits]
    theta = inside.mean()
    n_in = int((inside > theta).sum())
    n_out = int((scores[~gt.bits] > theta).sum())
    if n_in == 0:
        return n_out > 0
    return n_out / n_in > cfg.ratio_threshold


def evaluate_frame(f: FeatureMap, gt: BinaryMask, cfg: DistillConfig) -> bool:
    """Convenience wrapper: score the frame and classify it in one call."""
    return frame_has_distractor(pixel_scores(f, gt, cfg.use_distance), gt, cfg)


def sequence_selected(frame_flags: Sequence[bool], cfg: DistillConfig) -> bool:
    """A sequence qualifies when at least frame_fraction of frames passed."""
    if not frame_flags:
        raise ValueError("cannot select from an empty frame list")
    return sum(1 for x in frame_flags if x) / len(frame_flags) >= cfg.frame_fraction


def rasterize_box(width: int, height: int, box: Sequence[float]) -> BinaryMask:
    """Rasterize a continuous-coordinate box onto the feature grid.

    A cell belongs to the region when its center lies within the closed box
    [x_min, x_max] x [y_min, y_max].
    """
    if len(box) != 4:
        raise ValueError("box must be [x_min, y_min, x_max, y_max]")
    x_min, y_min, x_max, y_max = (float(v) for v in box)
    cx = np.arange(width) + 0.5
    cy = np.arange(height) + 0.5
    inside_x = (cx >= x_min) & (cx <= x_max)
    inside_y = (cy >= y_min) & (cy <= y_max)
    return BinaryMask(np.outer(inside_y, inside_x))


def write_feature_map(path_or_file: Union[str, IO[bytes]], f: FeatureMap) -> None:
    """Write the binary container: width/height/dim header, then float32 LE cells."""
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "wb") if own else path_or_file
    try:
        fh.write(_HEADER.pack(f.width, f.height, f.dim))
        fh.write(f.values.astype("<f4").tobytes(order="C"))
    finally:
        if own:
            fh.close()


def read_feature_map(path_or_file: Union[str, IO[bytes]]) -> FeatureMap:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "rb") if own else path_or_file
    try:
        raw = fh.read()
    finally:
        if own:
            fh.close()
    if len(raw) < _HEADER.size:
        raise ValueError("feature container too short for its header")
    width, height, dim = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 4 * width * height * dim
    if len(raw) != expected:
        raise ValueError(f"feature container is {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    return FeatureMap(data.reshape(height, width, dim))


def write_feature_text(path_or_file: Union[str, IO[str]], f: FeatureMap) -> None:
    """Line-delimited text form: a dimensions line, then one line per cell."""
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        fh.write(f"{f.width} {f.height} {f.dim}\n")
        flat = f.values.reshape(-1, f.dim)
        for row in flat:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    finally:
        if own:
            fh.close()


def read_feature_text(path_or_file: Union[str, IO[str]]) -> FeatureMap:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        lines = [ln.strip() for ln in fh if ln.strip()]
    finally:
        if own:
            fh.close()
    if not lines:
        raise ValueError("empty feature text file")
    try:
        width, height, dim = (int(v) for v in lines[0].split())
    except ValueError as exc:
        raise ValueError(f"bad dimensions line: {lines[0]!r}") from exc
    cells = lines[1:]
    if len(cells) != width * height:
        raise ValueError(f"expected {width * height} cell lines, found {len(cells)}")
    rows = []
    for ln in cells:
        parts = ln.split()
        if len(parts) != dim:
            raise ValueError(f"cell line has {len(parts)} values, expected {dim}")
        rows.append([float(v) for v in parts])
    return FeatureMap(np.asarray(rows).reshape(height, width, dim))


def read_features(path: str) -> FeatureMap:
    """Load a feature map, sniffing the binary container first."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) == _HEADER.size:
        width, height, dim = _HEADER.unpack(raw)
        if os.path.getsize(path) == _HEADER.size + 4 * width * height * dim:
            return read_feature_map(path)
    return read_feature_text(path)
