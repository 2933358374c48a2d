"""Pure geometry kernels over binary masks.

Everything here is deterministic and side-effect free: masks are immutable
after construction, so values can be shared freely across threads. The
run-length codec defined at the bottom is the only wire format for masks;
its canonical form keeps file diffs and content hashes stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class BinaryMask:
    """Immutable 2-D bit grid, stored row-major as a boolean array."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray) -> None:
        arr = np.array(bits, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def is_empty(self) -> bool:
        return not bool(self.bits.any())

    def same_shape(self, other: "BinaryMask") -> bool:
        return self.bits.shape == other.bits.shape

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_points(cls, width: int, height: int, points: Iterable[tuple[int, int]]) -> "BinaryMask":
        """Build a mask with bits set at the given (x, y) coordinates."""
        arr = np.zeros((height, width), dtype=bool)
        for x, y in points:
            if not (0 <= x < width and 0 <= y < height):
                raise ValueError(f"point ({x}, {y}) outside {width}x{height} grid")
            arr[y, x] = True
        return cls(arr)

    @classmethod
    def from_rect(cls, width: int, height: int, x: int, y: int, w: int, h: int) -> "BinaryMask":
        """Build a mask with a filled w x h rectangle whose top-left corner is (x, y)."""
        if w < 0 or h < 0:
            raise ValueError("rectangle extents must be non-negative")
        if w > 0 and h > 0 and not (0 <= x and x + w <= width and 0 <= y and y + h <= height):
            raise ValueError(f"rectangle ({x},{y},{w},{h}) outside {width}x{height} grid")
        arr = np.zeros((height, width), dtype=bool)
        arr[y : y + h, x : x + w] = True
        return cls(arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash((self.bits.shape, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, area={area(self)})"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box over pixel indices, all bounds inclusive."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box {self}")

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)

    def union(self, other: "BBox") -> "BBox":
        return BBox(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )


def area(m: BinaryMask) -> int:
    """Number of set bits."""
    return int(m.bits.sum())


def bbox(m: BinaryMask) -> Optional[BBox]:
    """Tightest box containing all set bits, or None for an empty mask."""
    ys, xs = np.nonzero(m.bits)
    if xs.size == 0:
        return None
    return BBox(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


def _check_same_shape(a: BinaryMask, b: BinaryMask) -> None:
    if a.bits.shape != b.bits.shape:
        raise ValueError(
            f"mask dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Bitwise OR of two same-sized masks."""
    _check_same_shape(a, b)
    return BinaryMask(a.bits | b.bits)


def intersection(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Bitwise AND of two same-sized masks."""
    _check_same_shape(a, b)
    return BinaryMask(a.bits & b.bits)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union in [0, 1].

    Two empty masks agree perfectly, so iou(empty, empty) is defined as 1.0;
    the evaluation code relies on that convention for absent-target frames.
    """
    _check_same_shape(a, b)
    inter = int((a.bits & b.bits).sum())
    uni = int((a.bits | b.bits).sum())
    if uni == 0:
        return 1.0
    return inter / uni


def connected_components(m: BinaryMask) -> list[BinaryMask]:
    """Split set bits into 8-connected components.

    Components come back largest-first; equal areas are ordered by the
    row-major index of each component's first set bit, which makes the
    output deterministic.
    """
    labels, count = ndimage.label(m.bits, structure=EIGHT_CONNECTED)
    if count == 0:
        return []
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=count + 1)
    first = np.full(count + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size))
    order = sorted(range(1, count + 1), key=lambda k: (-int(areas[k]), int(first[k])))
    return [BinaryMask(labels == k) for k in order]


def largest_component(m: BinaryMask) -> Optional[BinaryMask]:
    """Largest 8-connected component, or None for an empty mask."""
    parts = connected_components(m)
    return parts[0] if parts else None


def rle_encode(m: BinaryMask) -> list[int]:
    """Encode a mask as alternating run lengths over the row-major scan.

    Runs start with the count of leading zeros (possibly 0). The output is
    canonical: no zero-length interior runs, and an all-zero mask encodes as
    a single run covering the whole grid.
    """
    flat = m.bits.ravel()
    n = flat.size
    if n == 0:
        return [0]
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [n]))
    runs = np.diff(edges).astype(int).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return runs


def rle_decode(width: int, height: int, runs: Sequence[int]) -> BinaryMask:
    """Decode alternating run lengths back into a width x height mask."""
    if width < 0 or height < 0:
        raise ValueError("mask dimensions must be non-negative")
    total = width * height
    counts = []
    for r in runs:
        if not isinstance(r, (int, np.integer)) or isinstance(r, bool):
            raise ValueError(f"run lengths must be integers, got {r!r}")
        if r < 0:
            raise ValueError(f"run lengths must be non-negative, got {r}")
        counts.append(int(r))
    if sum(counts) != total:
        raise ValueError(f"run lengths sum to {sum(counts)}, expected {total}")
    values = np.arange(len(counts)) % 2 == 1
    flat = np.repeat(values, counts)
    return BinaryMask(flat.reshape(height, width))
