"""Distractor-aware memory storage.

The bank splits memory by tracking function: a permanent initialization
slot, a FIFO of recent target appearances (RAM), a FIFO of anchor frames
that pin down critical distractors (DRM), and a volatile slot holding the
most recent tracked frame. RAM starts with the whole slot budget and gives
slots up one-for-one as DRM entries arrive, down to an even split.

A bank is a single-writer object owned by one tracking session. Snapshots
taken with :meth:`MemoryBank.memory_view` are immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .masks import BinaryMask

KIND_INIT = "init"
KIND_RAM = "ram"
KIND_RAM_LATEST = "ram_latest"
KIND_DRM = "drm"
ENTRY_KINDS = (KIND_INIT, KIND_RAM, KIND_RAM_LATEST, KIND_DRM)


@dataclass(frozen=True)
class MemoryEntry:
    """One stored frame reference: mask plus bookkeeping metadata."""

    frame_index: int
    mask: BinaryMask
    kind: str
    inserted_at: int

    def __post_init__(self) -> None:
        if self.kind not in ENTRY_KINDS:
            raise ValueError(f"unknown entry kind {self.kind!r}")
        if self.frame_index < 0 or self.inserted_at < 0:
            raise ValueError("frame indices must be non-negative")


@dataclass(frozen=True)
class BankConfig:
    """Slot budget and the ablation flags that change view construction."""

    n_dam: int = 6
    temporal_encoding_on_drm: bool = False
    include_latest_in_ram: bool = True

    def __post_init__(self) -> None:
        if self.n_dam < 2 or self.n_dam % 2 != 0:
            raise ValueError(f"n_dam must be even and >= 2, got {self.n_dam}")

    @property
    def drm_capacity(self) -> int:
        return self.n_dam // 2


@dataclass(frozen=True)
class MemoryViewItem:
    entry: MemoryEntry
    temporal_rank: Optional[int]


@dataclass(frozen=True)
class MemoryView:
    """Ordered snapshot handed to predictors.

    Order is fixed: init first, DRM oldest to newest, RAM oldest to newest,
    then the volatile latest slot. Recency-ranked entries carry a
    temporal_rank that increases with recency; the init slot never does, and
    DRM entries only do under the temporal-encoding ablation.
    """

    items: tuple[MemoryViewItem, ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def digest(self) -> list[dict]:
        """Compact JSON-ready form: kind, frame index and rank per entry."""
        return [
            {
                "frame_index": it.entry.frame_index,
                "kind": it.entry.kind,
                "temporal_rank": it.temporal_rank,
            }
            for it in self.items
        ]


class MemoryBank:
    """Mutable bank state; use :func:`init_bank` to construct one."""

    def __init__(self, config: BankConfig, init_entry: MemoryEntry) -> None:
        self.config = config
        self._init = init_entry
        self._ram: list[MemoryEntry] = []
        self._drm: list[MemoryEntry] = []
        self._latest: Optional[MemoryEntry] = None

    @property
    def init_entry(self) -> MemoryEntry:
        return self._init

    @property
    def ram_entries(self) -> tuple[MemoryEntry, ...]:
        return tuple(self._ram)

    @property
    def drm_entries(self) -> tuple[MemoryEntry, ...]:
        return tuple(self._drm)

    @property
    def latest_entry(self) -> Optional[MemoryEntry]:
        return self._latest

    def ram_capacity(self) -> int:
        """Current RAM budget under the capacity-sharing rule."""
        cfg = self.config
        return cfg.n_dam - min(len(self._drm), cfg.drm_capacity)

    def _shrink_ram(self) -> None:
        cap = self.ram_capacity()
        while len(self._ram) > cap:
            self._ram.pop(0)

    def insert_ram(self, entry: MemoryEntry) -> None:
        """Append to the RAM FIFO, evicting the oldest entries beyond capacity."""
        self._ram.append(entry)
        self._shrink_ram()

    def insert_drm(self, entry: MemoryEntry) -> None:
        """Append to the DRM FIFO; RAM shrinks immediately if DRM grew."""
        self._drm.append(entry)
        while len(self._drm) > self.config.drm_capacity:
            self._drm.pop(0)
        self._shrink_ram()

    def set_latest(self, entry: MemoryEntry) -> None:
        """Replace the volatile most-recent-frame slot.

        The slot sits outside FIFO capacity and is suppressed wholesale when
        the bank is configured without it (the no-latest ablation).
        """
        if not self.config.include_latest_in_ram:
            return
        self._latest = entry

    def clear_latest(self) -> None:
        self._latest = None

    def memory_view(self) -> MemoryView:
        """Deterministic snapshot with temporal ranks.

        Ranks go to RAM entries and the latest slot, and additionally to DRM
        entries when temporal_encoding_on_drm is set. They are assigned by
        recency across all ranked entries (1 = oldest), so in the default
        configuration RAM entries get 1..k in insertion order and the latest
        slot gets k+1. The init slot is never ranked.
        """
        ordered: list[MemoryEntry] = [self._init]
        ordered.extend(self._drm)
        ordered.extend(self._ram)
        if self._latest is not None and self.config.include_latest_in_ram:
            ordered.append(self._latest)

        ranked_positions = [
            idx
            for idx, e in enumerate(ordered)
            if e.kind in (KIND_RAM, KIND_RAM_LATEST)
            or (e.kind == KIND_DRM and self.config.temporal_encoding_on_drm)
        ]
        # Stable sort: ties on inserted_at keep view order (DRM, RAM, latest).
        by_recency = sorted(ranked_positions, key=lambda idx: ordered[idx].inserted_at)
        rank_at = {idx: pos + 1 for pos, idx in enumerate(by_recency)}

        items = tuple(
            MemoryViewItem(entry=e, temporal_rank=rank_at.get(idx))
            for idx, e in enumerate(ordered)
        )
        return MemoryView(items)


def init_bank(config: BankConfig, init_frame: MemoryEntry) -> MemoryBank:
    """Create a bank holding only the permanent initialization slot."""
    if init_frame.mask.is_empty:
        raise ValueError("initialization mask must be non-empty")
    entry = init_frame
    if entry.kind != KIND_INIT:
        entry = MemoryEntry(entry.frame_index, entry.mask, KIND_INIT, entry.inserted_at)
    return MemoryBank(config, entry)
