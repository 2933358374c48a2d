"""Distractor-aware memory engine for segmentation trackers."""

__version__ = "0.1.0"

from .masks import BBox, BinaryMask  # noqa: F401
from .membank import BankConfig, MemoryBank, MemoryEntry, MemoryView, init_bank  # noqa: F401
from .policy import PolicyConfig, PolicyState, UpdateDecision, decide  # noqa: F401
from .tracker import CandidateSet, TrackingResult, run_sequence, rt_replay, select_output  # noqa: F401
