"""Run configuration: one document covering policy, bank, distillation and
execution knobs, with strict field checking and a stable digest.

Defaults are the production parameter set (update interval 5, anchor 0.7,
IoU 0.8, area band 20%, history 10, six memory slots). Effective
configuration is echoed into every output header so results stay
self-describing.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from . import __version__
from .distill import DistillConfig
from .membank import BankConfig
from .policy import VARIANT_DAM_FULL, VARIANTS, PolicyConfig

VARIANT_DRM_TENC = "drm_tenc"
VARIANT_RAM_NO_LAST = "ram_no_last"

# Rows of the ablation grid, in reporting order. The last two are the
# full policy with one bank flag flipped.
ABLATION_VARIANTS = VARIANTS + (VARIANT_DRM_TENC, VARIANT_RAM_NO_LAST)


@dataclass(frozen=True)
class RunConfig:
    delta: int = 5
    theta_anc: float = 0.7
    theta_iou: float = 0.8
    theta_area: float = 0.2
    theta_m: int = 10
    n_dam: int = 6
    variant: str = VARIANT_DAM_FULL
    temporal_encoding_on_drm: bool = False
    include_latest_in_ram: bool = True
    ratio_threshold: float = 0.5
    frame_fraction: float = 1.0 / 3.0
    use_distance: bool = False
    success_threshold: float = 0.0
    auc_thresholds: int = 101
    workers: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        # Delegate range checks to the owning configs.
        self.policy_config()
        self.bank_config()
        self.distill_config()
        if not 0.0 <= self.success_threshold < 1.0:
            raise ValueError("success_threshold must be in [0, 1)")
        if self.auc_thresholds < 2:
            raise ValueError("auc_thresholds must be >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def policy_config(self, variant: Optional[str] = None) -> PolicyConfig:
        """Policy for this run, optionally overridden by a named grid variant."""
        name = variant or self.variant
        base, _, latest = resolve_variant(name)
        return PolicyConfig(
            delta=self.delta,
            theta_anc=self.theta_anc,
            theta_iou=self.theta_iou,
            theta_area=self.theta_area,
            theta_m=self.theta_m,
            variant=base,
            include_latest_in_ram=self.include_latest_in_ram and latest,
        )

    def bank_config(self, variant: Optional[str] = None) -> BankConfig:
        name = variant or self.variant
        _, tenc, latest = resolve_variant(name)
        return BankConfig(
            n_dam=self.n_dam,
            temporal_encoding_on_drm=self.temporal_encoding_on_drm or tenc,
            include_latest_in_ram=self.include_latest_in_ram and latest,
        )

    def distill_config(self) -> DistillConfig:
        return DistillConfig(
            ratio_threshold=self.ratio_threshold,
            frame_fraction=self.frame_fraction,
            use_distance=self.use_distance,
        )

    def replace(self, **kwargs) -> "RunConfig":
        return dataclasses.replace(self, **kwargs)

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def digest(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def resolve_variant(name: str) -> tuple[str, bool, bool]:
    """Map a grid variant name to (policy variant, drm-tenc flag, latest flag)."""
    if name in VARIANTS:
        return name, False, True
    if name == VARIANT_DRM_TENC:
        return VARIANT_DAM_FULL, True, True
    if name == VARIANT_RAM_NO_LAST:
        return VARIANT_DAM_FULL, False, False
    raise ValueError(f"unknown variant {name!r} (choose from {', '.join(ABLATION_VARIANTS)})")


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}


def config_from_dict(data: dict, base: Optional[RunConfig] = None) -> RunConfig:
    """Build a config from a parsed document, rejecting unknown fields."""
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
    merged = (base or RunConfig()).to_json()
    merged.update(data)
    return RunConfig(**merged)


def load_config(path: str, base: Optional[RunConfig] = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError("config file must hold a single JSON object")
    return config_from_dict(data, base)


def save_config(path: str, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def make_header(command: str, cfg: RunConfig, **extra) -> dict:
    """Output-file header: tool version, effective config and its digest."""
    header = {
        "type": "header",
        "tool": "damtrack",
        "version": __version__,
        "command": command,
        "config_digest": cfg.digest(),
        "config": cfg.to_json(),
    }
    header.update(extra)
    return header
