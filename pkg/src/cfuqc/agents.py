"""The three stateless estimators of the pipeline.

* ``screen`` classifies a plate as valid or invalid from quality statistics.
* ``count_primary`` counts via threshold -> components -> watershed ->
  contrast-scored boxes -> soft-NMS, and classifies each colony.
* ``count_secondary`` counts distance-transform peaks directly, with no
  component segmentation and no suppression, so its failure modes are
  independent of the primary counter's.

Each agent is a pure function of (image, config); verdicts serialize to the
structured JSON schema {"plate_id", "quality", "count", "reason"} extended
with "agent" and "elapsed_ms".
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import IllegalTransitionError, ValidationError
from .registry import ColonyFeatures, features_from_component
from .vision import (
    Box,
    distance_peaks,
    plate_mask,
    quality_stats,
    segment_components,
    soft_nms,
    watershed_split,
)


@dataclass(frozen=True)
class ScreenerConfig:
    """Quality-metric cutoffs; a plate failing any check is invalid.

    Checks run in a fixed order (glare, condensation, blur, low-contrast) so
    the reported reason is deterministic when several metrics fail.
    """

    glare_max: float = 0.05
    speckle_max: float = 40.0
    blur_min: float = 15.0
    contrast_min: float = 20.0
    version: str = "screener-v1"


@dataclass(frozen=True)
class PrimaryCounterConfig:
    threshold: float = 140.0  # binarization level for colony pixels
    min_area: int = 4
    box_scale: float = 1.414  # thresholded core -> full colony extent
    nms_iou: float = 0.4
    score_floor: float = 0.05
    version: str = "counter-a-v1"


@dataclass(frozen=True)
class SecondaryCounterConfig:
    mask_threshold: float = 140.0
    peak_height: float = 2.5  # minimum distance-transform peak, px
    version: str = "counter-b-v1"


@dataclass(frozen=True)
class AgentVerdict:
    plate_id: str
    quality: str  # "valid" | "invalid"
    count: int
    reason: str
    agent: str  # "screener" | "counter_a" | "counter_b"
    elapsed_ms: float

    def __post_init__(self):
        if self.quality not in ("valid", "invalid"):
            raise ValidationError(f"quality: {self.quality!r} not valid/invalid")
        if self.count < 0:
            raise ValidationError(f"count: {self.count} is negative")
        if self.quality == "invalid" and self.count != 0:
            raise ValidationError("invalid verdict must carry count 0")
        if self.quality == "invalid" and not self.reason:
            raise ValidationError("invalid verdict must carry a reason")
        if self.elapsed_ms < 0:
            raise ValidationError("elapsed_ms must be non-negative")

    def to_dict(self) -> dict:
        return {
            "plate_id": self.plate_id,
            "quality": self.quality,
            "count": self.count,
            "reason": self.reason,
            "agent": self.agent,
            "elapsed_ms": self.elapsed_ms,
        }

    @staticmethod
    def from_dict(d: dict) -> "AgentVerdict":
        return AgentVerdict(
            plate_id=d["plate_id"], quality=d["quality"], count=d["count"],
            reason=d["reason"], agent=d["agent"], elapsed_ms=d["elapsed_ms"],
        )


def screen(image: np.ndarray, cfg: ScreenerConfig = ScreenerConfig(),
           plate_id: str = "") -> AgentVerdict:
    """Valid/invalid pre-screen; the reason names the failing metric."""
    t0 = time.perf_counter()
    stats = quality_stats(image)
    failing = None
    if stats.glare_fraction > cfg.glare_max:
        failing = "glare"
    elif stats.speckle_energy > cfg.speckle_max:
        failing = "condensation"
    elif stats.blur_metric < cfg.blur_min:
        failing = "blur"
    elif stats.contrast < cfg.contrast_min:
        failing = "low-contrast"
    elapsed = (time.perf_counter() - t0) * 1000.0
    if failing is not None:
        return AgentVerdict(plate_id, "invalid", 0, failing, "screener", elapsed)
    return AgentVerdict(plate_id, "valid", 0, "clear", "screener", elapsed)


def _require_screened_valid(screen_verdict: AgentVerdict | None, agent: str) -> None:
    if screen_verdict is not None and screen_verdict.quality == "invalid":
        raise IllegalTransitionError(
            f"{agent} invoked on a plate screened invalid "
            f"({screen_verdict.reason})"
        )


def count_primary(image: np.ndarray,
                  cfg: PrimaryCounterConfig = PrimaryCounterConfig(),
                  plate_id: str = "",
                  classifier=None,
                  screen_verdict: AgentVerdict | None = None,
                  ) -> tuple[AgentVerdict, list[Box]]:
    """Component/watershed counting pipeline (the detector stand-in).

    ``classifier`` maps ColonyFeatures to a class label; without one, boxes
    stay class "unknown".
    """
    _require_screened_valid(screen_verdict, "counter_a")
    t0 = time.perf_counter()

    components = [c for c in segment_components(image, cfg.threshold)
                  if c.area >= cfg.min_area]
    subs = [s for c in components for s in watershed_split(c)
            if s.area >= cfg.min_area]

    interior = plate_mask(image)
    background = float(np.median(image[interior])) if interior.any() else 255.0

    boxes: list[Box] = []
    for sub in subs:
        mean_val = float(sub.pixel_values(image).mean())
        score = min(max((background - mean_val) / max(background, 1.0), 0.0), 1.0)
        label = "unknown"
        if classifier is not None:
            label = classifier(features_from_component(image, sub))
        cx = (sub.bbox.x_min + sub.bbox.x_max) / 2.0
        cy = (sub.bbox.y_min + sub.bbox.y_max) / 2.0
        hw = (sub.bbox.x_max - sub.bbox.x_min) / 2.0 * cfg.box_scale
        hh = (sub.bbox.y_max - sub.bbox.y_min) / 2.0 * cfg.box_scale
        boxes.append(Box(cx - hw, cy - hh, cx + hw, cy + hh,
                         score=score, box_class=label))

    kept = soft_nms(boxes, iou_threshold=cfg.nms_iou, score_floor=cfg.score_floor)
    elapsed = (time.perf_counter() - t0) * 1000.0
    verdict = AgentVerdict(
        plate_id, "valid", len(kept),
        f"components+watershed thr={cfg.threshold:g} minarea={cfg.min_area} "
        f"softnms={cfg.nms_iou:g}",
        "counter_a", elapsed,
    )
    return verdict, kept


def count_secondary(image: np.ndarray,
                    cfg: SecondaryCounterConfig = SecondaryCounterConfig(),
                    plate_id: str = "",
                    screen_verdict: AgentVerdict | None = None) -> AgentVerdict:
    """Distance-transform peak counting (the independent reviewer stand-in)."""
    _require_screened_valid(screen_verdict, "counter_b")
    t0 = time.perf_counter()
    mask = (image < cfg.mask_threshold) & plate_mask(image)
    dt = ndimage.distance_transform_edt(mask)
    peaks = distance_peaks(dt, min_height=cfg.peak_height)
    elapsed = (time.perf_counter() - t0) * 1000.0
    return AgentVerdict(
        plate_id, "valid", len(peaks),
        f"dt-peaks h={cfg.peak_height:g}", "counter_b", elapsed,
    )
