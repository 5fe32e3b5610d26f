"""Shared low-level image and box operations.

Everything here is pure and deterministic: quality statistics for the
pre-screener, thresholded 8-connected components, distance-transform peak
finding, watershed splitting of fused blobs, IoU and soft non-maximum
suppression.  Fixed constants (glare cut-off 250, 4-neighbour Laplacian,
3 px seed suppression radius) are part of the contract so independent
oracles can replicate results bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.segmentation import watershed as _skimage_watershed

from .errors import ValidationError

GLARE_CUTOFF = 250
PEAK_NMS_RADIUS = 3
WATERSHED_SEED_MIN_HEIGHT = 2.5  # px; rejects ragged-boundary micro-maxima
_EIGHT_CONN = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, half-open pixel coordinates [x_min, x_max) x [y_min, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    score: float = 1.0
    box_class: str = "unknown"

    def validate(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(
                f"box: degenerate extent ({self.x_min},{self.y_min},"
                f"{self.x_max},{self.y_max})"
            )
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"box.score: {self.score} outside [0, 1]")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class QualityStats:
    blur_metric: float  # variance of the 4-neighbour discrete Laplacian
    glare_fraction: float  # share of pixels >= GLARE_CUTOFF
    speckle_energy: float  # high-frequency residual energy inside the plate
    contrast: float  # robust intensity spread (p95 - p5)


@dataclass(frozen=True)
class Component:
    """One 8-connected dark blob: local mask plus global geometry."""

    mask: np.ndarray  # bool, cropped to bbox
    offset: tuple[int, int]  # (y0, x0) of the crop in the full image
    area: int
    centroid: tuple[float, float]  # (x, y)
    bbox: Box

    def pixel_values(self, image: np.ndarray) -> np.ndarray:
        y0, x0 = self.offset
        h, w = self.mask.shape
        return image[y0:y0 + h, x0:x0 + w][self.mask]


def _check_grayscale(image: np.ndarray, min_side: int = 1) -> np.ndarray:
    if not isinstance(image, np.ndarray) or image.ndim != 2:
        raise ValidationError("image: expected a 2-D grayscale array")
    if image.dtype != np.uint8:
        raise ValidationError(f"image: expected 8-bit pixels, got {image.dtype}")
    if min(image.shape) < min_side:
        raise ValidationError(
            f"image: side {min(image.shape)} below minimum {min_side}"
        )
    return image


def estimate_plate_disc(image: np.ndarray) -> tuple[float, float, float]:
    """Locate the agar disc: largest bright component, holes filled.

    Returns (cx, cy, radius).  Falls back to the full frame when nothing is
    bright enough (degenerate inputs still get defined statistics).
    """
    bright = image >= 100
    if not bright.any():
        h, w = image.shape
        return (w / 2.0, h / 2.0, min(h, w) / 2.0)
    labels, n = ndimage.label(bright, structure=_EIGHT_CONN)
    largest = int(np.argmax(ndimage.sum_labels(np.ones_like(labels), labels,
                                               index=range(1, n + 1)))) + 1
    disc = ndimage.binary_fill_holes(labels == largest)
    area = int(disc.sum())
    cy, cx = ndimage.center_of_mass(disc)
    radius = float(np.sqrt(area / np.pi))
    return (float(cx), float(cy), radius)


def plate_mask(image: np.ndarray, shrink_px: float = 3.0) -> np.ndarray:
    """Boolean mask of the plate interior, eroded by ``shrink_px``."""
    cx, cy, radius = estimate_plate_disc(image)
    h, w = image.shape
    yy, xx = np.mgrid[0:h, 0:w]
    return np.hypot(xx - cx, yy - cy) <= max(radius - shrink_px, 1.0)


def quality_stats(image: np.ndarray) -> QualityStats:
    """Deterministic measurements of the artifact axes the screener uses.

    Focus and speckle are measured inside the (eroded) plate disc so the
    plate rim does not dominate them; glare fraction and contrast are
    frame-global.
    """
    _check_grayscale(image, min_side=64)
    img = image.astype(np.float64)

    glare_fraction = float(np.mean(image >= GLARE_CUTOFF))
    p5, p95 = np.percentile(img, [5.0, 95.0])
    contrast = float(p95 - p5)

    interior = plate_mask(image, shrink_px=8.0)
    lap = ndimage.convolve(
        img, np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64),
        mode="nearest",
    )
    blur_metric = float(np.var(lap[interior])) if interior.any() else 0.0

    residual = img - ndimage.median_filter(img, size=3, mode="nearest")
    speckle_energy = float(np.mean(residual[interior] ** 2)) if interior.any() else 0.0

    return QualityStats(
        blur_metric=blur_metric,
        glare_fraction=glare_fraction,
        speckle_energy=speckle_energy,
        contrast=contrast,
    )


def segment_components(image: np.ndarray, threshold: float) -> list[Component]:
    """8-connected components of pixels darker than ``threshold`` inside the plate."""
    _check_grayscale(image)
    mask = (image < threshold) & plate_mask(image)
    return _components_from_mask(mask)


def _components_from_mask(mask: np.ndarray) -> list[Component]:
    labels, n = ndimage.label(mask, structure=_EIGHT_CONN)
    out: list[Component] = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        local = labels[sl] == idx
        ys, xs = np.nonzero(local)
        y0, x0 = sl[0].start, sl[1].start
        area = int(local.sum())
        centroid = (float(xs.mean() + x0), float(ys.mean() + y0))
        bbox = Box(
            x_min=float(x0 + xs.min()), y_min=float(y0 + ys.min()),
            x_max=float(x0 + xs.max() + 1), y_max=float(y0 + ys.max() + 1),
        )
        out.append(Component(mask=local, offset=(y0, x0), area=area,
                             centroid=centroid, bbox=bbox))
    return out


def distance_peaks(dt: np.ndarray, min_height: float,
                   nms_radius: int = PEAK_NMS_RADIUS) -> list[tuple[int, int]]:
    """Local maxima of a distance transform, deduplicated.

    A candidate must equal the maximum within ``nms_radius``; plateaus
    collapse to one representative; finally a peak lying inside a stronger
    peak's disc (distance <= 0.9 * that peak's height) is merged away, which
    stops rasterised circles from producing several seeds.
    Returns (y, x) coordinates sorted by descending height.
    """
    if dt.size == 0:
        return []
    footprint = _disk_footprint(nms_radius)
    local_max = (dt == ndimage.maximum_filter(dt, footprint=footprint,
                                              mode="constant", cval=0.0))
    cand = local_max & (dt >= max(min_height, np.finfo(float).tiny))
    if not cand.any():
        return []
    labels, n = ndimage.label(cand, structure=_EIGHT_CONN)
    reps: list[tuple[float, int, int]] = []
    for idx in range(1, n + 1):
        ys, xs = np.nonzero(labels == idx)
        cy, cx = ys.mean(), xs.mean()
        k = int(np.argmin((ys - cy) ** 2 + (xs - cx) ** 2))
        reps.append((float(dt[ys[k], xs[k]]), int(ys[k]), int(xs[k])))
    reps.sort(key=lambda t: (-t[0], t[1], t[2]))

    accepted: list[tuple[int, int]] = []
    heights: list[float] = []
    for h, y, x in reps:
        contained = any(
            np.hypot(y - ay, x - ax) <= max(nms_radius, 0.9 * ah)
            for (ay, ax), ah in zip(accepted, heights)
        )
        if not contained:
            accepted.append((y, x))
            heights.append(h)
    return accepted


def _disk_footprint(radius: int) -> np.ndarray:
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return (yy ** 2 + xx ** 2) <= radius ** 2


def watershed_split(component: Component,
                    seed_min_height: float = WATERSHED_SEED_MIN_HEIGHT,
                    ) -> list[Component]:
    """Split a fused blob along distance-transform ridges.

    Seeds are the deduplicated distance peaks at least ``seed_min_height``
    deep; blobs with fewer than two seeds pass through unchanged.
    Sub-components partition the parent exactly.
    """
    dt = ndimage.distance_transform_edt(component.mask)
    peaks = distance_peaks(dt, min_height=seed_min_height)
    if len(peaks) <= 1:
        return [component]
    markers = np.zeros(component.mask.shape, dtype=np.int32)
    for i, (y, x) in enumerate(peaks, start=1):
        markers[y, x] = i
    labels = _skimage_watershed(-dt, markers=markers, mask=component.mask,
                                connectivity=2)
    y0, x0 = component.offset
    out: list[Component] = []
    for idx in range(1, len(peaks) + 1):
        local = labels == idx
        if not local.any():
            continue
        ys, xs = np.nonzero(local)
        sy, sx = ys.min(), xs.min()
        crop = local[sy:ys.max() + 1, sx:xs.max() + 1]
        bbox = Box(
            x_min=float(x0 + sx), y_min=float(y0 + sy),
            x_max=float(x0 + xs.max() + 1), y_max=float(y0 + ys.max() + 1),
        )
        out.append(
            Component(
                mask=crop, offset=(y0 + sy, x0 + sx), area=int(local.sum()),
                centroid=(float(xs.mean() + x0), float(ys.mean() + y0)),
                bbox=bbox,
            )
        )
    return out


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes."""
    a.validate()
    b.validate()
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def soft_nms(boxes: list[Box], iou_threshold: float = 0.4,
             score_floor: float = 0.05) -> list[Box]:
    """Linear-decay soft non-maximum suppression.

    Selection repeatedly takes the highest (decayed) score; every remaining
    box overlapping it beyond ``iou_threshold`` has its working score
    multiplied by (1 - IoU).  Boxes whose working score has fallen below
    ``score_floor`` by the time they are selected are suppressed.  Survivors
    are returned with their original scores, so re-applying the operator to
    its own output is a no-op.
    """
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValidationError(f"iou_threshold: {iou_threshold} outside [0, 1]")
    for b in boxes:
        b.validate()
    pool = list(range(len(boxes)))
    survivors: list[int] = []
    scores = [b.score for b in boxes]
    while pool:
        j = max(pool, key=lambda i: (scores[i], -i))
        pool.remove(j)
        if scores[j] < score_floor:
            continue
        survivors.append(j)
        for i in pool:
            overlap = iou(boxes[j], boxes[i])
            if overlap > iou_threshold:
                scores[i] *= 1.0 - overlap
    return [boxes[i] for i in survivors]
