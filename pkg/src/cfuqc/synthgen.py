"""Deterministic synthetic Petri-dish generator with exact ground truth.

Plates are rendered as 8-bit grayscale images: a bright agar disc on a dark
background, colonies as radially shaded dark spots, and an optional artifact
(glare / blur / condensation / contamination) on top.  All randomness flows
through seeded PCG64 generators, so an identical :class:`SceneSpec` always
yields byte-identical output.

The generator is the stand-in for a production image feed: every plate comes
with a ground-truth sidecar (colony geometry, class, validity flag) that the
rest of the pipeline can be scored against.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ConflictError, ValidationError

ARTIFACT_KINDS = ("none", "glare", "blur", "condensation", "contamination")
COLONY_CLASSES = ("bacteria", "mold")

# Intensity at which an artifact makes the plate unusable for counting.
# Contamination obscures colonies earlier than the optical artifacts do.
INVALID_INTENSITY = {
    "glare": 0.3,
    "blur": 0.3,
    "condensation": 0.3,
    "contamination": 0.2,
}

AGAR_LEVEL = 200.0
OUTSIDE_LEVEL = 30.0
MAX_COLONIES = 200
PLACEMENT_GAP_PX = 4.0  # clearance kept between colonies and the plate rim


@dataclass(frozen=True)
class ArtifactSpec:
    kind: str = "none"
    intensity: float = 0.0

    def validate(self) -> None:
        if self.kind not in ARTIFACT_KINDS:
            raise ValidationError(f"artifact.kind: unknown kind {self.kind!r}")
        if not (0.0 <= self.intensity <= 1.0):
            raise ValidationError(
                f"artifact.intensity: {self.intensity} outside [0, 1]"
            )
        if self.kind == "none" and self.intensity != 0.0:
            raise ValidationError("artifact.intensity: must be 0 when kind is 'none'")


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    image_side: int = 512
    plate_radius: int | None = None  # defaults to 0.44 * image_side
    colony_count_mean: float = 12.0
    colony_radius_range: tuple[int, int] = (5, 30)
    class_mix: float = 0.25  # probability a colony is mold
    overlap_allowed: bool = False
    colony_contrast: float = 0.4  # colony centre intensity as fraction of agar
    artifact: ArtifactSpec = field(default_factory=ArtifactSpec)

    @property
    def effective_plate_radius(self) -> int:
        if self.plate_radius is not None:
            return self.plate_radius
        return int(round(0.44 * self.image_side))

    def validate(self) -> None:
        if not (0 <= self.seed < 2**64):
            raise ValidationError(f"seed: {self.seed} not a 64-bit unsigned integer")
        if self.image_side < 64:
            raise ValidationError(f"image_side: {self.image_side} below minimum 64")
        r_min, r_max = self.colony_radius_range
        if r_min > r_max:
            raise ValidationError(
                f"colony_radius_range: min {r_min} exceeds max {r_max}"
            )
        if r_min < 2 or r_max > self.image_side / 8:
            raise ValidationError(
                f"colony_radius_range: [{r_min}, {r_max}] outside "
                f"[2, {self.image_side / 8:g}]"
            )
        if not self.effective_plate_radius < self.image_side / 2:
            raise ValidationError(
                f"plate_radius: {self.effective_plate_radius} not below "
                f"image_side/2 = {self.image_side / 2:g}"
            )
        if self.colony_count_mean < 0:
            raise ValidationError(
                f"colony_count_mean: {self.colony_count_mean} is negative"
            )
        if not (0.0 <= self.class_mix <= 1.0):
            raise ValidationError(f"class_mix: {self.class_mix} outside [0, 1]")
        if not (0.0 < self.colony_contrast < 1.0):
            raise ValidationError(
                f"colony_contrast: {self.colony_contrast} outside (0, 1)"
            )
        self.artifact.validate()


@dataclass(frozen=True)
class Colony:
    center: tuple[float, float]  # (x, y) pixels
    radius: float
    colony_class: str  # "bacteria" | "mold"


@dataclass(frozen=True)
class GroundTruth:
    colonies: tuple[Colony, ...]
    valid: bool

    @property
    def true_count(self) -> int:
        return len(self.colonies)

    def to_dict(self) -> dict:
        return {
            "colonies": [
                {
                    "center": [c.center[0], c.center[1]],
                    "radius": c.radius,
                    "class": c.colony_class,
                }
                for c in self.colonies
            ],
            "valid": self.valid,
            "true_count": self.true_count,
        }

    @staticmethod
    def from_dict(d: dict) -> "GroundTruth":
        colonies = tuple(
            Colony((c["center"][0], c["center"][1]), c["radius"], c["class"])
            for c in d["colonies"]
        )
        return GroundTruth(colonies=colonies, valid=bool(d["valid"]))


def artifact_is_invalid(artifact: ArtifactSpec) -> bool:
    """Validity label as a pure function of the artifact parameters."""
    if artifact.kind == "none":
        return False
    return artifact.intensity >= INVALID_INTENSITY[artifact.kind]


def _layout_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _render_rng(seed: int) -> np.random.Generator:
    # Separate stream so explicit layouts render exactly like sampled ones.
    return np.random.Generator(np.random.PCG64(seed).jumped(1))


def sample_colonies(spec: SceneSpec) -> tuple[Colony, ...]:
    """Sample colony positions, radii and classes for a scene.

    Count is Poisson(colony_count_mean) truncated at MAX_COLONIES.  Placement
    keeps every colony disc inside the plate; with overlap disallowed a
    rejection loop enforces pairwise centre distance > r_i + r_j + gap.
    Colonies that cannot be placed after 200 tries are dropped.
    """
    spec.validate()
    rng = _layout_rng(spec.seed)
    count = int(min(rng.poisson(spec.colony_count_mean), MAX_COLONIES))
    r_min, r_max = spec.colony_radius_range
    span = r_max - r_min
    cx = cy = spec.image_side / 2.0
    plate_r = spec.effective_plate_radius

    placed: list[Colony] = []
    for _ in range(count):
        is_mold = rng.random() < spec.class_mix
        if span == 0:
            radius = float(r_min)
        elif is_mold:
            radius = float(rng.integers(r_min + int(0.4 * span), r_max + 1))
        else:
            radius = float(rng.integers(r_min, r_min + max(int(0.6 * span), 1) + 1))
        max_rho = plate_r - radius - PLACEMENT_GAP_PX
        if max_rho <= 0:
            continue
        for _try in range(200):
            theta = rng.uniform(0.0, 2.0 * math.pi)
            rho = max_rho * math.sqrt(rng.random())
            x = cx + rho * math.cos(theta)
            y = cy + rho * math.sin(theta)
            if spec.overlap_allowed or all(
                math.hypot(x - c.center[0], y - c.center[1])
                > radius + c.radius + PLACEMENT_GAP_PX
                for c in placed
            ):
                placed.append(
                    Colony((x, y), radius, "mold" if is_mold else "bacteria")
                )
                break
    return tuple(placed)


def _paint_colony(img: np.ndarray, colony: Colony, contrast: float,
                  rng: np.random.Generator) -> None:
    x0, y0 = colony.center
    r = colony.radius
    side = img.shape[0]
    lo_y = max(int(y0 - r - 2), 0)
    hi_y = min(int(y0 + r + 3), side)
    lo_x = max(int(x0 - r - 2), 0)
    hi_x = min(int(x0 + r + 3), side)
    yy, xx = np.mgrid[lo_y:hi_y, lo_x:hi_x]
    dist = np.hypot(xx - x0, yy - y0)

    if colony.colony_class == "mold":
        # Mold: fainter, slightly lobed outline, mottled interior.
        phase = rng.uniform(0.0, 2.0 * math.pi)
        ang = np.arctan2(yy - y0, xx - x0)
        local_r = r * (1.0 + 0.12 * np.sin(3.0 * ang + phase))
        centre_level = min(contrast + 0.15, 0.95) * AGAR_LEVEL
        inside = dist < local_r
        depth = (AGAR_LEVEL - centre_level) * (1.0 - (dist / local_r) ** 2)
        texture = rng.uniform(-0.15, 0.15, size=depth.shape)
        depth = depth * (1.0 + texture)
    else:
        centre_level = contrast * AGAR_LEVEL
        inside = dist < r
        depth = (AGAR_LEVEL - centre_level) * (1.0 - (dist / r) ** 2)

    patch = img[lo_y:hi_y, lo_x:hi_x]
    value = AGAR_LEVEL - np.clip(depth, 0.0, None)
    patch[inside] = np.minimum(patch[inside], value[inside])


def _apply_artifact(img: np.ndarray, spec: SceneSpec,
                    rng: np.random.Generator) -> None:
    kind = spec.artifact.kind
    intensity = spec.artifact.intensity
    if kind == "none" or intensity == 0.0:
        return
    side = spec.image_side
    cx = cy = side / 2.0
    plate_r = spec.effective_plate_radius

    if kind == "glare":
        # Saturated ellipse whose area scales with intensity.
        area = 0.18 * intensity * side * side
        aspect = rng.uniform(0.5, 1.0)
        a = math.sqrt(area / (math.pi * aspect))
        b = a * aspect
        angle = rng.uniform(0.0, math.pi)
        gx = cx + rng.uniform(-0.5, 0.5) * plate_r
        gy = cy + rng.uniform(-0.5, 0.5) * plate_r
        yy, xx = np.mgrid[0:side, 0:side]
        u = (xx - gx) * math.cos(angle) + (yy - gy) * math.sin(angle)
        v = -(xx - gx) * math.sin(angle) + (yy - gy) * math.cos(angle)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] = 255.0
    elif kind == "blur":
        img[:] = ndimage.gaussian_filter(img, sigma=6.0 * intensity)
    elif kind == "condensation":
        # High-frequency multiplicative speckle over the whole frame.
        noise = rng.uniform(-0.5, 0.5, size=img.shape)
        img *= 1.0 + intensity * noise
    elif kind == "contamination":
        # Irregular low-contrast texture patch inside the plate.
        blob = ndimage.gaussian_filter(rng.standard_normal(img.shape), sigma=14.0)
        yy, xx = np.mgrid[0:side, 0:side]
        in_plate = np.hypot(xx - cx, yy - cy) <= plate_r * 0.95
        frac = 0.2 + 0.5 * intensity
        cutoff = np.quantile(blob[in_plate], 1.0 - frac)
        mask = (blob >= cutoff) & in_plate
        texture = rng.uniform(-0.5, 0.5, size=img.shape) * 250.0 * intensity
        img[mask] = 0.6 * img[mask] + 0.4 * 170.0 + texture[mask]
    img[:] = np.clip(img, 0.0, 255.0)


def render_scene(spec: SceneSpec, colonies: tuple[Colony, ...]) -> tuple[np.ndarray, GroundTruth]:
    """Render an explicit colony layout under the scene's seed and artifact."""
    spec.validate()
    rng = _render_rng(spec.seed)
    side = spec.image_side
    cx = cy = side / 2.0
    plate_r = spec.effective_plate_radius

    img = np.full((side, side), OUTSIDE_LEVEL, dtype=np.float64)
    yy, xx = np.mgrid[0:side, 0:side]
    plate = np.hypot(xx - cx, yy - cy) <= plate_r
    img[plate] = AGAR_LEVEL

    # Agar texture: low-frequency mottle plus fine grain.  The grain keeps
    # focus measurements well away from zero on clean plates.
    mottle = ndimage.gaussian_filter(rng.standard_normal((side, side)), sigma=8.0)
    mottle *= 4.0 / max(mottle.std(), 1e-9)
    grain = rng.integers(-3, 4, size=(side, side)).astype(np.float64)
    img[plate] += mottle[plate] + grain[plate]

    for colony in colonies:
        _paint_colony(img, colony, spec.colony_contrast, rng)

    _apply_artifact(img, spec, rng)

    image = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    truth = GroundTruth(colonies=colonies, valid=not artifact_is_invalid(spec.artifact))
    return image, truth


def generate_plate(spec: SceneSpec) -> tuple[np.ndarray, GroundTruth]:
    """Generate one plate image plus its ground truth."""
    return render_scene(spec, sample_colonies(spec))


def png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def load_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("L"))


def batch_specs(seed: int, count: int, invalid_frac: float = 0.0,
                **spec_kwargs) -> list[SceneSpec]:
    """Build ``count`` plate specs with an exact share of invalid plates.

    round(count * invalid_frac) plates get a clearly-invalid artifact (kind
    chosen at random, intensity well above the validity cutoff); the rest are
    artifact-free.
    """
    if count < 0:
        raise ValidationError(f"count: {count} is negative")
    if not (0.0 <= invalid_frac <= 1.0):
        raise ValidationError(f"invalid_frac: {invalid_frac} outside [0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_invalid = int(round(count * invalid_frac))
    invalid_idx = set(rng.choice(count, size=n_invalid, replace=False).tolist()) if n_invalid else set()
    specs = []
    for i in range(count):
        if i in invalid_idx:
            kind = ("glare", "blur", "condensation", "contamination")[int(rng.integers(0, 4))]
            lo = 0.45 if kind == "contamination" else 0.55
            artifact = ArtifactSpec(kind, float(np.round(rng.uniform(lo, 0.9), 3)))
        else:
            artifact = ArtifactSpec()
        specs.append(
            SceneSpec(seed=seed * 1_000_000 + i, artifact=artifact, **spec_kwargs)
        )
    return specs


def generate_batch(specs: list[SceneSpec], out_dir: str | Path) -> dict:
    """Render a batch to disk: one PNG + one ground-truth JSON per spec.

    Returns the manifest (also written to ``manifest.json``) mapping plate ids
    to files, validity and true count.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"out_dir: cannot create {out}: {exc}") from exc

    entries = []
    seen: set[str] = set()
    for spec in specs:
        plate_id = f"plate-{spec.seed:016x}"
        if plate_id in seen:
            raise ConflictError(f"duplicate plate_id {plate_id} (seed {spec.seed})")
        seen.add(plate_id)
        image, truth = generate_plate(spec)
        img_file = out / f"{plate_id}.png"
        gt_file = out / f"{plate_id}.json"
        img_file.write_bytes(png_bytes(image))
        gt_file.write_text(json.dumps(truth.to_dict(), indent=2, sort_keys=True))
        entries.append(
            {
                "plate_id": plate_id,
                "image": img_file.name,
                "ground_truth": gt_file.name,
                "valid": truth.valid,
                "true_count": truth.true_count,
            }
        )
    manifest = {"plates": entries, "count": len(entries)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
