# Scratch: probe quality-stat distributions across artifact kinds/intensities
# to pin screener thresholds. Not part of the package.
import numpy as np

from cfuqc.synthgen import ArtifactSpec, SceneSpec, generate_plate
from cfuqc.vision import quality_stats

rows = []
for kind in ("none", "glare", "blur", "condensation", "contamination"):
    grid = [0.0] if kind == "none" else [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.7, 0.9]
    for inten in grid:
        for seed in (1, 2, 3, 4, 5):
            spec = SceneSpec(seed=seed, colony_count_mean=12,
                             artifact=ArtifactSpec(kind, inten))
            img, truth = generate_plate(spec)
            qs = quality_stats(img)
            rows.append((kind, inten, seed, qs.blur_metric, qs.glare_fraction,
                         qs.speckle_energy, qs.contrast))

print(f"{'kind':14s} {'int':5s} {'blur_var':>9s} {'glare':>7s} {'speckle':>9s} {'contrast':>9s}")
cur = None
for kind, inten, seed, bm, gf, se, ct in rows:
    key = (kind, inten)
    if key != cur:
        cur = key
        vals = [(r[3], r[4], r[5], r[6]) for r in rows if (r[0], r[1]) == key]
        bms, gfs, ses, cts = zip(*vals)
        print(f"{kind:14s} {inten:5.2f} {min(bms):6.1f}/{max(bms):6.1f} "
              f"{min(gfs):.3f}/{max(gfs):.3f} {min(ses):6.1f}/{max(ses):6.1f} "
              f"{min(cts):5.1f}/{max(cts):5.1f}")
