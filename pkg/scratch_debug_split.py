# Scratch: find which colonies over-split in counter_a.
import numpy as np
from scipy import ndimage

from cfuqc.synthgen import SceneSpec, generate_plate
from cfuqc.vision import segment_components, watershed_split, distance_peaks

spec = SceneSpec(seed=10, colony_count_mean=12)
img, truth = generate_plate(spec)
print("truth:", truth.true_count,
      [(c.colony_class, round(c.radius)) for c in truth.colonies])

comps = [c for c in segment_components(img, 140.0) if c.area >= 4]
print("components:", len(comps))
for c in comps:
    subs = watershed_split(c)
    if len(subs) != 1:
        dt = ndimage.distance_transform_edt(c.mask)
        peaks = distance_peaks(dt, min_height=0.0)
        print(f"  comp area={c.area} centroid={tuple(round(v) for v in c.centroid)} "
              f"-> {len(subs)} subs; peaks={[(y, x, round(float(dt[y, x]), 1)) for y, x in peaks]}")
        # which colony is nearest?
        cx, cy = c.centroid
        nearest = min(truth.colonies,
                      key=lambda col: (col.center[0] - cx) ** 2 + (col.center[1] - cy) ** 2)
        print(f"     nearest truth colony: {nearest.colony_class} r={nearest.radius:.0f} "
              f"center=({nearest.center[0]:.0f},{nearest.center[1]:.0f})")
