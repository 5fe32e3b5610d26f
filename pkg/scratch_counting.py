# Scratch: exercise both counters against ground truth on clean plates.
import time

import numpy as np

from cfuqc.agents import count_primary, count_secondary, screen
from cfuqc.synthgen import SceneSpec, generate_plate
from cfuqc.vision import Box
from cfuqc.metrics import map_at_iou

t0 = time.perf_counter()
exact_a = exact_b = 0
screen_ok = 0
det_all, gt_all = [], []
n = 60
for seed in range(n):
    spec = SceneSpec(seed=seed, colony_count_mean=12)
    img, truth = generate_plate(spec)
    sv = screen(img)
    screen_ok += sv.quality == "valid"
    va, boxes = count_primary(img)
    vb = count_secondary(img)
    if va.count != truth.true_count or vb.count != truth.true_count:
        print(f"seed {seed}: truth={truth.true_count} a={va.count} b={vb.count}")
    exact_a += va.count == truth.true_count
    exact_b += vb.count == truth.true_count
    det_all.append(boxes)
    gt_all.append([Box(c.center[0] - c.radius, c.center[1] - c.radius,
                       c.center[0] + c.radius, c.center[1] + c.radius)
                   for c in truth.colonies])

res = map_at_iou(det_all, gt_all, 0.5)
dt = time.perf_counter() - t0
print(f"screen valid {screen_ok}/{n}  exact_a {exact_a}/{n}  exact_b {exact_b}/{n}")
print(f"mAP@0.5 {res['map']:.4f}  precision {res['precision']:.4f}  recall {res['recall']:.4f}")
print(f"total {dt:.1f}s -> {dt/n*1000:.0f} ms/plate")
