"""Boxes to velocities to a codebook.

The motion model never sees pixel coordinates. Every frame-to-frame step
of a box becomes a four-component velocity (dx, dy, dw, dh), each component
normalized by the frame width or height, and each component is then snapped
to its own bank of k-means centroids. This script walks one box track
through that whole encoding and back.

Run:  python3 demos/01_quantized_velocities.py
"""

import numpy as np

from gaptrack import (
    BoundingBox,
    FrameGeometry,
    apply_velocity,
    decode,
    fit,
    quantize,
    velocities_from_boxes,
    velocity,
)

frame = FrameGeometry(1920.0, 1080.0)

# one step: 48px right, 6px down, slightly growing
a = BoundingBox(100.0, 200.0, 64.0, 128.0)
b = BoundingBox(148.0, 206.0, 66.0, 126.0)
delta = velocity(a, b, frame)
print(f"one step      dx={delta.dx:+.5f} dy={delta.dy:+.5f} "
      f"dw={delta.dw:+.5f} dh={delta.dh:+.5f}  (fractions of the frame)")

# a noisy drifting track gives the clustering something to chew on
rng = np.random.default_rng(0)
steps = np.array([6.0, 2.0, 0.1, -0.1]) + rng.normal(0.0, 1.5, size=(120, 4))
boxes = np.cumsum(np.vstack([[300.0, 300.0, 80.0, 120.0], steps]), axis=0)
deltas = velocities_from_boxes(boxes, frame)
print(f"track         {len(boxes)} boxes -> {len(deltas)} velocity rows")

book = fit(deltas, k=8, seed=0)
print(f"codebook      k={book.k}, per-component centroid banks:")
for name, row in zip("xywh", book.centroids):
    print(f"  d{name}: " + " ".join(f"{c:+.5f}" for c in row))

# quantize one of the track's own steps, decode the cell centers back,
# and re-apply to the box: the rebuilt step lands within a cell width
prev = BoundingBox(*boxes[56])
true_next = BoundingBox(*boxes[57])
step = velocity(prev, true_next, frame)
quad = quantize(step, book)
rebuilt = decode(quad, book)
approx = apply_velocity(prev, rebuilt, frame)
print(f"quantized     step 57 -> cells {tuple(quad)}")
print(f"decoded       dx={rebuilt.dx:+.5f} dy={rebuilt.dy:+.5f} "
      f"dw={rebuilt.dw:+.5f} dh={rebuilt.dh:+.5f}")
print(f"true next     x={true_next.x:7.2f} y={true_next.y:7.2f} "
      f"w={true_next.w:6.2f} h={true_next.h:6.2f}")
print(f"via codebook  x={approx.x:7.2f} y={approx.y:7.2f} "
      f"w={approx.w:6.2f} h={approx.h:6.2f}")

# velocities outside the fitted range clip to the nearest edge cell; the
# codebook can only describe motion like what it was fit on
wild = quantize(delta, book)
print(f"out of range  the 48px hand step pins dx to its edge cell: {tuple(wild)}")
