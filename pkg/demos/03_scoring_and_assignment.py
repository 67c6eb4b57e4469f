"""Score detections against tracklets and solve the assignment.

Each live tracklet holds four categorical distributions over the next
velocity's codebook cells. Scoring a detection is just looking up the
log-probability of the velocity that would take the tracklet there. The
per-frame matching minimizes negative log-likelihood over all
tracklet-detection pairs, with a gate forbidding pairs scored worse than
a multiple of the uniform cost.

Run:  python3 demos/03_scoring_and_assignment.py
"""

import numpy as np

from gaptrack import (
    BoundingBox,
    FORBIDDEN,
    ModelConfig,
    SceneSpec,
    TrainSchedule,
    fit,
    generate,
    solve,
    train,
    velocities_from_boxes,
)
from gaptrack.scoring import SOURCE_DETECTED, advance, new_tracklet, score_detection
from gaptrack.training import _jitter_boxes

scene = generate(SceneSpec(
    num_objects=4, num_frames=80, width=960.0, height=540.0,
    detection_dropout=0.0, detection_jitter=0.0, false_positive_rate=0.0,
    seed=7,
))
tracks = scene.training_tracks(window=20)
rng = np.random.default_rng(3)
samples = np.concatenate([
    velocities_from_boxes(_jitter_boxes(t.boxes, 0.02, rng), t.frame) for t in tracks
])
book = fit(samples, k=16, seed=3)
weights, _ = train(
    tracks, book, ModelConfig(num_clusters=book.k, hidden_dim=24),
    TrainSchedule(iterations=400, batch_size=16, learning_rate=3e-3, seed=3),
)

# two tracklets warmed up on the first 20 frames of objects 1 and 2
tracklets = []
for obj in (1, 2):
    boxes = scene.trajectories[obj]
    t = new_tracklet(obj, 1, BoundingBox(*boxes[0]), weights)
    for i in range(1, 20):
        advance(t, BoundingBox(*boxes[i]), i + 1, scene.geometry, SOURCE_DETECTED, weights)
    tracklets.append(t)

# frame 21 offers each object's true box plus one clutter detection
detections = [
    BoundingBox(*scene.trajectories[1][20]),
    BoundingBox(*scene.trajectories[2][20]),
    BoundingBox(700.0, 80.0, 60.0, 90.0),
]

gate = 2.0 * 4.0 * np.log(book.k)  # twice the uniform cost
costs = np.empty((len(tracklets), len(detections)))
for i, tracklet in enumerate(tracklets):
    for j, det in enumerate(detections):
        score = score_detection(tracklet, det, scene.geometry, book)
        costs[i, j] = -score if -score <= gate else FORBIDDEN

print(f"gate          cost ceiling {gate:.2f} (negative log-likelihood)")
print("cost matrix   rows = tracklets 1, 2; columns = det A (obj 1), det B (obj 2), clutter")
for i, row in enumerate(costs):
    cells = "  ".join(f"{c:9.3f}" if np.isfinite(c) else "  blocked" for c in row)
    print(f"  tracklet {tracklets[i].tracklet_id}: {cells}")

pairs = solve(costs)
names = ["det A", "det B", "clutter"]
print("assignment    " + ", ".join(
    f"tracklet {tracklets[r].tracklet_id} -> {names[c]}" for r, c in pairs
))
unmatched = set(range(len(detections))) - {c for _, c in pairs}
print("unmatched     " + ", ".join(names[j] for j in sorted(unmatched))
      + "  (a tracker would consider it for a new identity)")
