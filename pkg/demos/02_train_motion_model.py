"""Train the recurrent motion model on a synthetic scene.

The model reads a tracklet's velocity sequence and emits, per step, four
categorical distributions over the codebook cells for the next velocity.
Training minimizes the next-step negative log-likelihood with teacher
forcing mixed in late in the schedule.

One detail matters more than any hyperparameter here: the codebook must be
fit on velocities carrying the same jitter the training schedule applies.
Fit it on clean tracks and the cells span a fraction of what training
consumes, so most targets clip onto the two edge cells and the model
learns that edge cells dominate.

Run:  python3 demos/02_train_motion_model.py
"""

import numpy as np

from gaptrack import (
    ModelConfig,
    SceneSpec,
    TrainSchedule,
    fit,
    generate,
    next_step_accuracy,
    train,
    velocities_from_boxes,
)
from gaptrack.training import _jitter_boxes

scene = generate(SceneSpec(
    num_objects=6, num_frames=120, width=960.0, height=540.0,
    detection_dropout=0.0, detection_jitter=0.0, false_positive_rate=0.0,
    seed=7, name="train-demo",
))
tracks = scene.training_tracks(window=25)
print(f"scene         {len(scene.trajectories)} objects, {scene.spec.num_frames} frames"
      f" -> {len(tracks)} training windows")

schedule = TrainSchedule(
    iterations=1000, batch_size=16, learning_rate=3e-3, jitter_fraction=0.02, seed=3,
)
rng = np.random.default_rng(3)
samples = np.concatenate([
    velocities_from_boxes(_jitter_boxes(t.boxes, schedule.jitter_fraction, rng), t.frame)
    for t in tracks
])
book = fit(samples, k=32, seed=3)
print(f"codebook      fit on {len(samples)} jittered velocities, k={book.k}")

config = ModelConfig(num_clusters=book.k, hidden_dim=24)
weights, trace = train(tracks, book, config, schedule)
print(f"training      {schedule.iterations} iterations, "
      f"loss {trace[0]:.3f} -> {trace[-1]:.3f}")

# clean tracks quantize against the jitter-wide codebook, so perfect
# per-cell prediction is not on the table; the bar to clear is chance
accuracy = next_step_accuracy(weights, tracks, book)
print(f"quality       next-step argmax accuracy {accuracy:.3f}"
      f" vs {1.0 / book.k:.3f} chance over {book.k} cells")
print(f"              (a uniform model's loss would sit at "
      f"{-4.0 * np.log(1.0 / book.k):.2f} per step)")
