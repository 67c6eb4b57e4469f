"""Autoregressive motion model over quantized box velocities.

A single-layer LSTM consumes continuous velocity inputs (through a ReLU
embedding) and emits, at every step, four independent categorical
distributions over the velocity codebook, one per component, plus a
continuous residual read-out used only as a training regularizer. The
product of the four categoricals is the one-step predictive distribution;
log-likelihoods over a whole tracklet are sums of per-step component terms.

Implemented directly on numpy arrays so the training module can
differentiate every operation by hand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codebook import ClusterIndexQuad, Codebook
from .errors import CodebookMismatchError, NumericOverflowError, SchemaError
from .geometry import VelocityDelta

_FILE_MAGIC = "gaptrack-motion-model"
_FILE_VERSION = 1

# Probabilities are floored before taking logs so a confident model can
# never produce -inf scores for an observed transition.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    """Architecture sizes: velocity dimensionality, LSTM width, codebook arity."""

    num_clusters: int
    hidden_dim: int = 512
    input_dim: int = 4

    def __post_init__(self):
        if self.num_clusters < 1:
            raise ValueError(f"num_clusters must be >= 1, got {self.num_clusters}")
        if self.hidden_dim < 1 or self.input_dim < 1:
            raise ValueError("hidden_dim and input_dim must be positive")


@dataclass
class ModelWeights:
    """All learnable arrays plus the input standardization constants.

    One categorical head per velocity component. ``input_shift`` and
    ``input_scale`` standardize raw normalized velocities (magnitudes around
    1e-3) before the embedding; without this the network would need
    unreachably large weights to amplify the signal. They are dataset
    statistics fixed by training, not learnable parameters.
    """

    config: ModelConfig
    embed_w: np.ndarray  # (D, H)
    embed_b: np.ndarray  # (H,)
    lstm_w: np.ndarray   # (2H, 4H), gate order [input, forget, output, candidate]
    lstm_b: np.ndarray   # (4H,)
    head_w: np.ndarray   # (C, H, K)
    head_b: np.ndarray   # (C, K)
    res_w: np.ndarray    # (H, D)
    res_b: np.ndarray    # (D,)
    input_shift: np.ndarray  # (D,)
    input_scale: np.ndarray  # (D,), strictly positive

    PARAM_NAMES = ("embed_w", "embed_b", "lstm_w", "lstm_b", "head_w", "head_b", "res_w", "res_b")

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.PARAM_NAMES}


@dataclass(frozen=True)
class RecurrentState:
    """LSTM hidden and cell vectors plus the number of velocities consumed.

    Treated as an immutable value: stepping returns a fresh state and never
    writes into an existing one, so branch exploration can share states
    without copying.
    """

    hidden: np.ndarray
    cell: np.ndarray
    steps_consumed: int = 0


def init_weights(config: ModelConfig, rng: np.random.Generator) -> ModelWeights:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) initialization with forget-gate bias 1."""
    h, d, k = config.hidden_dim, config.input_dim, config.num_clusters
    s = 1.0 / np.sqrt(h)

    def u(*shape):
        return rng.uniform(-s, s, size=shape)

    lstm_b = u(4 * h)
    lstm_b[h : 2 * h] = 1.0
    return ModelWeights(
        config=config,
        embed_w=u(d, h),
        embed_b=u(h),
        lstm_w=u(2 * h, 4 * h),
        lstm_b=lstm_b,
        head_w=u(d, h, k),
        head_b=u(d, k),
        res_w=u(h, d),
        res_b=u(d),
        input_shift=np.zeros(d),
        input_scale=np.ones(d),
    )


def init_state(weights: ModelWeights) -> RecurrentState:
    h = weights.config.hidden_dim
    return RecurrentState(hidden=np.zeros(h), cell=np.zeros(h), steps_consumed=0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_core(weights: ModelWeights, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray) -> dict:
    """One batched recurrent step without the output heads.

    ``x`` is (B, D) continuous velocities, ``h_prev``/``c_prev`` are (B, H).
    Returns every intermediate needed for backprop.
    """
    hdim = weights.config.hidden_dim
    xs = (x - weights.input_shift) / weights.input_scale
    a = xs @ weights.embed_w + weights.embed_b
    e = np.maximum(a, 0.0)
    zcat = np.concatenate([e, h_prev], axis=1)
    pre = zcat @ weights.lstm_w + weights.lstm_b
    i = _sigmoid(pre[:, :hdim])
    f = _sigmoid(pre[:, hdim : 2 * hdim])
    o = _sigmoid(pre[:, 2 * hdim : 3 * hdim])
    g = np.tanh(pre[:, 3 * hdim :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return {
        "x": x, "xs": xs, "a": a, "e": e, "h_prev": h_prev, "c_prev": c_prev,
        "i": i, "f": f, "o": o, "g": g, "c": c, "tc": tc, "h": h,
    }


def head_outputs(weights: ModelWeights, h: np.ndarray):
    """Cluster log-probabilities, probabilities, and residual read-out.

    ``h`` may be (B, H) or (B, T, H); heads apply along the last axis, so a
    whole sequence of hidden states is projected in one call.
    """
    logits = np.tensordot(h, weights.head_w, axes=([h.ndim - 1], [1])) + weights.head_b
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    log_probs = shifted - log_z
    res = h @ weights.res_w + weights.res_b
    return log_probs, np.exp(log_probs), res


def cell_forward(weights: ModelWeights, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray) -> dict:
    """One batched LSTM step with heads; see :func:`lstm_core`.

    The returned dict additionally holds the per-component cluster
    log-probabilities/probabilities and the residual read-out.
    """
    out = lstm_core(weights, x, h_prev, c_prev)
    log_probs, probs, res = head_outputs(weights, out["h"])
    out["log_probs"] = log_probs
    out["probs"] = probs
    out["res"] = res
    return out


def step(weights: ModelWeights, state: RecurrentState, delta: VelocityDelta):
    """Consume one velocity; return the new state and the (C, K) distribution quad.

    Raises :class:`NumericOverflowError` if activations leave the finite range.
    """
    out = cell_forward(weights, delta.as_array()[None, :], state.hidden[None, :], state.cell[None, :])
    probs = out["probs"][0]
    if not (np.all(np.isfinite(out["h"])) and np.all(np.isfinite(probs))):
        raise NumericOverflowError("motion model produced non-finite activations")
    new_state = RecurrentState(hidden=out["h"][0], cell=out["c"][0], steps_consumed=state.steps_consumed + 1)
    return new_state, probs


def log_likelihood(dist: np.ndarray, target: ClusterIndexQuad) -> float:
    """Sum of component log-probabilities for a cluster-index quadruple.

    Probabilities are floored at :data:`PROB_FLOOR` before the log.
    """
    dist = np.asarray(dist)
    total = 0.0
    for c, idx in enumerate(target):
        total += float(np.log(max(dist[c, int(idx)], PROB_FLOOR)))
    return total


def sample(dist: np.ndarray, rng: np.random.Generator) -> ClusterIndexQuad:
    """One multinomial draw per component, by inverse CDF; deterministic given rng state."""
    dist = np.asarray(dist)
    k = dist.shape[1]
    draws = rng.random(dist.shape[0])
    idx = []
    for c in range(dist.shape[0]):
        cdf = np.cumsum(dist[c])
        idx.append(int(min(np.searchsorted(cdf, draws[c], side="right"), k - 1)))
    return ClusterIndexQuad(*idx)


def sample_batch(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized multinomial sampling for (B, C, K) distributions; returns (B, C) int."""
    b, c, k = probs.shape
    cdf = np.cumsum(probs, axis=2)
    u = rng.random((b, c))
    idx = np.sum(cdf < u[:, :, None], axis=2)
    return np.minimum(idx, k - 1)


def argmax_quad(dist: np.ndarray) -> ClusterIndexQuad:
    """Most likely cluster index per component (greedy top-1 decoding)."""
    return ClusterIndexQuad(*(int(i) for i in np.argmax(np.asarray(dist), axis=1)))


def save_weights(path, weights: ModelWeights, codebook_checksum: str) -> None:
    """Write weights plus architecture and the checksum of the paired codebook."""
    meta = {
        "magic": _FILE_MAGIC,
        "version": _FILE_VERSION,
        "config": {
            "num_clusters": weights.config.num_clusters,
            "hidden_dim": weights.config.hidden_dim,
            "input_dim": weights.config.input_dim,
        },
        "codebook_checksum": codebook_checksum,
    }
    np.savez(
        path,
        meta=np.asarray(json.dumps(meta)),
        input_shift=weights.input_shift,
        input_scale=weights.input_scale,
        **weights.params(),
    )


def load_weights(path, codebook: Codebook | None = None) -> ModelWeights:
    """Read weights written by :func:`save_weights`.

    When ``codebook`` is given, loading refuses with
    :class:`CodebookMismatchError` unless its checksum matches the one the
    weights were saved with.
    """
    with np.load(path, allow_pickle=False) as npz:
        if "meta" not in npz:
            raise SchemaError(f"{path}: missing model metadata")
        meta = json.loads(str(npz["meta"][()]))
        if meta.get("magic") != _FILE_MAGIC:
            raise SchemaError(f"{path}: missing model file magic")
        if meta.get("version") != _FILE_VERSION:
            raise SchemaError(f"{path}: unsupported model version {meta.get('version')!r}")
        if codebook is not None and meta.get("codebook_checksum") != codebook.checksum():
            raise CodebookMismatchError(
                "weights were trained against a different codebook than the one supplied"
            )
        config = ModelConfig(**meta["config"])
        arrays = {}
        for name in ModelWeights.PARAM_NAMES + ("input_shift", "input_scale"):
            if name not in npz:
                raise SchemaError(f"{path}: missing parameter array {name!r}")
            arrays[name] = npz[name]
    expected = _expected_shapes(config)
    for name, arr in arrays.items():
        if arr.shape != expected[name]:
            raise SchemaError(
                f"{path}: parameter {name!r} has shape {arr.shape}, expected {expected[name]}"
            )
    return ModelWeights(config=config, **arrays)


def _expected_shapes(config: ModelConfig) -> dict[str, tuple]:
    h, d, k = config.hidden_dim, config.input_dim, config.num_clusters
    return {
        "embed_w": (d, h), "embed_b": (h,),
        "lstm_w": (2 * h, 4 * h), "lstm_b": (4 * h,),
        "head_w": (d, h, k), "head_b": (d, k),
        "res_w": (h, d), "res_b": (d,),
        "input_shift": (d,), "input_scale": (d,),
    }
