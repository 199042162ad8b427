"""Tiny fixed-architecture MLPs with hand-written reverse-mode gradients,
and the RMSprop update used by every trained model in this package.

Three architectures exist: a generator (d -> d -> d -> d, ReLU after the
first two affine layers), a critic with the same trunk but a scalar head
(d -> d -> d -> 1), and a single-layer linear classifier (d -> c).
Inputs are column vectors; 2-D inputs are treated as batches of columns
and parameter gradients are summed over the batch. The ReLU subgradient
at exactly 0 is taken to be 0.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class Arch(str, enum.Enum):
    GENERATOR = "generator"
    CRITIC = "critic"
    CLASSIFIER = "classifier"


@dataclass
class MlpParams:
    """Weights and biases, layer by layer: out = W @ a + b."""

    arch: Arch
    layers: list[tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        self.arch = Arch(self.arch)
        self.validate()

    def validate(self) -> None:
        expected = {Arch.GENERATOR: 3, Arch.CRITIC: 3, Arch.CLASSIFIER: 1}
        if len(self.layers) != expected[self.arch]:
            raise ValueError(f"{self.arch.value} needs {expected[self.arch]} layers")
        in_dim = self.layers[0][0].shape[1]
        prev = in_dim
        for i, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.size:
                raise ValueError(f"layer {i} has inconsistent shapes")
            if w.shape[1] != prev:
                raise ValueError(f"layer {i} input size mismatch")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i} has non-finite parameters")
            prev = w.shape[0]
        if self.arch is Arch.GENERATOR and prev != in_dim:
            raise ValueError("generator must map d -> d")
        if self.arch is Arch.CRITIC and prev != 1:
            raise ValueError("critic must end in a scalar output")

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams(self.arch, [(w.copy(), b.copy()) for w, b in self.layers])


def init_mlp(arch: Arch, d: int, num_classes: int | None = None, rng=None,
             scale: float = 0.02) -> MlpParams:
    """Gaussian init at the usual GAN scale (0.02); classifier needs
    ``num_classes``."""
    rng = np.random.default_rng(rng)
    arch = Arch(arch)
    if arch is Arch.CLASSIFIER:
        if num_classes is None:
            raise ValueError("classifier init needs num_classes")
        dims = [(num_classes, d)]
    elif arch is Arch.CRITIC:
        dims = [(d, d), (d, d), (1, d)]
    else:
        dims = [(d, d), (d, d), (d, d)]
    layers = [(scale * rng.standard_normal(shape), np.zeros(shape[0]))
              for shape in dims]
    return MlpParams(arch, layers)


def _as_batch(v: np.ndarray) -> tuple[np.ndarray, bool]:
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return v[:, None], True
    if v.ndim == 2:
        return v, False
    raise ValueError("input must be a vector or a matrix of column samples")


def _forward_cached(params: MlpParams, v: np.ndarray):
    """Returns (output, activations, preactivations) on a 2-D batch."""
    acts = [v]
    pres = []
    a = v
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        pre = w @ a + b[:, None]
        pres.append(pre)
        a = np.maximum(pre, 0.0) if i < last else pre
        acts.append(a)
    return a, acts, pres


def mlp_forward(params: MlpParams, v: np.ndarray) -> np.ndarray:
    """Forward pass; affine-ReLU-affine-ReLU-affine for the 3-layer nets,
    a single affine map for the classifier."""
    batch, squeeze = _as_batch(v)
    if batch.shape[0] != params.in_dim:
        raise ValueError("input dimension does not match the architecture")
    if not np.isfinite(batch).all():
        raise ValueError("non-finite input")
    out, _, _ = _forward_cached(params, batch)
    return out[:, 0] if squeeze else out


def mlp_backward(params: MlpParams, v: np.ndarray, upstream: np.ndarray):
    """Exact reverse-mode gradients of the forward map.

    Returns (param_grads, input_grad) where param_grads mirrors
    ``params.layers``; for batched input the parameter gradients are
    summed over columns.
    """
    batch, squeeze = _as_batch(v)
    if batch.shape[0] != params.in_dim:
        raise ValueError("input dimension does not match the architecture")
    up, up_squeezed = _as_batch(upstream)
    if squeeze != up_squeezed or up.shape != (params.out_dim, batch.shape[1]):
        raise ValueError("upstream gradient shape does not match the output")
    _, acts, pres = _forward_cached(params, batch)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)
    delta = up
    for i in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[i]
        grads[i] = (delta @ acts[i].T, delta.sum(axis=1))
        delta = w.T @ delta
        if i > 0:
            delta = delta * (pres[i - 1] > 0)
    input_grad = delta[:, 0] if squeeze else delta
    return grads, input_grad


def zero_like_grads(params: MlpParams):
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]


def add_grads(total, extra):
    for (tw, tb), (ew, eb) in zip(total, extra):
        tw += ew
        tb += eb
    return total


# ---------------------------------------------------------------------------
# softmax helpers
# ---------------------------------------------------------------------------

def softmax_columns(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def softmax_ce(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns (value, dvalue/dlogits); logits is (c, B), labels (B,).
    """
    labels = np.asarray(labels, dtype=int)
    probs = softmax_columns(logits)
    b = logits.shape[1]
    idx = (labels, np.arange(b))
    value = float(-np.mean(np.log(np.maximum(probs[idx], 1e-300))))
    dlogits = probs.copy()
    dlogits[idx] -= 1.0
    return value, dlogits / b


def softmin_ce(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy of softmax(-logits) against integer labels:
    minimized when the true class has the *lowest* logit."""
    labels = np.asarray(labels, dtype=int)
    probs = softmax_columns(-logits)
    b = logits.shape[1]
    idx = (labels, np.arange(b))
    value = float(-np.mean(np.log(np.maximum(probs[idx], 1e-300))))
    dlogits = -probs
    dlogits[idx] += 1.0
    return value, dlogits / b


# ---------------------------------------------------------------------------
# RMSprop
# ---------------------------------------------------------------------------

def init_rmsprop_state(params: MlpParams):
    """Per-parameter squared-gradient accumulators, initialized to zero."""
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]


def rmsprop_step(params: MlpParams, grads, state, lr: float,
                 decay: float = 0.99, eps: float = 1e-8) -> None:
    """In-place update: s <- decay*s + (1-decay)*g^2,
    w <- w - lr * g / (sqrt(s) + eps), elementwise."""
    for (w, b), (gw, gb), (sw, sb) in zip(params.layers, grads, state):
        sw *= decay
        sw += (1.0 - decay) * gw * gw
        w -= lr * gw / (np.sqrt(sw) + eps)
        sb *= decay
        sb += (1.0 - decay) * gb * gb
        b -= lr * gb / (np.sqrt(sb) + eps)


def clip_weights(params: MlpParams, bound: float) -> None:
    """Clamp every parameter entry into [-bound, bound] (critic updates)."""
    for w, b in params.layers:
        np.clip(w, -bound, bound, out=w)
        np.clip(b, -bound, bound, out=b)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_mlp(path, params: MlpParams) -> None:
    payload = {
        "arch": params.arch.value,
        "layers": [{"weight": w.tolist(), "bias": b.tolist()}
                   for w, b in params.layers],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_mlp(path) -> MlpParams:
    with open(Path(path), "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    layers = [(np.asarray(layer["weight"], dtype=float),
               np.asarray(layer["bias"], dtype=float))
              for layer in payload["layers"]]
    return MlpParams(Arch(payload["arch"]), layers)
