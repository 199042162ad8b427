"""Adversarial negative sampling.

A frozen linear frame classifier, a weight-clipped Wasserstein critic, and
a generator trained so that perturbed positives (a) stay close to the
positive distribution under the critic's dual estimate and (b) make the
frozen classifier fail, while the perturbation energy stays small.

Negatives are built exactly the same way everywhere: draw z from a normal
centered at the sequence mean with std sigma, perturb a positive frame by
the generator output, pass through ReLU, and rescale to unit norm. The
classifier terms are realized as cross-entropies: softmax against the true
label on clean frames (constant in the generator parameters) and
softmin - i.e. softmax of negated logits - against the true label on
perturbed frames.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import nn
from .data import Dataset, FeatureSequence, sequence_mean
from .errors import NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GanConfig:
    """Training constants; defaults follow the standard weight-clipped
    Wasserstein recipe (clip 0.01, RMSprop 0.99/1e-8, 5 critic steps)."""

    sigma: float = 0.01
    lambda1: float = 0.1
    lambda2: float = 1.0
    lr: float = 1e-4
    critic_steps: int = 5
    clip: float = 0.01
    rmsprop_decay: float = 0.99
    rmsprop_eps: float = 1e-8
    iters: int = 1000
    batch: int = 512
    eval_every: int = 100
    # at the RMSprop movement budget lr * iters, a near-dead init never
    # wakes the hidden units; 0.15 keeps initial perturbations small but
    # the activations alive
    init_scale: float = 0.15

    def __post_init__(self):
        for name in ("sigma", "lr", "clip", "rmsprop_decay", "rmsprop_eps",
                     "init_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("critic_steps", "iters", "batch", "eval_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class NegativeSet:
    """Negatives for one sequence: (d, m) unit-norm non-negative columns."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float, copy=True)
        if samples.ndim != 2 or samples.shape[1] < 1:
            raise ValueError("samples must be a d x m matrix")
        if not np.isfinite(samples).all():
            raise ValueError("non-finite negative samples")
        if (samples < 0).any():
            raise ValueError("negative samples must be entrywise non-negative")
        norms = np.linalg.norm(samples, axis=0)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("negative samples must have unit norm")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[0]

    @property
    def count(self) -> int:
        return self.samples.shape[1]


# ---------------------------------------------------------------------------
# perturbed-sample construction
# ---------------------------------------------------------------------------

def _perturb(x: np.ndarray, x_hat: np.ndarray):
    """y = ReLU(x + x_hat) rescaled to unit norm, plus backprop caches."""
    pre = x + x_hat
    mask = pre > 0
    relu = np.where(mask, pre, 0.0)
    norms = np.linalg.norm(relu, axis=0)
    if (norms <= 0).any():
        raise NumericalError("perturbed sample collapsed to the zero vector")
    y = relu / norms
    return y, mask, norms


def _perturbation_grad_to_xhat(y, mask, norms, d_y):
    """Chain d(loss)/dy through unit normalization and the ReLU mask."""
    dots = np.einsum("ij,ij->j", y, d_y)
    d_relu = (d_y - y * dots) / norms
    return d_relu * mask


def make_negatives(generator: nn.MlpParams, seq: FeatureSequence, m: int,
                   sigma: float, seed) -> NegativeSet:
    """Draw m negatives for one sequence, cycling through its frames.

    Noise z ~ N(sequence mean, sigma^2 I); negative j perturbs frame
    j mod n. Deterministic given (generator, seq, m, sigma, seed).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    mean = sequence_mean(seq)
    cols = seq.features[:, np.arange(m) % seq.length]
    z = mean[:, None] + sigma * rng.standard_normal((seq.dim, m))
    x_hat = nn.mlp_forward(generator, z)
    y, _, _ = _perturb(cols, x_hat)
    return NegativeSet(y)


def make_random_negatives(seq: FeatureSequence, m: int, seed) -> NegativeSet:
    """Noise-only baseline: y = ReLU(x - max(x) * eps), eps ~ N(0, I),
    rescaled to unit norm, cycling through frames like ``make_negatives``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    cols = seq.features[:, np.arange(m) % seq.length]
    scales = cols.max(axis=0)
    z = scales[None, :] * rng.standard_normal((seq.dim, m))
    y, _, _ = _perturb(cols, -z)
    return NegativeSet(y)


# ---------------------------------------------------------------------------
# frozen frame classifier
# ---------------------------------------------------------------------------

def _frame_pool(dataset: Dataset):
    frames = np.concatenate([seq.features for seq in dataset], axis=1)
    labels = np.concatenate(
        [np.full(seq.length, seq.label, dtype=int) for seq in dataset])
    means = np.concatenate(
        [np.tile(sequence_mean(seq)[:, None], (1, seq.length))
         for seq in dataset], axis=1)
    return frames, labels, means


def classifier_loss_and_grads(zeta: nn.MlpParams, frames: np.ndarray,
                              labels: np.ndarray):
    logits = nn.mlp_forward(zeta, frames)
    value, dlogits = nn.softmax_ce(logits, labels)
    grads, _ = nn.mlp_backward(zeta, frames, dlogits)
    return value, grads


def train_classifier(dataset: Dataset, iters: int = 500, lr: float = 2e-2,
                     seed=0) -> nn.MlpParams:
    """Train the linear frame classifier with RMSprop on softmax
    cross-entropy (frame features vs. the owning sequence's label) and
    freeze it. Training accuracy is logged.

    The default learning rate suits desk-scale dimensions; at d ~ 1000 the
    usual 1e-4 reaches a comparably scaled weight matrix in 500 iterations.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    frames, labels, _ = _frame_pool(dataset)
    rng = np.random.default_rng(seed)
    zeta = nn.init_mlp(nn.Arch.CLASSIFIER, dataset.dim,
                       num_classes=dataset.num_classes, rng=rng, scale=0.01)
    state = nn.init_rmsprop_state(zeta)
    for _ in range(iters):
        _, grads = classifier_loss_and_grads(zeta, frames, labels)
        nn.rmsprop_step(zeta, grads, state, lr)
    acc = classifier_accuracy(zeta, dataset)
    logger.info("frame classifier train accuracy: %.3f", acc)
    return zeta


def classifier_accuracy(zeta: nn.MlpParams, dataset: Dataset) -> float:
    frames, labels, _ = _frame_pool(dataset)
    pred = nn.mlp_forward(zeta, frames).argmax(axis=0)
    return float(np.mean(pred == labels))


# ---------------------------------------------------------------------------
# WGAN losses (single code path for training and for gradient checks)
# ---------------------------------------------------------------------------

def critic_loss_and_grads(critic: nn.MlpParams, x: np.ndarray, y: np.ndarray):
    """Loss minimized by the critic: mean h(y) - mean h(x); the negatives
    are treated as constants."""
    b = x.shape[1]
    up_x = np.full((1, b), -1.0 / b)
    up_y = np.full((1, y.shape[1]), 1.0 / y.shape[1])
    grads_x, _ = nn.mlp_backward(critic, x, up_x)
    grads_y, _ = nn.mlp_backward(critic, y, up_y)
    h_x = nn.mlp_forward(critic, x)
    h_y = nn.mlp_forward(critic, y)
    value = float(h_y.mean() - h_x.mean())
    return value, nn.add_grads(grads_x, grads_y)


def generator_loss_and_grads(generator: nn.MlpParams, critic: nn.MlpParams,
                             zeta: nn.MlpParams, x: np.ndarray,
                             z: np.ndarray, labels: np.ndarray,
                             cfg: GanConfig,
                             include_positive_class_term: bool = False):
    """Loss minimized by the generator:

        mean h(x) - mean h(y) + lambda1 * softmin-CE(zeta(y), labels)
                              + lambda2 * mean ||x_hat||^2

    with y = ReLU(x + x_hat)/||.|| and x_hat the generator output on z.
    ``include_positive_class_term`` adds lambda1 * softmax-CE(zeta(x),
    labels) to the reported value; that term does not depend on the
    generator, so gradients are identical either way.

    Returns (value, generator_grads, metrics dict).
    """
    b = x.shape[1]
    x_hat = nn.mlp_forward(generator, z)
    y, mask, norms = _perturb(x, x_hat)

    h_x = nn.mlp_forward(critic, x)
    h_y = nn.mlp_forward(critic, y)
    logits_y = nn.mlp_forward(zeta, y)
    ce_val, dlogits = nn.softmin_ce(logits_y, labels)
    pert_sq = float(np.mean(np.sum(x_hat * x_hat, axis=0)))

    value = float(h_x.mean() - h_y.mean()) + cfg.lambda1 * ce_val \
        + cfg.lambda2 * pert_sq
    if include_positive_class_term:
        logits_x = nn.mlp_forward(zeta, x)
        value += cfg.lambda1 * nn.softmax_ce(logits_x, labels)[0]

    # d(loss)/dy from the critic term and the softmin term
    _, d_y_critic = nn.mlp_backward(critic, y, np.full((1, b), -1.0 / b))
    _, d_y_ce = nn.mlp_backward(zeta, y, cfg.lambda1 * dlogits)
    d_y = d_y_critic + d_y_ce
    d_xhat = _perturbation_grad_to_xhat(y, mask, norms, d_y)
    d_xhat += (2.0 * cfg.lambda2 / b) * x_hat
    grads, _ = nn.mlp_backward(generator, z, d_xhat)

    metrics = {
        "critic_gap": float(h_x.mean() - h_y.mean()),
        "softmin_ce": ce_val,
        "mean_perturbation_sq": pert_sq,
    }
    return value, grads, metrics


# ---------------------------------------------------------------------------
# training loop and evaluation
# ---------------------------------------------------------------------------

def fooling_rates(generator: nn.MlpParams, zeta: nn.MlpParams,
                  dataset: Dataset, sigma: float, seed) -> tuple[float, float]:
    """Evaluate one perturbed sample per frame over the whole dataset.

    loose: fraction where the classifier's argmax is not the true label.
    strict: fraction where the true label is the *least* likely class
    (argmin of the logits). The two criteria are not ordered in general.
    """
    rng = np.random.default_rng(seed)
    loose_hits = 0
    strict_hits = 0
    total = 0
    for seq in dataset:
        mean = sequence_mean(seq)
        z = mean[:, None] + sigma * rng.standard_normal(seq.features.shape)
        x_hat = nn.mlp_forward(generator, z)
        y, _, _ = _perturb(seq.features, x_hat)
        logits = nn.mlp_forward(zeta, y)
        loose_hits += int(np.sum(logits.argmax(axis=0) != seq.label))
        strict_hits += int(np.sum(logits.argmin(axis=0) == seq.label))
        total += seq.length
    return loose_hits / total, strict_hits / total


def train_wgan(dataset: Dataset, zeta: nn.MlpParams, cfg: GanConfig,
               seed=0):
    """Alternate ``critic_steps`` clipped critic updates with one generator
    update. Returns (generator, critic, history); history holds one record
    per evaluation interval with both losses, both fooling rates, and the
    mean squared perturbation.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    frames, labels, means = _frame_pool(dataset)
    total = frames.shape[1]
    d = dataset.dim

    root = np.random.SeedSequence(seed)
    train_key, eval_key, init_key = root.spawn(3)
    rng = np.random.default_rng(train_key)
    init_rng = np.random.default_rng(init_key)
    generator = nn.init_mlp(nn.Arch.GENERATOR, d, rng=init_rng,
                            scale=cfg.init_scale)
    critic = nn.init_mlp(nn.Arch.CRITIC, d, rng=init_rng,
                         scale=cfg.init_scale)
    state_g = nn.init_rmsprop_state(generator)
    state_c = nn.init_rmsprop_state(critic)

    def sample_batch():
        idx = rng.integers(0, total, cfg.batch)
        x = frames[:, idx]
        z = means[:, idx] + cfg.sigma * rng.standard_normal((d, cfg.batch))
        return x, z, labels[idx]

    history = []
    eval_seeds = np.random.default_rng(eval_key).integers(0, 2**63, cfg.iters)
    for it in range(cfg.iters):
        critic_loss = np.nan
        for _ in range(cfg.critic_steps):
            x, z, _ = sample_batch()
            x_hat = nn.mlp_forward(generator, z)
            y, _, _ = _perturb(x, x_hat)
            critic_loss, cgrads = critic_loss_and_grads(critic, x, y)
            nn.rmsprop_step(critic, cgrads, state_c, cfg.lr,
                            cfg.rmsprop_decay, cfg.rmsprop_eps)
            nn.clip_weights(critic, cfg.clip)
        x, z, lab = sample_batch()
        gen_loss, ggrads, metrics = generator_loss_and_grads(
            generator, critic, zeta, x, z, lab, cfg)
        if not np.isfinite(gen_loss) or not np.isfinite(critic_loss):
            raise NumericalError(
                f"non-finite loss at iteration {it}: "
                f"critic={critic_loss!r} generator={gen_loss!r}"
            )
        nn.rmsprop_step(generator, ggrads, state_g, cfg.lr,
                        cfg.rmsprop_decay, cfg.rmsprop_eps)

        if (it + 1) % cfg.eval_every == 0 or it + 1 == cfg.iters:
            loose, strict = fooling_rates(generator, zeta, dataset, cfg.sigma,
                                          seed=int(eval_seeds[it]))
            record = {
                "iteration": it + 1,
                "critic_loss": float(critic_loss),
                "generator_loss": float(gen_loss),
                "fooling_loose": loose,
                "fooling_strict": strict,
                "mean_perturbation_sq": metrics["mean_perturbation_sq"],
            }
            history.append(record)
            logger.debug("wgan iter %d: %s", it + 1, record)
    return generator, critic, history
