"""Sequence-level classification on learned representations.

Subspaces are compared with the exponential kernel
K(U1, U2) = exp(gamma * ||U1^T U2||_F^2), which is invariant to the sign
and rotation ambiguity of subspace bases; k-NN under this kernel replaces
a kernelized max-margin trainer. Pooled d-vector representations go
through a multinomial logistic classifier trained by full-batch gradient
descent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .adversarial import make_negatives, make_random_negatives
from .data import Dataset
from .grassmann import SubspacePoint, principal_angle_affinity
from .representation import (AcotConfig, PoolingMode, learn_representation,
                             pool_sequence)


def default_bandwidth(k: int) -> float:
    """0.2 / k keeps the kernel's dynamic range exp(gamma * k) = exp(0.2)
    of order one for every subspace dimension."""
    return 0.2 / k


def grassmann_kernel(u1: SubspacePoint, u2: SubspacePoint,
                     gamma: float) -> float:
    """exp(gamma * ||U1^T U2||_F^2), in [1, exp(gamma * k)]."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return float(np.exp(gamma * principal_angle_affinity(u1, u2)))


@dataclass(frozen=True)
class KernelMatrix:
    """Dense pairwise kernel values; symmetric with diagonal exp(gamma*k)."""

    values: np.ndarray
    bandwidth: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("kernel matrix must be square")
        if np.max(np.abs(values - values.T)) > 1e-10:
            raise ValueError("kernel matrix must be symmetric")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def build_kernel_matrix(points: list[SubspacePoint],
                        gamma: float) -> KernelMatrix:
    n = len(points)
    values = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            values[i, j] = grassmann_kernel(points[i], points[j], gamma)
            values[j, i] = values[i, j]
    return KernelMatrix(values, gamma)


def kernel_knn_classify(train: list[tuple[SubspacePoint, int]],
                        query: SubspacePoint, gamma: float,
                        k_nn: int = 1) -> int:
    """Majority label among the k_nn training subspaces with the largest
    kernel value to the query; vote ties resolve to the smallest label."""
    if not train:
        raise ValueError("empty training set")
    if k_nn < 1:
        raise ValueError("k_nn must be >= 1")
    values = np.array([grassmann_kernel(u, query, gamma) for u, _ in train])
    order = np.argsort(-values, kind="stable")[:k_nn]
    labels = np.array([train[i][1] for i in order])
    votes = np.bincount(labels)
    return int(votes.argmax())  # argmax returns the smallest index on ties


# ---------------------------------------------------------------------------
# linear classifier on pooled vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (c, d)
    bias: np.ndarray     # (c,)


def linear_classify_train(pairs: list[tuple[np.ndarray, int]],
                          num_classes: int | None = None, lr: float = 1.0,
                          iters: int = 2000, tol: float = 1e-8) -> LinearModel:
    """Multinomial logistic regression by full-batch gradient descent from
    a zero start (deterministic), stopping at the gradient tolerance."""
    if not pairs:
        raise ValueError("empty training set")
    x = np.stack([np.asarray(v, dtype=float) for v, _ in pairs], axis=1)
    labels = np.array([int(lab) for _, lab in pairs])
    c = num_classes if num_classes is not None else int(labels.max()) + 1
    d = x.shape[0]
    w = np.zeros((c, d))
    b = np.zeros(c)
    for _ in range(iters):
        logits = w @ x + b[:, None]
        _, dlogits = nn.softmax_ce(logits, labels)
        gw = dlogits @ x.T
        gb = dlogits.sum(axis=1)
        if max(np.abs(gw).max(), np.abs(gb).max()) <= tol:
            break
        w -= lr * gw
        b -= lr * gb
    return LinearModel(w, b)


def linear_classify_predict(model: LinearModel, v: np.ndarray) -> int:
    logits = model.weights @ np.asarray(v, dtype=float) + model.bias
    return int(logits.argmax())


# ---------------------------------------------------------------------------
# end-to-end pipelines
# ---------------------------------------------------------------------------

PIPELINES = ("avgpool_raw", "acot_subspace_knn", "acot_avgpool_linear")


@dataclass(frozen=True)
class PipelineConfig:
    """One classification pipeline: pooling mode x classifier, plus the
    negative-sampling recipe feeding the representation learner."""

    pipeline: str = "acot_subspace_knn"
    acot: AcotConfig = field(default_factory=AcotConfig)
    gamma: float | None = None
    knn: int = 1
    negatives: str = "random"  # "random" or "gan"
    negatives_per_positive: int = 2
    sigma: float = 0.01
    generator: nn.MlpParams | None = None

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"unknown pipeline {self.pipeline!r}")
        if self.negatives not in ("random", "gan"):
            raise ValueError("negatives must be 'random' or 'gan'")
        if self.negatives == "gan" and self.generator is None:
            raise ValueError("gan negatives need a trained generator")


def _learn_all(cfg: PipelineConfig, dataset: Dataset, seed, salt: int):
    """One learned subspace per sequence; negative draws are seeded per
    sequence so results do not depend on evaluation order."""
    root = np.random.SeedSequence(entropy=seed, spawn_key=(salt,))
    children = root.spawn(len(dataset))
    out = []
    for seq, child in zip(dataset, children):
        m = cfg.negatives_per_positive * seq.length
        if cfg.negatives == "gan":
            negs = make_negatives(cfg.generator, seq, m, cfg.sigma, child)
        else:
            negs = make_random_negatives(seq, m, child)
        u, _ = learn_representation(seq, negs, cfg.acot, seed=0)
        out.append(u)
    return out


def predict_pipeline(cfg: PipelineConfig, train: Dataset, test: Dataset,
                     seed=0) -> np.ndarray:
    """Predicted labels for every test sequence under the configured
    pipeline. Train/test label spaces must match."""
    if train.num_classes != test.num_classes:
        raise ValueError("train and test label spaces disagree")
    if train.dim != test.dim:
        raise ValueError("train and test feature dimensions disagree")

    if cfg.pipeline == "avgpool_raw":
        pooled = [(seq.features.mean(axis=1), seq.label) for seq in train]
        model = linear_classify_train(pooled, num_classes=train.num_classes)
        return np.array([
            linear_classify_predict(model, seq.features.mean(axis=1))
            for seq in test
        ])

    train_subs = _learn_all(cfg, train, seed, salt=0)
    test_subs = _learn_all(cfg, test, seed, salt=1)

    if cfg.pipeline == "acot_subspace_knn":
        gamma = cfg.gamma if cfg.gamma is not None else default_bandwidth(cfg.acot.k)
        labelled = list(zip(train_subs, (seq.label for seq in train)))
        return np.array([
            kernel_knn_classify(labelled, u, gamma, cfg.knn)
            for u in test_subs
        ])

    pooled = [
        (pool_sequence(seq, u, PoolingMode.AVGPOOL_PROJECTED), seq.label)
        for seq, u in zip(train, train_subs)
    ]
    model = linear_classify_train(pooled, num_classes=train.num_classes)
    return np.array([
        linear_classify_predict(
            model, pool_sequence(seq, u, PoolingMode.AVGPOOL_PROJECTED))
        for seq, u in zip(test, test_subs)
    ])


def evaluate(cfg: PipelineConfig, train: Dataset, test: Dataset,
             seed=0) -> float:
    """Test accuracy of the configured pipeline, in [0, 1]."""
    preds = predict_pipeline(cfg, train, test, seed)
    truth = np.array([seq.label for seq in test])
    return float(np.mean(preds == truth))


def per_class_accuracy(cfg: PipelineConfig, train: Dataset, test: Dataset,
                       seed=0) -> tuple[float, list[float]]:
    """(overall accuracy, accuracy per class id)."""
    preds = predict_pipeline(cfg, train, test, seed)
    truth = np.array([seq.label for seq in test])
    per_class = []
    for c in range(test.num_classes):
        mask = truth == c
        per_class.append(float(np.mean(preds[mask] == c)) if mask.any() else float("nan"))
    return float(np.mean(preds == truth)), per_class
