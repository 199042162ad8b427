"""The sequence-representation objective and its alternating solver.

Given one sequence X (positives) and a negative set Y, learn an
orthonormal basis U that maximizes the transport distance between the
projected positives and the negatives, minus a distortion penalty (how
much projecting loses of X) and a temporal-ordering penalty (hinge on the
projection energies ||U^T x_t||^2, which must grow by a margin eta along
the sequence).

The solver alternates a coupling step (proximal-point transport solve
against the current projection) with a subspace step (Riemannian conjugate
gradient on a fixed-coupling surrogate). The default surrogate is the
Frobenius form -||U U^T X - Y pi^T||_F^2, whose penalties are scaled by n
and n-1 to stay commensurate with its summed-over-frames magnitude; the
exact sum_ij pi_ij ||U U^T x_i - y_j||^2 form is available behind
``exact_ot_grad``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .adversarial import NegativeSet
from .data import FeatureSequence
from .grassmann import RcgConfig, SubspacePoint, rcg_minimize
from .transport import (Coupling, IpotConfig, Metric, cost_matrix, ipot,
                        transport_cost, uniform_marginal)


class PoolingMode(str, enum.Enum):
    SUBSPACE = "subspace"
    AVGPOOL_PROJECTED = "avgpool_projected"
    AVGPOOL_RAW = "avgpool_raw"


@dataclass(frozen=True)
class AcotConfig:
    """Representation-learning knobs. beta1 weights distortion, beta2 the
    temporal ordering hinge with margin eta; k is the subspace dimension."""

    k: int = 1
    beta1: float = 1.0
    beta2: float = 10.0
    eta: float = 0.01
    metric: Metric = Metric.SQUARED_EUCLIDEAN
    outer_rounds: int = 3
    ot_weight: float = 1.0
    exact_ot_grad: bool = False
    ipot: IpotConfig = field(default_factory=IpotConfig)
    rcg: RcgConfig = field(default_factory=RcgConfig)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.eta < 0 or self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("eta and the beta weights must be >= 0")
        if self.outer_rounds < 1:
            raise ValueError("outer_rounds must be >= 1")
        object.__setattr__(self, "metric", Metric(self.metric))


@dataclass(frozen=True)
class AcotObjectiveParts:
    """One evaluation of the objective, split into its three terms.

    ``total = ot_term - distortion - ordering`` (the quantity being
    maximized); distortion and ordering carry their beta weights.
    """

    ot_term: float
    distortion: float
    ordering: float
    total: float


def distortion_penalty(seq: FeatureSequence, u: SubspacePoint) -> float:
    """(1/n) sum_t ||U U^T x_t - x_t||^2, the mean projection residual."""
    if u.dim != seq.dim:
        raise ValueError("subspace dimension does not match the sequence")
    residual = seq.features - u.project(seq.features)
    return float(np.sum(residual * residual) / seq.length)


def _projection_energies(features: np.ndarray, basis: np.ndarray) -> np.ndarray:
    proj = basis.T @ features
    return np.sum(proj * proj, axis=0)


def ordering_penalty(seq: FeatureSequence, u: SubspacePoint,
                     eta: float) -> float:
    """Mean hinge on consecutive projection energies:
    (1/(n-1)) sum_t max(0, ||U^T x_t||^2 + eta - ||U^T x_{t+1}||^2);
    zero for single-frame sequences."""
    if u.dim != seq.dim:
        raise ValueError("subspace dimension does not match the sequence")
    n = seq.length
    if n == 1:
        return 0.0
    e = _projection_energies(seq.features, u.basis)
    hinges = np.maximum(0.0, e[:-1] + eta - e[1:])
    return float(hinges.sum() / (n - 1))


def ordering_satisfaction(seq: FeatureSequence, u: SubspacePoint,
                          eta: float) -> float:
    """Fraction of consecutive-frame constraints
    ||U^T x_t||^2 + eta <= ||U^T x_{t+1}||^2 satisfied (1.0 when n = 1)."""
    if seq.length == 1:
        return 1.0
    e = _projection_energies(seq.features, u.basis)
    return float(np.mean(e[:-1] + eta <= e[1:]))


def acot_objective(seq: FeatureSequence, negatives: NegativeSet,
                   u: SubspacePoint, plan: Coupling,
                   cfg: AcotConfig = AcotConfig()) -> AcotObjectiveParts:
    """Evaluate the true objective for a given coupling and subspace."""
    if plan.plan.shape != (seq.length, negatives.count):
        raise ValueError("coupling shape must be (sequence length, negatives)")
    cost = cost_matrix(u.project(seq.features), negatives.samples, cfg.metric)
    ot_term = transport_cost(plan, cost)
    distortion = cfg.beta1 * distortion_penalty(seq, u)
    ordering = cfg.beta2 * ordering_penalty(seq, u, cfg.eta)
    return AcotObjectiveParts(
        ot_term=float(ot_term),
        distortion=float(distortion),
        ordering=float(ordering),
        total=float(ot_term - distortion - ordering),
    )


@dataclass(frozen=True)
class SubspaceContrastObjective:
    """Fixed-coupling objective minimized in the subspace step.

        F(U) = -w * OT(U) + beta1 * sum_t ||U U^T x_t - x_t||^2
                          + beta2 * sum_t hinge_t(U)

    where OT(U) is either the Frobenius surrogate ||U U^T X - Y pi^T||_F^2
    or (with ``exact_ot_grad``) the exact coupled sum
    sum_ij pi_ij ||U U^T x_i - y_j||^2. Hinge subgradient at an exactly
    zero pre-activation is 0, matching the ReLU convention.
    """

    x: np.ndarray
    y: np.ndarray
    plan: np.ndarray
    cfg: AcotConfig

    def _hinge_pre(self, basis: np.ndarray) -> np.ndarray:
        e = _projection_energies(self.x, basis)
        return e[:-1] + self.cfg.eta - e[1:]

    def value(self, u: SubspacePoint) -> float:
        basis = u.basis
        proj = u.project(self.x)
        if self.cfg.exact_ot_grad:
            diffsq = (
                np.sum(proj * proj, axis=0)[:, None]
                + np.sum(self.y * self.y, axis=0)[None, :]
                - 2.0 * (proj.T @ self.y)
            )
            ot = float(np.sum(self.plan * diffsq))
        else:
            z = self.y @ self.plan.T
            ot = float(np.sum((proj - z) ** 2))
        distortion = float(np.sum((proj - self.x) ** 2))
        hinges = np.maximum(0.0, self._hinge_pre(basis))
        return (-self.cfg.ot_weight * ot
                + self.cfg.beta1 * distortion
                + self.cfg.beta2 * float(hinges.sum()))

    def euclidean_grad(self, u: SubspacePoint) -> np.ndarray:
        basis = u.basis
        gproj = self.x.T @ basis  # (n, k)
        if self.cfg.exact_ot_grad:
            row = self.plan.sum(axis=1)
            cross = self.x @ self.plan @ self.y.T
            a_u = (self.x * row) @ gproj  # X diag(row) X^T U
            grad_ot = 2.0 * a_u - 2.0 * (cross + cross.T) @ basis
        else:
            z = self.y @ self.plan.T
            xz = self.x @ z.T
            grad_ot = 2.0 * (self.x @ gproj) - 2.0 * (xz + xz.T) @ basis
        grad_dist = -2.0 * self.cfg.beta1 * (self.x @ gproj)
        pre = self._hinge_pre(basis)
        active = pre > 0
        w = np.zeros(self.x.shape[1])
        w[:-1][active] += 1.0
        w[1:][active] -= 1.0
        grad_ord = 2.0 * self.cfg.beta2 * ((self.x * w) @ gproj)
        return -self.cfg.ot_weight * grad_ot + grad_dist + grad_ord


def _svd_init(features: np.ndarray, k: int, seed) -> SubspacePoint:
    """Top-k left singular vectors of X, the best rank-k projector for the
    sequence; completed with seeded random orthonormal directions when the
    sequence has fewer than k frames."""
    u_full, _, _ = np.linalg.svd(features, full_matrices=False)
    base = u_full[:, :min(k, u_full.shape[1])]
    if base.shape[1] < k:
        rng = np.random.default_rng(seed)
        d = features.shape[0]
        while base.shape[1] < k:
            extra = rng.standard_normal((d, k - base.shape[1]))
            extra -= base @ (base.T @ extra)
            q, r = np.linalg.qr(extra)
            keep = np.abs(np.diag(r)) > 1e-10
            base = np.hstack([base, q[:, keep]])
    return SubspacePoint(base[:, :k])


def learn_representation(seq: FeatureSequence, negatives: NegativeSet,
                         cfg: AcotConfig = AcotConfig(), seed=0):
    """Alternating minimization: coupling step, then subspace step, for
    ``cfg.outer_rounds`` rounds. Returns (subspace, trace) where trace
    holds the objective parts evaluated after each round.

    The seed only matters when k exceeds the sequence rank and the SVD
    initialization needs random completion.
    """
    if negatives.dim != seq.dim:
        raise ValueError("negatives dimension does not match the sequence")
    if cfg.k > seq.dim:
        raise ValueError("k may not exceed the feature dimension")
    u = _svd_init(seq.features, cfg.k, seed)
    mu = uniform_marginal(seq.length)
    nu = uniform_marginal(negatives.count)
    trace: list[AcotObjectiveParts] = []
    for _ in range(cfg.outer_rounds):
        cost = cost_matrix(u.project(seq.features), negatives.samples,
                           cfg.metric)
        plan = ipot(cost, mu, nu, cfg.ipot)
        objective = SubspaceContrastObjective(seq.features, negatives.samples,
                                              plan.plan, cfg)
        u = rcg_minimize(objective, u, cfg.rcg)
        trace.append(acot_objective(seq, negatives, u, plan, cfg))
    return u, trace


def pool_sequence(seq: FeatureSequence, u: SubspacePoint, mode: PoolingMode):
    """Sequence-level representation: the subspace itself, the column mean
    of the projected frames, or the raw column mean (which ignores U)."""
    mode = PoolingMode(mode)
    if u.dim != seq.dim:
        raise ValueError("subspace dimension does not match the sequence")
    if mode is PoolingMode.SUBSPACE:
        return u
    if mode is PoolingMode.AVGPOOL_PROJECTED:
        return u.project(seq.features).mean(axis=1)
    return seq.features.mean(axis=1)
