"""Discrete optimal transport between point clouds.

Ground-cost matrices, a proximal-point coupling solver, an exhaustive
oracle for small uniform problems, and plan evaluation. The solver is the
inexact proximal point method (IPOT): each outer iteration re-centers the
Gibbs kernel G = exp(-C / beta) at the current plan and applies a fixed
small number of Sinkhorn scaling rounds, so the iterates approach the
*unregularized* optimum instead of an entropy-smoothed one.

All operations are stateless and safe to call concurrently on distinct
inputs.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

_UNDERFLOW_FLOOR = 1e-300
_PROB_TOL = 1e-12


class Metric(str, enum.Enum):
    """Ground cost between columns: plain Euclidean norm or its square."""

    EUCLIDEAN = "euclidean"
    SQUARED_EUCLIDEAN = "sqeuclidean"


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise ground costs, (n, m), non-negative and finite."""

    costs: np.ndarray
    metric: Metric

    def __post_init__(self):
        costs = np.array(self.costs, dtype=float, copy=True)
        if costs.ndim != 2:
            raise ValueError("costs must be a 2-D matrix")
        if not np.isfinite(costs).all():
            raise ValueError("cost matrix has non-finite entries")
        if (costs < 0).any():
            raise ValueError("cost matrix has negative entries")
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "metric", Metric(self.metric))

    @property
    def shape(self):
        return self.costs.shape


@dataclass(frozen=True)
class Coupling:
    """A transport plan with its prescribed marginals.

    ``plan`` is (n, m) non-negative; ``row_marginal`` / ``col_marginal``
    are probability vectors. How tightly the plan's row/column sums match
    the marginals is checked by :meth:`check_marginals` at creation sites
    (the solver enforces its configured tolerance before returning).
    """

    plan: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        plan = np.array(self.plan, dtype=float, copy=True)
        mu = np.array(self.row_marginal, dtype=float, copy=True)
        nu = np.array(self.col_marginal, dtype=float, copy=True)
        if plan.ndim != 2 or plan.shape != (mu.size, nu.size):
            raise ValueError("plan shape must match marginal lengths")
        if not np.isfinite(plan).all():
            raise ValueError("plan has non-finite entries")
        if (plan < 0).any():
            raise ValueError("plan has negative entries")
        for name, v in (("row", mu), ("col", nu)):
            if (v < 0).any() or abs(v.sum() - 1.0) > _PROB_TOL:
                raise ValueError(f"{name} marginal is not a probability vector")
        for a in (plan, mu, nu):
            a.setflags(write=False)
        object.__setattr__(self, "plan", plan)
        object.__setattr__(self, "row_marginal", mu)
        object.__setattr__(self, "col_marginal", nu)

    def marginal_error(self) -> float:
        """Max-norm violation of the row and column sum constraints."""
        row = np.abs(self.plan.sum(axis=1) - self.row_marginal).max()
        col = np.abs(self.plan.sum(axis=0) - self.col_marginal).max()
        return float(max(row, col))

    def check_marginals(self, tol: float) -> None:
        err = self.marginal_error()
        if err > tol:
            raise NumericalError(
                f"coupling violates marginals by {err:.3e} (tolerance {tol:.3e})"
            )


@dataclass(frozen=True)
class IpotConfig:
    """Solver-level parameters for the proximal-point iterations."""

    proximal_weight: float = 1.0
    outer_iters: int = 1000
    inner_sinkhorn_iters: int = 1
    tol_marginal: float = 1e-6

    def __post_init__(self):
        if self.proximal_weight <= 0 or self.tol_marginal <= 0:
            raise ValueError("proximal_weight and tol_marginal must be positive")
        if self.outer_iters < 1 or self.inner_sinkhorn_iters < 1:
            raise ValueError("iteration counts must be >= 1")


def cost_matrix(a: np.ndarray, b: np.ndarray, metric: Metric) -> CostMatrix:
    """Pairwise costs between the columns of ``a`` (d, n) and ``b`` (d, m)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError("inputs must be d x n and d x m matrices sharing d")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("non-finite entries in input matrices")
    sq = (
        np.sum(a * a, axis=0)[:, None]
        + np.sum(b * b, axis=0)[None, :]
        - 2.0 * (a.T @ b)
    )
    np.maximum(sq, 0.0, out=sq)
    metric = Metric(metric)
    if metric is Metric.EUCLIDEAN:
        costs = np.sqrt(sq)
    else:
        costs = sq
    return CostMatrix(costs, metric)


def _check_probability(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or (v < 0).any() or abs(v.sum() - 1.0) > _PROB_TOL:
        raise ValueError(f"{name} must be a probability vector")
    return v


def ipot(cost: CostMatrix, mu, nu, cfg: IpotConfig = IpotConfig()) -> Coupling:
    """Approximately minimize <plan, cost> over couplings with marginals
    (mu, nu) by proximal-point iteration.

    Each outer iteration forms Q = G * plan with G = exp(-C / beta), runs
    ``inner_sinkhorn_iters`` scaling rounds b <- nu / (Q^T a),
    a <- mu / (Q b), and sets plan = diag(a) Q diag(b). Raises
    :class:`NumericalError` when a scaling denominator underflows (the
    proximal weight is too small for the cost scale) or when the returned
    plan misses the marginals by more than ``tol_marginal``.
    """
    C = cost.costs
    n, m = C.shape
    mu = _check_probability(mu, "row marginal")
    nu = _check_probability(nu, "col marginal")
    if mu.size != n or nu.size != m:
        raise ValueError("marginal lengths must match the cost matrix shape")

    G = np.exp(-C / cfg.proximal_weight)
    plan = np.outer(mu, nu)
    a = np.ones(n)
    b = np.ones(m)
    for _ in range(cfg.outer_iters):
        Q = G * plan
        for _ in range(cfg.inner_sinkhorn_iters):
            den = Q.T @ a
            if (den < _UNDERFLOW_FLOOR).any():
                raise NumericalError(
                    "scaling denominator underflow: proximal_weight too small "
                    "for this cost scale"
                )
            b = nu / den
            den = Q @ b
            if (den < _UNDERFLOW_FLOOR).any():
                raise NumericalError(
                    "scaling denominator underflow: proximal_weight too small "
                    "for this cost scale"
                )
            a = mu / den
        plan = (a[:, None] * Q) * b[None, :]
    if not np.isfinite(plan).all():
        raise NumericalError("non-finite transport plan (scaling diverged)")
    coupling = Coupling(plan, mu, nu)
    coupling.check_marginals(cfg.tol_marginal)
    return coupling


def exact_ot_uniform(cost: CostMatrix) -> tuple[Coupling, float]:
    """Exhaustive oracle: minimum-cost permutation coupling under uniform
    marginals. Requires a square cost matrix with n <= 8.

    For uniform square marginals the optimum of the transport LP is attained
    at a permutation matrix (a vertex of the Birkhoff polytope), so scanning
    all n! permutations is exact.
    """
    C = cost.costs
    n, m = C.shape
    if n != m:
        raise ValueError("exact oracle requires a square cost matrix")
    if n > 8:
        raise ValueError("exact oracle limited to n <= 8")
    rows = np.arange(n)
    best_perm = None
    best_cost = np.inf
    for perm in itertools.permutations(range(n)):
        total = C[rows, perm].sum() / n
        if total < best_cost:
            best_cost = total
            best_perm = perm
    plan = np.zeros((n, n))
    plan[rows, best_perm] = 1.0 / n
    marg = np.full(n, 1.0 / n)
    return Coupling(plan, marg, marg), float(best_cost)


def transport_cost(coupling: Coupling, cost: CostMatrix) -> float:
    """<plan, cost> = sum_ij plan_ij * cost_ij."""
    if coupling.plan.shape != cost.costs.shape:
        raise ValueError("coupling and cost matrix shapes disagree")
    return float(np.sum(coupling.plan * cost.costs))


def uniform_marginal(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)
