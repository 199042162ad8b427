"""Projected-transport bounds between a positive and a negative cloud.

Three squared-distance quantities over k-dimensional subspaces relate the
project-both max-min transport cost (p2), the project-positives-only
variant used by this package's training objective (c2), and the min-max
counterpart (s2): p2 <= c2 <= s2 + r, where r is the largest possible
mean out-of-subspace energy of the negatives and equals the sum of the
d-k largest eigenvalues of their Gram matrix. Equality holds at k = d.
This module estimates all three and certifies the sandwich on concrete
instances.

The estimators are one-sided by construction: p2/c2 come from alternating
maximization (any candidate subspace underestimates a max), while s2
evaluates the inner maximization exactly per candidate coupling (any
feasible coupling overestimates a min), so the certified inequalities are
robust to solver inaccuracy up to the reported epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grassmann import (QuadraticTraceObjective, RcgConfig, SubspacePoint,
                        random_subspace, rcg_minimize)
from .transport import (CostMatrix, IpotConfig, Metric, cost_matrix, ipot,
                        transport_cost, uniform_marginal)

_SQ = Metric.SQUARED_EUCLIDEAN


@dataclass(frozen=True)
class BoundsReport:
    """Computed bounds for one instance plus the sandwich certificate.

    ``slack_lower`` = c2 - p2 and ``slack_upper`` = s2 + residual - c2;
    the sandwich holds when both exceed -epsilon.
    """

    p2: float
    c2: float
    s2: float
    residual: float
    sandwich_ok: bool
    slack_lower: float
    slack_upper: float
    epsilon: float


def gram_residual(y: np.ndarray, k: int) -> float:
    """Sum of the d-k largest eigenvalues of (1/m) Y Y^T.

    This equals the maximum over k-dimensional subspaces of the mean
    squared out-of-subspace energy (1/m) sum_j ||(I - U U^T) y_j||^2.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ValueError("Y must be a d x m matrix")
    if not np.isfinite(y).all():
        raise ValueError("Y has non-finite entries")
    d, m = y.shape
    if not 0 <= k <= d:
        raise ValueError("need 0 <= k <= d")
    if k == d:
        return 0.0
    gram = (y @ y.T) / m
    eigvals = np.linalg.eigvalsh(gram)  # ascending
    return float(eigvals[k:].sum())


def pythagorean_check(x: np.ndarray, y: np.ndarray,
                      u: SubspacePoint) -> tuple[float, float]:
    """Both sides of ||U U^T x - y||^2 =
    ||U U^T x - U U^T y||^2 + ||(I - U U^T) y||^2 (exact identity)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (u.dim,) or y.shape != (u.dim,):
        raise ValueError("x and y must be d-vectors matching the subspace")
    px = u.project(x)
    py = u.project(y)
    lhs = float(np.sum((px - y) ** 2))
    rhs = float(np.sum((px - py) ** 2) + np.sum((y - py) ** 2))
    return lhs, rhs


def c2_value(x: np.ndarray, y: np.ndarray, u: SubspacePoint,
             ipot_cfg: IpotConfig = IpotConfig()) -> float:
    """Transport cost between the projected positives U U^T X and the raw
    negatives Y under squared-Euclidean ground cost, uniform marginals."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cost = cost_matrix(u.project(x), y, _SQ)
    plan = ipot(cost, uniform_marginal(x.shape[1]), uniform_marginal(y.shape[1]),
                ipot_cfg)
    return transport_cost(plan, cost)


def _displacement_second_moment(x: np.ndarray, y: np.ndarray,
                                plan: np.ndarray) -> np.ndarray:
    """M = sum_ij plan_ij (x_i - y_j)(x_i - y_j)^T, assembled in d x d."""
    row = plan.sum(axis=1)
    col = plan.sum(axis=0)
    cross = (x @ plan) @ y.T
    return (x * row) @ x.T + (y * col) @ y.T - cross - cross.T


def _projected_cost(x, y, u: SubspacePoint) -> CostMatrix:
    return cost_matrix(u.basis.T @ x, u.basis.T @ y, _SQ)


def _top_k_eig(m: np.ndarray, k: int) -> tuple[float, np.ndarray]:
    vals, vecs = np.linalg.eigh(m)
    return float(vals[-k:].sum()), vecs[:, -k:]


def estimate_bounds(x: np.ndarray, y: np.ndarray, k: int, restarts: int = 8,
                    seed=0, alternations: int = 8,
                    search_ipot: IpotConfig | None = None,
                    eval_ipot: IpotConfig | None = None,
                    rcg_cfg: RcgConfig | None = None) -> BoundsReport:
    """Estimate p2, c2, s2 and certify the sandwich for one instance.

    p2 and c2 alternate a coupling step (proximal-point transport solve)
    with a subspace step (conjugate gradient on the negated fixed-coupling
    objective), keeping the best of ``restarts`` random starts; both
    estimates are evaluated on the pooled candidate subspaces from the two
    runs. s2 alternates in the opposite order, solving the inner subspace
    maximization exactly through the eigendecomposition of the coupled
    displacement second moment, and keeps the smallest exact value over
    all couplings visited. The reported epsilon blends absolute and
    relative slack: 1e-6 + 1e-3 * max(|p2|, |s2|, 1).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("X and Y must be d x n and d x m matrices sharing d")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    d, n = x.shape
    m = y.shape[1]
    if not 1 <= k <= d:
        raise ValueError("need 1 <= k <= d")

    rng = np.random.default_rng(seed)
    mu = uniform_marginal(n)
    nu = uniform_marginal(m)
    # search-phase couplings only steer the alternation (and enter s2 with
    # slack well inside epsilon), so their marginal tolerance can be loose
    fast = search_ipot or IpotConfig(outer_iters=300, tol_marginal=1e-4)
    full = eval_ipot or IpotConfig()
    rcg = rcg_cfg or RcgConfig(max_iters=30, grad_tol=1e-9)

    s_nu = (y * nu) @ y.T  # sum_j nu_j y_j y_j^T
    c_nu = float(np.sum(nu * np.sum(y * y, axis=0)))

    def fixed_plan_objective(plan, project_both: bool) -> QuadraticTraceObjective:
        moment = _displacement_second_moment(x, y, plan)
        if project_both:
            return QuadraticTraceObjective(moment, scale=-1.0)
        return QuadraticTraceObjective(moment - s_nu, scale=-1.0, offset=-c_nu)

    def alternate_max(u: SubspacePoint, project_both: bool) -> SubspacePoint:
        prev = -np.inf
        for _ in range(alternations):
            if project_both:
                cost = _projected_cost(x, y, u)
            else:
                cost = cost_matrix(u.project(x), y, _SQ)
            plan = ipot(cost, mu, nu, fast)
            obj = fixed_plan_objective(plan.plan, project_both)
            u = rcg_minimize(obj, u, rcg)
            val = -obj.value(u)
            if val - prev <= 1e-9 * (1.0 + abs(val)):
                break
            prev = val
        return u

    # --- p2 / c2: alternating maximization from shared random starts -------
    candidates: list[SubspacePoint] = []
    s_candidates: list[float] = []
    for _ in range(restarts):
        start = random_subspace(d, k, rng)
        candidates.append(alternate_max(start, project_both=True))
        candidates.append(alternate_max(start, project_both=False))

        # --- s2: exact inner maximization per visited coupling -------------
        u = random_subspace(d, k, rng)
        s_candidates.append(
            _top_k_eig(_displacement_second_moment(x, y, np.outer(mu, nu)), k)[0]
        )
        for _ in range(alternations):
            plan = ipot(_projected_cost(x, y, u), mu, nu, fast)
            val, vecs = _top_k_eig(
                _displacement_second_moment(x, y, plan.plan), k)
            s_candidates.append(val)
            u = SubspacePoint(vecs)

    p2 = -np.inf
    c2 = -np.inf
    for u in candidates:
        cost_p = _projected_cost(x, y, u)
        plan_p = ipot(cost_p, mu, nu, full)
        p2 = max(p2, transport_cost(plan_p, cost_p))
        c2 = max(c2, c2_value(x, y, u, full))
        s_candidates.append(
            _top_k_eig(_displacement_second_moment(x, y, plan_p.plan), k)[0]
        )
    s2 = float(min(s_candidates))

    residual = gram_residual(y, k)
    epsilon = 1e-6 + 1e-3 * max(abs(p2), abs(s2), 1.0)
    slack_lower = c2 - p2
    slack_upper = s2 + residual - c2
    return BoundsReport(
        p2=float(p2),
        c2=float(c2),
        s2=s2,
        residual=residual,
        sandwich_ok=bool(slack_lower >= -epsilon and slack_upper >= -epsilon),
        slack_lower=float(slack_lower),
        slack_upper=float(slack_upper),
        epsilon=float(epsilon),
    )
