"""Geometry of k-dimensional subspaces of R^d and a Riemannian
conjugate-gradient minimizer.

Subspaces are represented by orthonormal d x k bases modulo right
rotations; every objective optimized here must therefore be a function of
U U^T only (equivalently, invariant under U -> U R for orthogonal R).
Tangent vectors live in the horizontal space U^T xi = 0. Retraction is the
thin QR factor with a non-negative R diagonal; vector transport is
re-projection onto the new tangent space; the conjugate-gradient
coefficient is Fletcher-Reeves with a steepest-descent restart whenever
the combined direction stops being a descent direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import NumericalError

ORTHONORMAL_TOL = 1e-10
TANGENT_TOL = 1e-9


@dataclass(frozen=True)
class SubspacePoint:
    """A d x k matrix with orthonormal columns, 1 <= k <= d."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float, copy=True)
        if basis.ndim != 2:
            raise ValueError("basis must be a d x k matrix")
        d, k = basis.shape
        if not 1 <= k <= d:
            raise ValueError("need 1 <= k <= d")
        if not np.isfinite(basis).all():
            raise ValueError("basis has non-finite entries")
        gram = basis.T @ basis
        if np.max(np.abs(gram - np.eye(k))) > ORTHONORMAL_TOL:
            raise ValueError("basis columns are not orthonormal")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def project(self, v: np.ndarray) -> np.ndarray:
        """Apply U U^T to a vector or to the columns of a matrix."""
        return self.basis @ (self.basis.T @ v)


@dataclass(frozen=True)
class TangentVector:
    """A horizontal direction at ``base``: U^T delta = 0."""

    delta: np.ndarray
    base: SubspacePoint

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float, copy=True)
        if delta.shape != self.base.basis.shape:
            raise ValueError("tangent shape must match the base point")
        if not np.isfinite(delta).all():
            raise ValueError("tangent has non-finite entries")
        if np.max(np.abs(self.base.basis.T @ delta)) > TANGENT_TOL:
            raise ValueError("direction is not in the horizontal space")
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)

    def norm(self) -> float:
        return float(np.linalg.norm(self.delta))


@dataclass(frozen=True)
class RcgConfig:
    max_iters: int = 5
    grad_tol: float = 1e-6
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    max_backtracks: int = 30
    initial_step: float = 1.0

    def __post_init__(self):
        positives = ("max_iters", "grad_tol", "armijo_c1", "armijo_shrink",
                     "max_backtracks", "initial_step")
        for name in positives:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class ManifoldObjective(Protocol):
    """Anything exposing a value and an ambient-space gradient at a point."""

    def value(self, u: SubspacePoint) -> float: ...

    def euclidean_grad(self, u: SubspacePoint) -> np.ndarray: ...


def _project(basis: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - basis @ (basis.T @ g)


def project_tangent(u: SubspacePoint, g: np.ndarray) -> TangentVector:
    """Horizontal projection (I - U U^T) G of an ambient direction."""
    g = np.asarray(g, dtype=float)
    if g.shape != u.basis.shape:
        raise ValueError("direction shape must match the base point")
    return TangentVector(_project(u.basis, g), u)


def _thin_qr_pos(m: np.ndarray) -> np.ndarray:
    """Q factor of the thin QR with non-negative R diagonal; raises on
    rank deficiency rather than perturbing."""
    q, r = np.linalg.qr(m)
    diag = np.diag(r)
    scale = max(1.0, float(np.abs(m).max()))
    if np.min(np.abs(diag)) <= 1e-12 * scale:
        raise NumericalError("rank-deficient matrix in QR retraction")
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs[None, :]


def retract_qr(u: SubspacePoint, xi: TangentVector, step: float) -> SubspacePoint:
    """Move from U along step * xi and map back onto the manifold."""
    if xi.base is not u and not np.array_equal(xi.base.basis, u.basis):
        raise ValueError("tangent vector is based at a different point")
    return SubspacePoint(_thin_qr_pos(u.basis + step * xi.delta))


def rcg_minimize(obj: ManifoldObjective, u0: SubspacePoint,
                 cfg: RcgConfig = RcgConfig()) -> SubspacePoint:
    """Riemannian conjugate gradient with Armijo backtracking.

    Monotone by construction: a step is taken only when it satisfies the
    sufficient-decrease test, so the returned value never exceeds the
    starting value. Stops at ``max_iters``, at gradient norm below
    ``grad_tol``, or when no acceptable step exists.
    """

    def checked_value(point):
        v = float(obj.value(point))
        if not np.isfinite(v):
            raise NumericalError("objective returned a non-finite value")
        return v

    def riemannian_grad(point):
        g = np.asarray(obj.euclidean_grad(point), dtype=float)
        if g.shape != point.basis.shape or not np.isfinite(g).all():
            raise NumericalError("objective returned an invalid gradient")
        return _project(point.basis, g)

    u = u0
    f = checked_value(u)
    g = riemannian_grad(u)
    gnorm2 = float(np.sum(g * g))
    direction = -g

    for _ in range(cfg.max_iters):
        if np.sqrt(gnorm2) <= cfg.grad_tol:
            break
        slope = float(np.sum(g * direction))
        if slope >= 0:  # not a descent direction: restart on steepest descent
            direction = -g
            slope = -gnorm2
        step = cfg.initial_step
        accepted = False
        tangent = TangentVector(direction, u)
        for _ in range(cfg.max_backtracks):
            candidate = retract_qr(u, tangent, step)
            f_candidate = checked_value(candidate)
            if f_candidate <= f + cfg.armijo_c1 * step * slope:
                accepted = True
                break
            step *= cfg.armijo_shrink
        if not accepted:
            break
        u, f = candidate, f_candidate
        g_new = riemannian_grad(u)
        gnorm2_new = float(np.sum(g_new * g_new))
        beta = gnorm2_new / gnorm2  # Fletcher-Reeves
        direction = -g_new + beta * _project(u.basis, direction)
        g, gnorm2 = g_new, gnorm2_new
    return u


def principal_angle_affinity(u1: SubspacePoint, u2: SubspacePoint) -> float:
    """||U1^T U2||_F^2 in [0, k]; equals k iff the subspaces coincide."""
    if u1.basis.shape != u2.basis.shape:
        raise ValueError("subspaces must share d and k")
    return float(np.sum((u1.basis.T @ u2.basis) ** 2))


def random_subspace(d: int, k: int, rng) -> SubspacePoint:
    """Haar-ish random point: QR of a Gaussian matrix."""
    return SubspacePoint(_thin_qr_pos(rng.standard_normal((d, k))))


@dataclass(frozen=True)
class QuadraticTraceObjective:
    """value(U) = scale * tr(U^T M U) + offset for symmetric M.

    The workhorse objective of this package: with scale=-1 the minimizer
    spans the top-k eigenvectors of M (a Rayleigh-quotient test case), and
    the fixed-coupling subspace steps of the transport bounds reduce to
    this form.
    """

    matrix: np.ndarray
    scale: float = 1.0
    offset: float = 0.0

    def value(self, u: SubspacePoint) -> float:
        mu = self.matrix @ u.basis
        return self.scale * float(np.sum(u.basis * mu)) + self.offset

    def euclidean_grad(self, u: SubspacePoint) -> np.ndarray:
        return 2.0 * self.scale * (self.matrix @ u.basis)
