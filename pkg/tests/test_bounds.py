import numpy as np
import pytest

from acot.bounds import (c2_value, estimate_bounds, gram_residual,
                         pythagorean_check)
from acot.grassmann import SubspacePoint, random_subspace
from acot.transport import (CostMatrix, Metric, exact_ot_uniform,
                            cost_matrix)

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def residual_random_search(y, k, samples, rng, refine_rounds=6):
    """Independent oracle for the Gram residual: randomized search (uniform
    draws plus shrinking local resampling around the incumbent) over
    orthonormal bases, maximizing the mean out-of-subspace energy."""
    d, m = y.shape
    if k == d:
        return 0.0

    def energy(basis):
        rem = y - basis @ (basis.T @ y)
        return float(np.sum(rem * rem) / m)

    n_uniform = samples // 2
    best_u, best_val = None, -np.inf
    for _ in range(n_uniform):
        u = random_subspace(d, k, rng).basis
        val = energy(u)
        if val > best_val:
            best_u, best_val = u, val
    per_round = (samples - n_uniform) // refine_rounds
    scale = 0.5
    for _ in range(refine_rounds):
        for _ in range(per_round):
            q, _ = np.linalg.qr(best_u + scale * rng.standard_normal((d, k)))
            val = energy(q)
            if val > best_val:
                best_u, best_val = q, val
        scale *= 0.4
    return best_val


def angle_grid_c2(x, y, points=20001):
    """Independent oracle for the project-positives objective over G(2,1):
    a dense angle grid (each 1-D subspace is a point on the half-circle)."""
    best = -np.inf
    for theta in np.linspace(0, np.pi, points):
        u = np.array([np.cos(theta), np.sin(theta)])
        proj = np.outer(u, u) @ x
        # single positive and single negative: the coupling is forced
        best = max(best, float(np.sum((proj[:, 0] - y[:, 0]) ** 2)))
    return best


class TestGramResidual:
    def test_full_dimension_gives_zero(self):
        y = np.random.default_rng(0).uniform(size=(4, 6))
        assert gram_residual(y, 4) == 0.0

    def test_hand_eigendecomposition(self):
        # Gram of [e1 e2] is diag(1/2, 1/2); largest eigenvalue 1/2
        y = np.eye(2)
        assert gram_residual(y, 1) == pytest.approx(0.5, abs=1e-12)

    def test_matches_random_search_d3(self):
        rng = np.random.default_rng(1)
        y = rng.uniform(size=(3, 5))
        got = gram_residual(y, 1)
        searched = residual_random_search(y, 1, 10_000, rng)
        assert abs(got - searched) <= 1e-3

    def test_monotone_in_k_and_endpoints(self):
        rng = np.random.default_rng(2)
        y = rng.uniform(size=(5, 7))
        values = [gram_residual(y, k) for k in range(0, 6)]
        assert values[0] == pytest.approx(np.trace(y @ y.T / 7), rel=1e-12)
        assert values[-1] == 0.0
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            gram_residual(np.array([[np.nan, 0.0]]), 1)


class TestPythagorean:
    def test_negative_inside_subspace(self):
        u = SubspacePoint(np.eye(3)[:, :2])
        x = np.array([0.3, -0.2, 0.9])
        y = np.array([0.5, 1.0, 0.0])  # inside span(U)
        lhs, rhs = pythagorean_check(x, y, u)
        assert lhs == pytest.approx(rhs, abs=1e-12)
        proj_diff = u.project(x - y)
        assert lhs == pytest.approx(float(np.sum(proj_diff**2)), abs=1e-12)

    def test_zero_positive_decomposes_negative(self):
        rng = np.random.default_rng(3)
        u = random_subspace(4, 2, rng)
        y = rng.standard_normal(4)
        lhs, rhs = pythagorean_check(np.zeros(4), y, u)
        assert lhs == pytest.approx(float(np.sum(y * y)), rel=1e-12)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_random_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            u = random_subspace(5, 2, rng)
            x = rng.standard_normal(5)
            y = rng.standard_normal(5)
            lhs, rhs = pythagorean_check(x, y, u)
            assert abs(lhs - rhs) <= 1e-10 * (1 + lhs)


class TestC2Value:
    def test_matched_clouds_cost_zero(self):
        rng = np.random.default_rng(5)
        u = random_subspace(4, 2, rng)
        x = rng.uniform(size=(4, 3))
        y = u.project(x)
        assert c2_value(x, y, u) == pytest.approx(0.0, abs=1e-9)

    def test_single_pair_squared_distance(self):
        u = SubspacePoint(E1[:, None])
        assert c2_value(E1[:, None], E2[:, None], u) == pytest.approx(2.0)


class TestEstimateBounds:
    def test_two_dimensional_instance_against_grid_oracle(self):
        x = E1[:, None]
        y = E2[:, None]
        report = estimate_bounds(x, y, k=1, restarts=8, seed=0)
        # oracle: dense angle grid; analytic optimum 3/2 + sqrt(5)/2
        oracle = angle_grid_c2(x, y)
        analytic = 1.5 + np.sqrt(1.25)
        assert oracle == pytest.approx(analytic, abs=1e-6)
        assert report.c2 == pytest.approx(analytic, abs=5e-3)
        assert report.p2 == pytest.approx(2.0, abs=5e-3)
        assert report.s2 == pytest.approx(2.0, abs=5e-3)
        assert report.residual == pytest.approx(1.0, abs=1e-12)
        assert report.sandwich_ok
        assert report.p2 - report.epsilon <= report.c2
        assert report.c2 <= report.s2 + report.residual + report.epsilon

    def test_full_dimension_collapses_to_plain_transport(self):
        rng = np.random.default_rng(6)
        x = rng.uniform(size=(3, 4))
        y = rng.uniform(size=(3, 4))
        report = estimate_bounds(x, y, k=3, restarts=2, seed=1)
        _, exact = exact_ot_uniform(cost_matrix(x, y, Metric.SQUARED_EUCLIDEAN))
        assert report.residual == 0.0
        assert abs(report.p2 - report.c2) <= report.epsilon
        assert abs(report.c2 - report.s2) <= report.epsilon
        assert report.c2 == pytest.approx(exact, abs=1e-3 * (1 + exact))

    def test_scale_covariance(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(size=(3, 3))
        y = rng.uniform(size=(3, 4))
        base = estimate_bounds(x, y, k=2, restarts=4, seed=2)
        t = 1.7
        scaled = estimate_bounds(t * x, t * y, k=2, restarts=4, seed=2)
        for name in ("p2", "c2", "s2", "residual"):
            assert getattr(scaled, name) == pytest.approx(
                t**2 * getattr(base, name), rel=1e-2, abs=1e-6), name

    def test_sandwich_on_random_instances(self):
        rng = np.random.default_rng(8)
        for trial in range(10):
            d = int(rng.integers(2, 5))
            k = int(rng.integers(1, d))
            x = rng.uniform(size=(d, int(rng.integers(2, 6))))
            y = rng.uniform(size=(d, int(rng.integers(2, 6))))
            report = estimate_bounds(x, y, k, restarts=4,
                                     seed=int(rng.integers(2**32)))
            assert report.sandwich_ok, (trial, report)

    def test_rejects_bad_arguments(self):
        x = np.ones((2, 2)) / np.sqrt(2)
        with pytest.raises(ValueError):
            estimate_bounds(x, x, k=1, restarts=0)
        with pytest.raises(ValueError):
            estimate_bounds(x, x, k=3)
