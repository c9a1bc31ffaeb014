from __future__ import annotations

import numpy as np
import pytest
from app.core.errors import (
    DegenerateProjectionError,
    DimensionMismatchError,
    DomainError,
    InsufficientDataError,
)
from app.core.rng import Stream
from app.services import dist
from app.services.linalg_core import (
    ComplementBasis,
    complement_basis,
    design_for_columns,
)
from app.services.randomize import (
    gamma_coefficients,
    orientation,
    partition_q_replicates,
    pseudo_replicates,
    q_replicates,
)
from scipy import stats


def test_gamma_base_case():
    plan = gamma_coefficients(2, 1.0)
    np.testing.assert_allclose(plan.gamma, [[1.0, 1.0], [1.0, -1.0]])
    np.testing.assert_allclose(plan.a, [1.0])
    np.testing.assert_allclose(plan.b, [1.0])


def test_gamma_k3_recursion_values():
    plan = gamma_coefficients(3, 1.0)
    np.testing.assert_allclose(plan.a, [1.41421, 1.22474], atol=1e-5)
    np.testing.assert_allclose(plan.b, [0.70711, 1.22474], atol=1e-5)
    np.testing.assert_allclose(plan.gamma.T @ plan.gamma, 3.0 * np.eye(3), atol=1e-10)


def test_gamma_k8_sigma2():
    plan = gamma_coefficients(8, 2.0)
    weights = np.diag([4.0] + [1.0] * 7)
    np.testing.assert_allclose(
        plan.gamma.T @ weights @ plan.gamma, 32.0 * np.eye(8), atol=1e-10
    )


@pytest.mark.parametrize("sigma", [0.1, 1.0, 10.0])
def test_gamma_algebra_for_all_k(sigma):
    for k in range(2, 33):
        plan = gamma_coefficients(k, sigma)
        weights = np.diag([sigma**2] + [1.0] * (k - 1))
        np.testing.assert_allclose(
            plan.gamma.T @ weights @ plan.gamma,
            k * sigma**2 * np.eye(k),
            atol=1e-9 * max(1.0, sigma**2),
        )
        np.testing.assert_allclose(plan.gamma[0], 1.0)
        np.testing.assert_allclose(plan.gamma[1:].sum(axis=1), 0.0, atol=1e-9 * sigma)


@pytest.mark.parametrize("k,sigma", [(1, 1.0), (2, 0.0), (3, -1.0)])
def test_gamma_domain_errors(k, sigma):
    with pytest.raises(DomainError):
        gamma_coefficients(k, sigma)


def test_k2_replicates_are_y_plus_minus_noise(rng):
    y = rng.standard_normal(6)
    y[0] = 10.0
    noise = rng.standard_normal((6, 1))
    bundle = pseudo_replicates(y, gamma_coefficients(2, 1.0), noise=noise)
    np.testing.assert_allclose(bundle.y_reps[:, 0], y + noise[:, 0])
    np.testing.assert_allclose(bundle.y_reps[:, 1], y - noise[:, 0])


def test_noise_is_oriented_by_the_response(rng):
    y = rng.standard_normal(6)
    y[2] = -10.0
    noise = rng.standard_normal((6, 1))
    assert orientation(y) == -1.0
    assert orientation(np.zeros(3)) == 1.0
    bundle = pseudo_replicates(y, gamma_coefficients(2, 1.0), noise=noise)
    np.testing.assert_allclose(bundle.y_reps[:, 0], y - noise[:, 0])
    np.testing.assert_array_equal(bundle.noise, noise)


@pytest.mark.parametrize("k", [2, 3, 8])
@pytest.mark.parametrize("c", [2.5, -0.5])
def test_replicates_scale_with_the_response(rng, k, c):
    y = rng.standard_normal(20)
    base = pseudo_replicates(y, gamma_coefficients(k, 1.3), seed=k)
    scaled = pseudo_replicates(
        c * y, gamma_coefficients(k, abs(c) * 1.3), noise=base.noise
    )
    np.testing.assert_allclose(scaled.y_reps, c * base.y_reps, atol=1e-12)

@pytest.mark.parametrize("k", [2, 3, 8, 20])
def test_replicate_mean_reconstructs_y(rng, k):
    y = rng.standard_normal(30)
    bundle = pseudo_replicates(y, gamma_coefficients(k, 1.3), seed=k)
    np.testing.assert_allclose(bundle.y_reps.mean(axis=1), y, atol=1e-12)
    assert bundle.k == k


def test_pseudo_replicates_are_deterministic_per_key_path(rng):
    y = rng.standard_normal(10)
    plan = gamma_coefficients(4, 1.0)
    first = pseudo_replicates(y, plan, (7, 0, Stream.NOISE, 99))
    second = pseudo_replicates(y, plan, (7, 0, Stream.NOISE, 99))
    other = pseudo_replicates(y, plan, (7, 1, Stream.NOISE, 99))
    np.testing.assert_array_equal(first.y_reps, second.y_reps)
    assert first.noise_seed == second.noise_seed
    assert not np.allclose(first.y_reps, other.y_reps)


def test_noise_shape_is_checked(rng):
    with pytest.raises(DimensionMismatchError):
        pseudo_replicates(
            rng.standard_normal(5), gamma_coefficients(3, 1.0), noise=np.zeros((5, 1))
        )


def test_replicates_are_independent_with_inflated_variance():
    n, k, draws = 50, 4, 5000
    plan = gamma_coefficients(k, 1.0)
    rng = np.random.default_rng(11)
    reps = np.empty((draws, n, k))
    for draw in range(draws):
        y = rng.standard_normal(n)
        reps[draw] = pseudo_replicates(y, plan, seed=draw).y_reps
    # pooled over coordinates: every coordinate is an independent copy
    variances = reps.var(axis=0, ddof=1).mean(axis=0)
    se_var = k * np.sqrt(2.0 / (draws - 1)) / np.sqrt(n)
    assert np.all(np.abs(variances - k) < 4 * se_var)
    se_cov = k / np.sqrt(draws) / np.sqrt(n)
    for i in range(k):
        for j in range(i + 1, k):
            cov = np.mean(
                [np.cov(reps[:, c, i], reps[:, c, j])[0, 1] for c in range(n)]
            )
            assert abs(cov) < 4 * se_cov


def test_q_replicates_have_unit_norm(toeplitz_data):
    X, y = toeplitz_data
    basis = complement_basis(design_for_columns(X, [0, 1, 2]))
    bundle = pseudo_replicates(y, gamma_coefficients(5, 1.0), seed=3)
    q = q_replicates(bundle, basis)
    assert q.shape == (5, basis.dim)
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-12)


def test_q_replicates_are_basis_invariant(toeplitz_data, rng):
    X, y = toeplitz_data
    basis = complement_basis(design_for_columns(X, [0, 1]))
    rotation, _ = np.linalg.qr(rng.standard_normal((basis.dim, basis.dim)))
    rotated = ComplementBasis(U=basis.U @ rotation, source_design_hash="rotated")
    bundle = pseudo_replicates(y, gamma_coefficients(4, 1.0), seed=5)
    q, q_alt = q_replicates(bundle, basis), q_replicates(bundle, rotated)
    np.testing.assert_allclose(q @ q.T, q_alt @ q_alt.T, atol=1e-8)


def test_q_replicates_reject_zero_projection():
    X = np.eye(4)[:, :2]
    basis = complement_basis(design_for_columns(X, [0, 1]))
    y = np.array([1.0, 2.0, 0.0, 0.0])
    bundle = pseudo_replicates(y, gamma_coefficients(2, 1.0), noise=np.zeros((4, 1)))
    with pytest.raises(DegenerateProjectionError):
        q_replicates(bundle, basis)


def test_null_inner_products_follow_fisher_law():
    rng = np.random.default_rng(31)
    n, columns = 100, [0, 1, 2]
    X = rng.standard_normal((n, 5))
    basis = complement_basis(design_for_columns(X, columns))
    plan = gamma_coefficients(2, 1.0)
    products = []
    for draw in range(2000):
        y = X[:, columns].sum(axis=1) + rng.standard_normal(n)
        q = q_replicates(pseudo_replicates(y, plan, seed=draw), basis)
        products.append(float(q[0] @ q[1]))
    m = n - len(columns)
    result = stats.kstest(products, lambda r: dist.fisher_corr_cdf(r, m))
    assert result.pvalue > 0.01


def test_sigma_misestimation_moves_q_proportionally():
    rng = np.random.default_rng(5)
    n = 100
    X = rng.standard_normal((n, 3))
    y = X.sum(axis=1) + rng.standard_normal(n)
    basis = complement_basis(design_for_columns(X, [0, 1, 2]))
    for k in (2, 8, 32):
        bundle = pseudo_replicates(y, gamma_coefficients(k, 1.0), seed=k)
        exact = q_replicates(bundle, basis)
        distances = []
        for delta in (0.01, 0.05):
            plan = gamma_coefficients(k, 1.0 + delta)
            moved = q_replicates(
                pseudo_replicates(y, plan, noise=bundle.noise), basis
            )
            distances.append(np.linalg.norm(moved - exact, axis=1).max())
        ratio = distances[1] / distances[0]
        assert 0.5 * 5 <= ratio <= 2 * 5


def test_partition_replicates(toeplitz_data):
    X, y = toeplitz_data
    vectors = partition_q_replicates(X, y, [0, 1, 2], 2)
    assert len(vectors) == 2
    for vector in vectors:
        assert vector.shape == (40 // 2 - 3,)
        assert np.linalg.norm(vector) == pytest.approx(1.0)


def test_partition_needs_enough_rows(rng):
    with pytest.raises(InsufficientDataError):
        partition_q_replicates(
            rng.standard_normal((10, 3)), rng.standard_normal(10), [0, 1], 3
        )
