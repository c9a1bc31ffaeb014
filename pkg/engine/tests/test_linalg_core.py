from __future__ import annotations

import numpy as np
import pytest
from app.core.errors import (
    DegenerateDfError,
    DimensionMismatchError,
    NotNestedError,
    SingularDesignError,
)
from app.services.linalg_core import (
    INTERCEPT,
    annihilator,
    build_design,
    coefficient_pvalues,
    complement_basis,
    design_for_columns,
    f_statistic,
    ols_fit,
    residualize,
)
from scipy import stats


def test_saturated_identity_fit_is_exact():
    fit = ols_fit(build_design(np.eye(3)), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(fit.theta_hat, [1.0, 2.0, 3.0], atol=1e-12)
    assert fit.rss == pytest.approx(0.0, abs=1e-20)
    assert fit.df_resid == 0


def test_ones_column_fit_gives_mean_and_rss():
    fit = ols_fit(build_design(np.ones((3, 1))), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(fit.theta_hat, [2.0])
    assert fit.rss == pytest.approx(2.0)
    assert fit.rss == float(fit.residuals @ fit.residuals)


def test_duplicated_column_is_singular(rng):
    column = rng.standard_normal(10)
    with pytest.raises(SingularDesignError):
        build_design(np.column_stack([column, column]))


def test_more_columns_than_rows_is_singular(rng):
    with pytest.raises(SingularDesignError):
        build_design(rng.standard_normal((3, 4)))


def test_response_length_mismatch(rng):
    design = build_design(rng.standard_normal((6, 2)))
    with pytest.raises(DimensionMismatchError):
        ols_fit(design, np.zeros(5))


def test_residuals_orthogonal_to_design(rng):
    X = rng.standard_normal((30, 4))
    fit = ols_fit(build_design(X), rng.standard_normal(30))
    np.testing.assert_allclose(X.T @ fit.residuals, 0.0, atol=1e-8)


def test_intercept_column_is_prepended_and_labelled(rng):
    design = build_design(rng.standard_normal((8, 2)), intercept=True)
    assert design.cols == 3
    assert design.labels[0] == INTERCEPT
    np.testing.assert_allclose(design.entries[:, 0], 1.0)
    assert not design.entries.flags.writeable


def test_complement_basis_of_ones_column():
    design = build_design(np.ones((3, 1)))
    basis = complement_basis(design)
    y = np.array([1.0, 2.0, 3.0])
    assert basis.dim == 2
    assert float(np.sum((basis.U.T @ y) ** 2)) == pytest.approx(2.0)


def test_complement_basis_invariants(rng):
    X = rng.standard_normal((5, 2))
    design = build_design(X)
    U = complement_basis(design).U
    assert U.shape == (5, 3)
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(U.T @ X, 0.0, atol=1e-10)
    np.testing.assert_allclose(U @ U.T, annihilator(design), atol=1e-8)


def test_projection_norm_matches_rss(rng):
    X = rng.standard_normal((25, 3))
    y = rng.standard_normal(25)
    design = build_design(X)
    U = complement_basis(design).U
    assert float(np.sum((U.T @ y) ** 2)) == pytest.approx(ols_fit(design, y).rss)


def test_annihilator_is_idempotent(rng):
    M = annihilator(build_design(rng.standard_normal((12, 3))))
    np.testing.assert_allclose(M @ M, M, atol=1e-8)


def test_angles_do_not_depend_on_basis(rng):
    design = build_design(rng.standard_normal((15, 3)))
    U = complement_basis(design).U
    rotation, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    U_alt = U @ rotation
    a, b = rng.standard_normal(15), rng.standard_normal(15)

    def cosine(basis):
        pa, pb = basis.T @ a, basis.T @ b
        return float(pa @ pb / np.linalg.norm(pa) / np.linalg.norm(pb))

    M = annihilator(design)
    direct = float(a @ M @ b / np.sqrt((a @ M @ a) * (b @ M @ b)))
    assert cosine(U) == pytest.approx(direct, abs=1e-8)
    assert cosine(U_alt) == pytest.approx(direct, abs=1e-8)


def test_residualize_matches_fit_residuals(rng):
    X = rng.standard_normal((20, 2))
    y = rng.standard_normal(20)
    design = build_design(X)
    np.testing.assert_allclose(
        residualize(design, y[:, None])[:, 0], ols_fit(design, y).residuals, atol=1e-10
    )


def test_f_statistic_same_model_is_degenerate(rng):
    X = rng.standard_normal((20, 3))
    design = design_for_columns(X, [0, 1])
    with pytest.raises(DegenerateDfError):
        f_statistic(design, design, rng.standard_normal(20))


def test_f_statistic_not_nested(rng):
    X = rng.standard_normal((20, 3))
    with pytest.raises(NotNestedError):
        f_statistic(
            design_for_columns(X, [2]),
            design_for_columns(X, [0, 1]),
            rng.standard_normal(20),
        )


def test_f_statistic_orthogonal_extra_column_gives_zero():
    ones = np.ones(4)
    contrast = np.array([1.0, -1.0, 1.0, -1.0])
    X = np.column_stack([ones, contrast])
    y = np.array([1.0, 2.0, 2.0, 1.0])
    F, df1, df2, p = f_statistic(
        design_for_columns(X, [0]), design_for_columns(X, [0, 1]), y
    )
    assert F == pytest.approx(0.0, abs=1e-12)
    assert (df1, df2) == (1, 2)
    assert p == pytest.approx(1.0)


def test_f_statistic_matches_formula(rng):
    X = rng.standard_normal((30, 4))
    y = X[:, 0] + rng.standard_normal(30)
    sub, full = design_for_columns(X, [0]), design_for_columns(X, [0, 1, 2, 3])
    F, df1, df2, p = f_statistic(sub, full, y)
    rss_sub, rss_full = ols_fit(sub, y).rss, ols_fit(full, y).rss
    assert F == pytest.approx(((rss_sub - rss_full) / 3) / (rss_full / 26))
    assert p == pytest.approx(stats.f.sf(F, 3, 26))


def test_f_pvalues_uniform_under_null():
    rng = np.random.default_rng(2024)
    X = rng.standard_normal((40, 5))
    sub, full = design_for_columns(X, [0, 1]), design_for_columns(X, range(5))
    pvalues = []
    for _ in range(2000):
        y = X[:, 0] - X[:, 1] + rng.standard_normal(40)
        pvalues.append(f_statistic(sub, full, y)[3])
    assert stats.kstest(pvalues, "uniform").pvalue > 0.01


def test_coefficient_pvalues_detect_signal(rng):
    X = rng.standard_normal((60, 3))
    y = 3.0 * X[:, 0] + rng.standard_normal(60)
    pvalues = coefficient_pvalues(build_design(X), y)
    assert pvalues[0] < 1e-6
    assert pvalues.shape == (3,)
    assert np.all((pvalues >= 0) & (pvalues <= 1))
