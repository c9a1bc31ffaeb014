"""Least-squares fits, complement bases and F comparisons.

All routines are pure functions of their inputs. Designs are validated once at
construction (``n >= d`` and numerical full column rank) so downstream code can
rely on an invertible ``XᵀX``. Saturated designs are allowed for fitting; the
tests that need residual degrees of freedom check ``n − d`` themselves.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy import linalg as sla

from app.core.errors import (
    DegenerateDfError,
    DimensionMismatchError,
    NotNestedError,
    SingularDesignError,
)
from app.core.settings import settings
from app.services import dist

INTERCEPT = "(intercept)"


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Design:
    """Validated n×d design matrix; ``labels`` identify columns for nesting checks."""

    entries: np.ndarray
    intercept_included: bool = False
    labels: tuple[Hashable, ...] = field(default=())

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.entries.tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class ComplementBasis:
    U: np.ndarray
    source_design_hash: str

    @property
    def dim(self) -> int:
        return int(self.U.shape[1])


@dataclass(frozen=True)
class LeastSquaresFit:
    theta_hat: np.ndarray
    residuals: np.ndarray
    rss: float
    df_resid: int


def build_design(
    X: np.ndarray,
    *,
    intercept: bool = False,
    labels: Sequence[Hashable] | None = None,
    rtol: float | None = None,
) -> Design:
    """Validate ``X`` (optionally prefixed with a ones column) into a Design."""

    matrix = np.asarray(X, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.ndim != 2:
        raise DimensionMismatchError(
            "design must be a 2-d array", details={"ndim": matrix.ndim}
        )
    n = matrix.shape[0]
    col_labels: list[Hashable] = (
        list(labels) if labels is not None else list(range(matrix.shape[1]))
    )
    if len(col_labels) != matrix.shape[1]:
        raise DimensionMismatchError(
            "labels must match the number of columns",
            details={"labels": len(col_labels), "cols": matrix.shape[1]},
        )
    if intercept:
        matrix = np.column_stack([np.ones(n), matrix])
        col_labels = [INTERCEPT, *col_labels]
    d = matrix.shape[1]
    if n < d:
        raise SingularDesignError(
            "design has more columns than rows",
            details={"n": n, "d": d},
            suggestion="reduce the model size or supply more observations",
        )
    if not np.all(np.isfinite(matrix)):
        raise DimensionMismatchError("design contains non-finite entries")
    if d > 0:
        singular_values = sla.svdvals(matrix)
        tol = (rtol if rtol is not None else settings.rank_rtol) * singular_values[0]
        if singular_values[0] == 0.0 or singular_values[-1] <= tol:
            raise SingularDesignError(
                "design is rank deficient",
                details={
                    "n": n,
                    "d": d,
                    "smallest_singular_value": float(singular_values[-1]),
                },
            )
    return Design(
        entries=_readonly(matrix),
        intercept_included=intercept,
        labels=tuple(col_labels),
    )


def design_for_columns(
    X: np.ndarray, columns: Sequence[int], *, intercept: bool = False
) -> Design:
    """Design built from a subset of the columns of ``X``, labelled by index."""

    cols = [int(c) for c in columns]
    matrix = np.asarray(X, dtype=np.float64)[:, cols]
    return build_design(matrix, intercept=intercept, labels=cols)


def _check_response(design: Design, y: np.ndarray) -> np.ndarray:
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    if vector.shape[0] != design.rows:
        raise DimensionMismatchError(
            "response length does not match design rows",
            details={"n": design.rows, "len_y": int(vector.shape[0])},
        )
    return vector


def ols_fit(design: Design, y: np.ndarray) -> LeastSquaresFit:
    vector = _check_response(design, y)
    if design.cols == 0:
        residuals = vector.copy()
        return LeastSquaresFit(
            theta_hat=np.zeros(0),
            residuals=residuals,
            rss=float(residuals @ residuals),
            df_resid=design.rows,
        )
    Q, R = sla.qr(design.entries, mode="economic")
    theta = sla.solve_triangular(R, Q.T @ vector)
    residuals = vector - design.entries @ theta
    return LeastSquaresFit(
        theta_hat=theta,
        residuals=residuals,
        rss=float(residuals @ residuals),
        df_resid=design.rows - design.cols,
    )


def residualize(design: Design, Y: np.ndarray) -> np.ndarray:
    """Apply the annihilator ``M = I − X(XᵀX)⁻¹Xᵀ`` to each column of ``Y``."""

    matrix = np.asarray(Y, dtype=np.float64)
    if matrix.shape[0] != design.rows:
        raise DimensionMismatchError(
            "row count does not match design",
            details={"n": design.rows, "rows": int(matrix.shape[0])},
        )
    if design.cols == 0:
        return matrix.copy()
    Q, _ = sla.qr(design.entries, mode="economic")
    return matrix - Q @ (Q.T @ matrix)


def complement_basis(design: Design) -> ComplementBasis:
    """Orthonormal basis of the orthogonal complement of span(X).

    Trailing ``n − d`` columns of the full QR factor, so the column order is
    deterministic for a given design.
    """

    if design.cols == 0:
        return ComplementBasis(
            U=_readonly(np.eye(design.rows)), source_design_hash=design.digest
        )
    Q, _ = sla.qr(design.entries, mode="full")
    return ComplementBasis(
        U=_readonly(Q[:, design.cols :]),
        source_design_hash=design.digest,
    )


def annihilator(design: Design) -> np.ndarray:
    return residualize(design, np.eye(design.rows))


def coefficient_pvalues(design: Design, y: np.ndarray) -> np.ndarray:
    """Two-sided t-test p-values for each coefficient of an OLS fit."""

    fit = ols_fit(design, y)
    if fit.df_resid < 1:
        raise DegenerateDfError("no residual degrees of freedom for t-tests")
    _, R = sla.qr(design.entries, mode="economic")
    R_inv = sla.solve_triangular(R, np.eye(design.cols))
    xtx_inv_diag = np.sum(R_inv**2, axis=1)
    sigma2 = fit.rss / fit.df_resid
    se = np.sqrt(sigma2 * xtx_inv_diag)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_values = np.where(se > 0, fit.theta_hat / se, np.inf)
    return 2.0 * dist.t_sf(np.abs(t_values), fit.df_resid)


def f_statistic(
    sub: Design, full: Design, y: np.ndarray
) -> tuple[float, int, int, float]:
    """F comparison of nested designs: returns ``(F, df1, df2, p)``."""

    if sub.rows != full.rows:
        raise DimensionMismatchError(
            "nested designs must share rows",
            details={"sub_rows": sub.rows, "full_rows": full.rows},
        )
    missing = [label for label in sub.labels if label not in set(full.labels)]
    if missing:
        raise NotNestedError(
            "submodel columns are not contained in the full design",
            details={"missing": [str(m) for m in missing]},
        )
    df1 = full.cols - sub.cols
    df2 = full.rows - full.cols
    if df1 <= 0 or df2 <= 0:
        raise DegenerateDfError(
            "F comparison has no degrees of freedom",
            details={"df1": df1, "df2": df2},
        )
    rss_full = ols_fit(full, y).rss
    rss_sub = ols_fit(sub, y).rss
    gain = max(rss_sub - rss_full, 0.0)
    if rss_full <= 0.0:
        F = 0.0 if gain <= 0.0 else float(np.finfo(np.float64).max)
    else:
        F = (gain / df1) / (rss_full / df2)
    p_value = float(dist.f_sf(F, df1, df2))
    return float(F), df1, df2, min(max(p_value, 0.0), 1.0)
