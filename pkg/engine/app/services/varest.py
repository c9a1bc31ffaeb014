"""Refitted cross-validation estimates of the error variance.

The first ``⌊γn⌋`` rows are split into two halves. A screener selects columns
on each half, and each half's response is regressed on the columns chosen by
the *other* half. The residual sums of squares give two independent
estimates, combined either as a plain average (rcv) or weighted by their
degrees of freedom (mrcv).
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from app.core.errors import (
    DomainError,
    InsufficientDataError,
    ScreenerFailureError,
    SingularDesignError,
)
from app.core.logging import get_logger
from app.core.settings import settings
from app.models.schemas import ModelSubset, VarianceEstimate
from app.services.linalg_core import design_for_columns, ols_fit

logger = get_logger(__name__)

Screener = Callable[[np.ndarray, np.ndarray], ModelSubset]


class _HalfFits(NamedTuple):
    s1: float
    s2: float
    df1: int
    df2: int
    sets: tuple[ModelSubset, ModelSubset]
    rows_used: int


def _screen(
    screener: Screener, X: np.ndarray, y: np.ndarray, half: int
) -> ModelSubset:
    try:
        selected = screener(X, y)
    except Exception as exc:
        raise ScreenerFailureError(
            "screener failed during variance estimation",
            details={"half": half, "cause": repr(exc)},
        ) from exc
    if not isinstance(selected, ModelSubset):
        selected = getattr(selected, "selected", selected)
    return selected


def _cross_rss(
    X: np.ndarray, y: np.ndarray, selected: ModelSubset, intercept: bool
) -> float:
    try:
        design = design_for_columns(X, selected.indices, intercept=intercept)
    except SingularDesignError as exc:
        raise InsufficientDataError(
            "half sample cannot fit the cross-selected columns",
            details={"rows": X.shape[0], "selected": selected.size, **exc.details},
        ) from exc
    return ols_fit(design, y).rss


def _fit_halves(
    X: np.ndarray,
    y: np.ndarray,
    screener: Screener,
    gamma_frac: float,
    shuffle_rng: np.random.Generator | None,
    intercept: bool,
) -> _HalfFits:
    if not 0.5 < gamma_frac <= 1.0:
        raise DomainError(
            "gamma_frac must lie in (0.5,1]", details={"gamma_frac": gamma_frac}
        )
    matrix = np.asarray(X, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    n = matrix.shape[0]
    order = np.arange(n) if shuffle_rng is None else shuffle_rng.permutation(n)
    used = int(math.floor(gamma_frac * n + 1e-9))
    half = used // 2
    if half < 2:
        raise InsufficientDataError(
            "too few rows for refitted cross-validation",
            details={"n": n, "rows_used": used},
        )
    first, second = order[:half], order[half:used]

    E1 = _screen(screener, matrix[first], vector[first], 1)
    E2 = _screen(screener, matrix[second], vector[second], 2)
    df1 = first.size - E2.size - int(intercept)
    df2 = second.size - E1.size - int(intercept)
    if df1 <= 0 or df2 <= 0:
        raise InsufficientDataError(
            "screened sets leave no residual degrees of freedom",
            details={"df1": df1, "df2": df2, "E1": E1.size, "E2": E2.size},
            suggestion="lower max_keep or raise gamma_frac",
        )
    s1 = _cross_rss(matrix[first], vector[first], E2, intercept) / df1
    s2 = _cross_rss(matrix[second], vector[second], E1, intercept) / df2
    return _HalfFits(s1, s2, df1, df2, (E1, E2), used)


def combine_mrcv(s1: float, df1: int, s2: float, df2: int) -> float:
    return (df1 * s1 + df2 * s2) / (df1 + df2)


def rcv_variance(
    X: np.ndarray,
    y: np.ndarray,
    screener: Screener,
    gamma_frac: float | None = None,
    shuffle_rng: np.random.Generator | None = None,
    *,
    intercept: bool = False,
) -> VarianceEstimate:
    gamma_frac = gamma_frac if gamma_frac is not None else settings.default_gamma_frac
    fits = _fit_halves(X, y, screener, gamma_frac, shuffle_rng, intercept)
    estimate = VarianceEstimate(
        sigma2_hat=0.5 * (fits.s1 + fits.s2),
        method="rcv",
        df1=fits.df1,
        df2=fits.df2,
        half_estimates=(fits.s1, fits.s2),
        screen_sets=fits.sets,
        gamma_frac=gamma_frac,
        rows_used=fits.rows_used,
    )
    logger.debug(
        "varest.rcv",
        extra={"sigma2_hat": estimate.sigma2_hat, "df1": fits.df1, "df2": fits.df2},
    )
    return estimate


def mrcv_variance(
    X: np.ndarray,
    y: np.ndarray,
    screener: Screener,
    gamma_frac: float | None = None,
    shuffle_rng: np.random.Generator | None = None,
    *,
    intercept: bool = False,
) -> VarianceEstimate:
    """Degrees-of-freedom weighted refitted cross-validation estimate.

    Conditional on the sizes of the two screened sets, and when both contain
    the true model, ``ν·σ̂²/σ²`` is exactly ``χ²_ν`` with ``ν = df1 + df2``.
    """

    gamma_frac = gamma_frac if gamma_frac is not None else settings.default_gamma_frac
    fits = _fit_halves(X, y, screener, gamma_frac, shuffle_rng, intercept)
    estimate = VarianceEstimate(
        sigma2_hat=combine_mrcv(fits.s1, fits.df1, fits.s2, fits.df2),
        method="mrcv",
        df1=fits.df1,
        df2=fits.df2,
        half_estimates=(fits.s1, fits.s2),
        screen_sets=fits.sets,
        gamma_frac=gamma_frac,
        rows_used=fits.rows_used,
    )
    logger.debug(
        "varest.mrcv",
        extra={"sigma2_hat": estimate.sigma2_hat, "nu": estimate.nu},
    )
    return estimate


def oracle_variance(sigma2: float, n: int, d: int = 0) -> VarianceEstimate:
    """Known-variance stand-in carrying nominal degrees of freedom ``n − d``."""

    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise DomainError("sigma2 must be positive", details={"sigma2": sigma2})
    df = max(int(n) - int(d), 2)
    return VarianceEstimate(
        sigma2_hat=float(sigma2),
        method="oracle",
        df1=df // 2,
        df2=df - df // 2,
        rows_used=int(n),
    )


__all__ = [
    "Screener",
    "combine_mrcv",
    "mrcv_variance",
    "oracle_variance",
    "rcv_variance",
]
