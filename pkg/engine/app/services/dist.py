"""Reference distributions and concentration bounds."""

from __future__ import annotations

import math
from typing import Union

import numpy as np
from scipy import special, stats

from app.core.errors import DomainError

ArrayLike = Union[float, np.ndarray]


def _check_df(df: float, name: str = "df") -> None:
    if not (math.isfinite(df) and df > 0):
        raise DomainError(
            f"{name} must be a positive finite number", details={name: df}
        )


def _check_prob(p: ArrayLike) -> None:
    values = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(values)) or np.any((values <= 0.0) | (values >= 1.0)):
        raise DomainError("probability must lie in (0,1)", details={"p": p})


def _check_nonnegative(x: ArrayLike) -> None:
    values = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(values)) or np.any(values < 0.0):
        raise DomainError("argument must be non-negative", details={"x": x})


def _out(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def normal_cdf(z: ArrayLike) -> ArrayLike:
    return _out(stats.norm.cdf(z))


def normal_sf(z: ArrayLike) -> ArrayLike:
    return _out(stats.norm.sf(z))


def chi2_cdf(x: ArrayLike, df: float) -> ArrayLike:
    _check_df(df)
    _check_nonnegative(x)
    return _out(stats.chi2.cdf(x, df))


def chi2_sf(x: ArrayLike, df: float) -> ArrayLike:
    _check_df(df)
    _check_nonnegative(x)
    return _out(stats.chi2.sf(x, df))


def chi2_quantile(p: ArrayLike, df: float) -> ArrayLike:
    _check_df(df)
    _check_prob(p)
    return _out(stats.chi2.ppf(p, df))


def f_cdf(x: ArrayLike, df1: float, df2: float) -> ArrayLike:
    _check_df(df1, "df1")
    _check_df(df2, "df2")
    _check_nonnegative(x)
    return _out(stats.f.cdf(x, df1, df2))


def f_sf(x: ArrayLike, df1: float, df2: float) -> ArrayLike:
    _check_df(df1, "df1")
    _check_df(df2, "df2")
    _check_nonnegative(x)
    return _out(stats.f.sf(x, df1, df2))


def t_cdf(x: ArrayLike, df: float) -> ArrayLike:
    _check_df(df)
    return _out(stats.t.cdf(x, df))


def t_sf(x: ArrayLike, df: float) -> ArrayLike:
    _check_df(df)
    return _out(stats.t.sf(x, df))


def _check_m(m: int) -> None:
    if int(m) != m or m < 2:
        raise DomainError("m must be an integer >= 2", details={"m": m})


def fisher_corr_density(r: ArrayLike, m: int) -> ArrayLike:
    """Null density of the inner product of two independent uniform unit vectors.

    ``m`` is the sphere dimension (``n − d``). The normalising gamma ratio is
    evaluated in log space so large ``m`` does not overflow.
    """

    _check_m(m)
    values = np.asarray(r, dtype=np.float64)
    if np.any(~np.isfinite(values)) or np.any(np.abs(values) >= 1.0):
        raise DomainError("r must lie in (-1,1)", details={"r": r})
    log_const = (
        special.gammaln(m / 2.0)
        - 0.5 * math.log(math.pi)
        - special.gammaln((m - 1) / 2.0)
    )
    density = np.exp(log_const + 0.5 * (m - 3) * np.log1p(-(values**2)))
    return _out(density)


def fisher_corr_cdf(r: ArrayLike, m: int) -> ArrayLike:
    """CDF matching :func:`fisher_corr_density`.

    ``(1 + r)/2`` follows Beta((m−1)/2, (m−1)/2).
    """

    _check_m(m)
    values = np.clip(np.asarray(r, dtype=np.float64), -1.0, 1.0)
    shape = (m - 1) / 2.0
    return _out(special.betainc(shape, shape, (1.0 + values) / 2.0))


def mrcv_tail_bound(nu: int, delta: float) -> float:
    """Chernoff bound on ``pr(|χ²_ν/ν − 1| > δ)``.

    Returns ``2·exp(−(ν/2)(δ − log(1+δ)))`` capped at 1. The upper-tail
    exponent also dominates the lower-tail one, so a single term covers both
    sides.
    """

    if int(nu) != nu or nu < 1:
        raise DomainError("nu must be a positive integer", details={"nu": nu})
    if not (delta > 0):
        raise DomainError("delta must be positive", details={"delta": delta})
    if math.isinf(delta):
        return 0.0
    exponent = 0.5 * nu * (delta - math.log1p(delta))
    return min(1.0, 2.0 * math.exp(-exponent))
