"""Reduction of ``p`` candidate variables to a small encompassing set.

Two reducers are provided: the Cox grid reduction (each variable enters one
row and one column regression of a random square grid) and the undertuned
lasso (smallest penalty on a geometric path whose support stays within
``max_keep``). Both return a :class:`ReductionResult`; soft failures are
flags on the result, never exceptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from app.core.errors import DomainError, InsufficientDataError
from app.core.logging import get_logger
from app.core.rng import stream
from app.core.settings import settings
from app.models.schemas import ModelSubset, ReducerName, ReductionResult
from app.services.linalg_core import build_design, coefficient_pvalues

logger = get_logger(__name__)

Reducer = Callable[[np.ndarray, np.ndarray], ReductionResult]

NEVER_SMALL_ENOUGH = "never_small_enough"
PATH_EXHAUSTED = "path_exhausted"
NO_CONVERGENCE = "no_convergence"


# --------------------------------------------------------------------------- #
# Cox grid reduction
# --------------------------------------------------------------------------- #


def grid_layout(
    p: int, rng: np.random.Generator
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Random ``⌈p/c⌉ × c`` grid with ``c = ⌈√p⌉``; returns (rows, columns)."""

    if p < 1:
        raise DomainError("p must be positive", details={"p": p})
    n_cols = math.ceil(math.sqrt(p))
    n_rows = math.ceil(p / n_cols)
    order = rng.permutation(p)
    rows = [order[r * n_cols : (r + 1) * n_cols] for r in range(n_rows)]
    cols = [order[c::n_cols] for c in range(n_cols)]
    return rows, [col for col in cols if col.size]


def _grid_min_pvalues(
    X: np.ndarray,
    y: np.ndarray,
    rows: list[np.ndarray],
    cols: list[np.ndarray],
    intercept: bool,
) -> np.ndarray:
    n, p = X.shape
    best = np.ones(p)
    for group in (*rows, *cols):
        regressors = group.size + int(intercept)
        if n <= regressors + 1:
            raise InsufficientDataError(
                "grid regression has too few observations",
                details={"n": n, "regressors": regressors},
                suggestion="use a larger sample or a smaller grid",
            )
        design = build_design(X[:, group], intercept=intercept)
        pvals = coefficient_pvalues(design, y)[int(intercept) :]
        best[group] = np.minimum(best[group], pvals)
    return best


def cox_reduction(
    X: np.ndarray,
    y: np.ndarray,
    max_keep: int | None = None,
    alpha_start: float | None = None,
    alpha_step: float | None = None,
    rng: np.random.Generator | None = None,
    *,
    intercept: bool = False,
) -> ReductionResult:
    """Retain variables significant in at least one of their two grid regressions.

    The significance level starts at ``alpha_start`` and drops by
    ``alpha_step`` until at most ``max_keep`` variables remain. A p-value equal
    to the current level counts as significant.
    """

    max_keep = max_keep if max_keep is not None else settings.default_max_keep
    alpha_start = alpha_start if alpha_start is not None else settings.cox_alpha_start
    alpha_step = alpha_step if alpha_step is not None else settings.cox_alpha_step
    if not 0 < alpha_step <= alpha_start < 1:
        raise DomainError(
            "need 0 < alpha_step <= alpha_start < 1",
            details={"alpha_start": alpha_start, "alpha_step": alpha_step},
        )
    rng = rng if rng is not None else stream(settings.default_seed)
    matrix = np.asarray(X, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    p = matrix.shape[1]
    rows, cols = grid_layout(p, rng)
    min_p = _grid_min_pvalues(matrix, vector, rows, cols, intercept)

    flags: list[str] = []
    trace: list[dict[str, float]] = []
    step = 0
    while True:
        alpha = round(alpha_start - step * alpha_step, 12)
        retained = np.flatnonzero(min_p <= alpha)
        trace.append({"alpha": alpha, "retained": int(retained.size)})
        if retained.size <= max_keep:
            break
        if alpha <= alpha_step + 1e-12:
            flags.append(NEVER_SMALL_ENOUGH)
            logger.warning(
                "reduce.cox_alpha_floor",
                extra={"alpha": alpha, "retained": int(retained.size)},
            )
            break
        step += 1

    return ReductionResult(
        selected=ModelSubset.of(retained.tolist(), p),
        method="cox",
        final_alpha=alpha,
        flags=flags,
        trace=trace,
    )


def cox_selection_stability(
    X: np.ndarray,
    y: np.ndarray,
    alpha: float,
    repeats: int,
    rng: np.random.Generator,
    *,
    intercept: bool = False,
) -> np.ndarray:
    """Per-variable retention frequency over re-randomised grids at fixed ``alpha``."""

    if repeats < 1:
        raise DomainError("repeats must be positive", details={"repeats": repeats})
    matrix = np.asarray(X, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    counts = np.zeros(matrix.shape[1])
    for _ in range(repeats):
        rows, cols = grid_layout(matrix.shape[1], rng)
        counts += _grid_min_pvalues(matrix, vector, rows, cols, intercept) <= alpha
    return counts / repeats


# --------------------------------------------------------------------------- #
# Lasso
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class LassoFit:
    coef: np.ndarray
    converged: bool
    n_iter: int
    kkt_violation: float


def _kkt_violation(
    X: np.ndarray, r: np.ndarray, beta: np.ndarray, lam: float
) -> float:
    grad = X.T @ r / X.shape[0]
    active = beta != 0.0
    inactive_gap = np.maximum(np.abs(grad[~active]) - lam, 0.0)
    active_gap = np.abs(grad[active] - lam * np.sign(beta[active]))
    return float(max(inactive_gap.max(initial=0.0), active_gap.max(initial=0.0)))


def lasso_coordinate_descent(
    X_std: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float | None = None,
    max_iter: int | None = None,
    beta0: np.ndarray | None = None,
) -> LassoFit:
    """Minimise ``‖y − Xβ‖²/(2n) + λ‖β‖₁`` by cyclic coordinate descent.

    Alternates full sweeps with sweeps over the active set and stops once the
    KKT conditions hold to ``tol``. On hitting ``max_iter`` the last iterate is
    returned with ``converged=False``.
    """

    if lam < 0:
        raise DomainError("lambda must be non-negative", details={"lambda": lam})
    tol = tol if tol is not None else settings.lasso_tol
    max_iter = max_iter if max_iter is not None else settings.lasso_max_iter
    matrix = np.asarray(X_std, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    n, p = matrix.shape
    col_sq = np.einsum("ij,ij->j", matrix, matrix) / n
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    residual = vector - matrix @ beta

    def sweep(indices: np.ndarray) -> float:
        largest = 0.0
        for j in indices:
            if col_sq[j] == 0.0:
                continue
            column = matrix[:, j]
            old = beta[j]
            z = column @ residual / n + col_sq[j] * old
            new = np.sign(z) * max(abs(z) - lam, 0.0) / col_sq[j]
            if new != old:
                residual[:] -= column * (new - old)
                beta[j] = new
                largest = max(largest, abs(new - old) * math.sqrt(col_sq[j]))
        return largest

    everything = np.arange(p)
    iterations = 0
    violation = math.inf
    while iterations < max_iter:
        sweep(everything)
        iterations += 1
        active = np.flatnonzero(beta)
        while active.size and iterations < max_iter:
            change = sweep(active)
            iterations += 1
            if change <= tol:
                break
        violation = _kkt_violation(matrix, residual, beta, lam)
        if violation <= tol:
            return LassoFit(beta, True, iterations, violation)
    return LassoFit(beta, False, iterations, violation)


def _standardize(X: np.ndarray) -> np.ndarray:
    centred = X - X.mean(axis=0)
    scale = np.sqrt(np.einsum("ij,ij->j", centred, centred) / X.shape[0])
    scale[scale == 0.0] = 1.0
    return centred / scale


def undertuned_lasso(
    X: np.ndarray,
    y: np.ndarray,
    max_keep: int | None = None,
    *,
    path_points: int | None = None,
    min_ratio: float | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
) -> ReductionResult:
    """Support at the smallest path penalty selecting at most ``max_keep`` columns.

    Walks the geometric path from ``λ_max`` downward with warm starts and stops
    at the first penalty whose support exceeds ``max_keep``; the previous point
    is chosen.
    """

    max_keep = max_keep if max_keep is not None else settings.default_max_keep
    path_points = path_points or settings.lasso_path_points
    min_ratio = min_ratio if min_ratio is not None else settings.lasso_min_ratio
    matrix = np.asarray(X, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    n, p = matrix.shape
    if n < 2 or p < 1:
        raise DomainError("lasso needs n >= 2 and p >= 1", details={"n": n, "p": p})

    X_std = _standardize(matrix)
    y_c = vector - vector.mean()
    lam_max = float(np.max(np.abs(X_std.T @ y_c)) / n)
    if lam_max == 0.0:
        return ReductionResult(
            selected=ModelSubset(indices=(), p_total=p),
            method="lasso",
            lambda_chosen=0.0,
            trace=[{"lambda": 0.0, "support": 0}],
        )

    path = lam_max * np.geomspace(1.0, min_ratio, path_points)
    beta = np.zeros(p)
    chosen_lambda, chosen_support, chosen_at = lam_max, np.array([], dtype=int), 0
    flags: list[str] = []
    trace: list[dict[str, float]] = []
    exceeded = False
    for position, lam in enumerate(path):
        fit = lasso_coordinate_descent(X_std, y_c, float(lam), tol, max_iter, beta)
        beta = fit.coef
        support = np.flatnonzero(beta)
        trace.append({"lambda": float(lam), "support": int(support.size)})
        if not fit.converged and NO_CONVERGENCE not in flags:
            flags.append(NO_CONVERGENCE)
            logger.warning(
                "lasso.no_convergence",
                extra={"lambda": float(lam), "kkt": fit.kkt_violation},
            )
        if support.size > max_keep:
            exceeded = True
            break
        chosen_lambda, chosen_support, chosen_at = float(lam), support, position

    if exceeded and chosen_at == 0:
        flags.append(PATH_EXHAUSTED)
        logger.warning(
            "lasso.path_exhausted", extra={"max_keep": max_keep, "lambda": lam_max}
        )
    return ReductionResult(
        selected=ModelSubset.of(chosen_support.tolist(), p),
        method="lasso",
        lambda_chosen=chosen_lambda,
        flags=flags,
        trace=trace,
    )


# --------------------------------------------------------------------------- #
# Splitting and factories
# --------------------------------------------------------------------------- #


def split_indices(n: int, frac: float) -> tuple[np.ndarray, np.ndarray]:
    """First ``⌊frac·n⌋`` indices for training, the rest held out."""

    if not 0.0 < frac < 1.0:
        raise DomainError("frac must lie in (0,1)", details={"frac": frac})
    cut = int(math.floor(frac * n + 1e-9))
    if cut < 1 or n - cut < 1:
        raise DomainError(
            "split leaves an empty part", details={"n": n, "frac": frac, "train": cut}
        )
    return np.arange(cut), np.arange(cut, n)


def make_reducer(
    name: ReducerName,
    *,
    max_keep: int | None = None,
    seed: int | None = None,
    intercept: bool = False,
) -> Reducer:
    """Reducer bound to its tuning.

    A Cox reducer rebuilds its grid from ``seed`` on every call.
    """

    if name == "cox":
        grid_seed = seed if seed is not None else settings.default_seed

        def run_cox(X: np.ndarray, y: np.ndarray) -> ReductionResult:
            return cox_reduction(
                X, y, max_keep, rng=stream(grid_seed), intercept=intercept
            )

        return run_cox
    if name == "lasso":

        def run_lasso(X: np.ndarray, y: np.ndarray) -> ReductionResult:
            return undertuned_lasso(X, y, max_keep)

        return run_lasso
    raise DomainError(f"unknown reducer: {name}", details={"reducer": name})
