"""Marginal effects of the simulation factors on coverage and set size.

Each experiment table is one cell of a (fractional) two-level factorial in
``n``, ``t`` and ``rho``. Factors are coded ``-1``/``+1`` and main-effects
models are fitted to the replicate-level outcomes of each (method, reducer)
pair: a logistic regression for the coverage indicator and a linear
regression for ``log(set_size + 1)``. Effects are reported for a move from the
low to the high level, so the coverage effect is an odds ratio and the size
effect a difference on the log scale.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np
import statsmodels.api as sm
from statsmodels.tools.sm_exceptions import (
    ConvergenceWarning,
    PerfectSeparationWarning,
)

from app.core.errors import DomainError, SeparationError, SingularDesignError
from app.core.logging import get_logger
from app.models.schemas import EffectRow, EffectsTable, ExperimentTable

logger = get_logger(__name__)

DEFAULT_FACTORS = ("n", "t", "rho")


def factor_coding(
    tables: Sequence[ExperimentTable], factors: Sequence[str]
) -> dict[str, dict[float, float]]:
    """Map each factor level to ``-1``/``+1``; single-level factors map to 0."""

    coding: dict[str, dict[float, float]] = {}
    for name in factors:
        levels = sorted({float(table.factors[name]) for table in tables})
        if len(levels) > 2:
            raise DomainError(
                f"factor {name} has more than two levels",
                details={"factor": name, "levels": levels},
                suggestion="Split the study into two-level factorials.",
            )
        if len(levels) == 1:
            coding[name] = {levels[0]: 0.0}
        else:
            coding[name] = {levels[0]: -1.0, levels[1]: 1.0}
    return coding


def _collect(
    tables: Sequence[ExperimentTable],
    method: str,
    reducer: str,
    active: list[str],
    coding: dict[str, dict[float, float]],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[np.ndarray]]:
    design_rows: list[list[float]] = []
    covered: list[float] = []
    sizes: list[float] = []
    per_cell: list[np.ndarray] = []
    for table in tables:
        levels = [coding[name][float(table.factors[name])] for name in active]
        cell = [
            result
            for result in table.results
            if result.method == method
            and result.reducer == reducer
            and not result.failed
        ]
        per_cell.append(np.array([float(r.covered) for r in cell]))
        for result in cell:
            design_rows.append(levels)
            covered.append(float(result.covered))
            sizes.append(float(result.set_size))
    return (
        np.asarray(design_rows, dtype=np.float64).reshape(-1, len(active)),
        np.asarray(covered),
        np.log(np.asarray(sizes) + 1.0),
        per_cell,
    )


def _checked_design(design: np.ndarray) -> np.ndarray:
    exog = sm.add_constant(design, has_constant="add")
    if exog.shape[0] <= exog.shape[1] or np.linalg.matrix_rank(exog) < exog.shape[1]:
        raise SingularDesignError(
            "factor levels do not separate the main effects",
            details={"rows": exog.shape[0], "columns": exog.shape[1]},
        )
    return exog


def coverage_effects(
    design: np.ndarray, covered: np.ndarray, per_cell: list[np.ndarray]
) -> np.ndarray:
    """Odds ratios ``exp(2β)`` of the ±1 main-effects logistic fit.

    Raises SeparationError when some cell has all or none of its replicates
    covered, because the logistic fit then has no finite maximum.
    """

    for index, cell in enumerate(per_cell):
        if cell.size == 0:
            continue
        rate = float(cell.mean())
        if rate in (0.0, 1.0):
            raise SeparationError(
                "coverage is 0 or 1 in some cell",
                details={"cell": index, "coverage": rate},
            )
    exog = _checked_design(design)
    with warnings.catch_warnings():
        warnings.simplefilter("error", PerfectSeparationWarning)
        warnings.simplefilter("ignore", ConvergenceWarning)
        try:
            fit = sm.Logit(covered, exog).fit(disp=0)
        except PerfectSeparationWarning as exc:
            raise SeparationError(str(exc)) from exc
    return np.exp(2.0 * np.asarray(fit.params)[1:])


def size_effects(design: np.ndarray, log_sizes: np.ndarray) -> np.ndarray:
    """Differences ``2β`` in ``log(size + 1)`` from the ±1 linear fit."""

    if log_sizes.size == 0 or float(np.ptp(log_sizes)) == 0.0:
        raise SingularDesignError("log set sizes have no variation")
    exog = _checked_design(design)
    fit = sm.OLS(log_sizes, exog).fit()
    return 2.0 * np.asarray(fit.params)[1:]


def marginal_effects(
    tables: Sequence[ExperimentTable], factors: Sequence[str] = DEFAULT_FACTORS
) -> EffectsTable:
    """Effects table with one row per (method, reducer) pair of the first table.

    Factors that do not vary across ``tables`` get no effect. Effects that
    cannot be estimated are ``None``.
    """

    if not tables:
        raise DomainError("at least one experiment table is required")
    factors = list(factors)
    missing = {
        name for table in tables for name in factors if name not in table.factors
    }
    if missing:
        raise DomainError(
            "experiment tables lack factor levels",
            details={"missing": sorted(missing)},
        )
    coding = factor_coding(tables, factors)
    active = [name for name in factors if len(coding[name]) == 2]

    rows: list[EffectRow] = []
    for cell in tables[0].rows:
        coverage: dict[str, float | None] = {name: None for name in factors}
        size: dict[str, float | None] = {name: None for name in factors}
        if active:
            design, covered, log_sizes, per_cell = _collect(
                tables, cell.method, cell.reducer, active, coding
            )
            try:
                estimates = coverage_effects(design, covered, per_cell)
                coverage.update(zip(active, (float(v) for v in estimates)))
            except (
                SeparationError,
                SingularDesignError,
                np.linalg.LinAlgError,
            ) as exc:
                logger.info(
                    "effects.coverage_not_estimable",
                    extra={
                        "method": cell.method,
                        "reducer": cell.reducer,
                        "reason": str(exc),
                    },
                )
            try:
                estimates = size_effects(design, log_sizes)
                size.update(zip(active, (float(v) for v in estimates)))
            except (SingularDesignError, np.linalg.LinAlgError) as exc:
                logger.info(
                    "effects.size_not_estimable",
                    extra={
                        "method": cell.method,
                        "reducer": cell.reducer,
                        "reason": str(exc),
                    },
                )
        rows.append(
            EffectRow(
                method=cell.method,
                reducer=cell.reducer,
                coverage_effects=coverage,
                size_effects=size,
            )
        )
    return EffectsTable(factors=factors, rows=rows)
