"""Confidence sets of models.

Every subset of the encompassing set up to ``max_size`` variables is tested;
the models not rejected at level ``alpha`` form the confidence set. Sweeps can
be sharded by first index across worker processes and are merged back in
lexicographic order.
"""

from __future__ import annotations

import itertools
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from math import comb
from typing import Callable, Iterator

import numpy as np

from app.core.errors import DomainError, ModelConfError, NumericalError
from app.core.logging import get_logger
from app.models.schemas import (
    ConfidenceSet,
    ModelSubset,
    SubstitutionPair,
    SummaryReport,
    TestOutcome,
)

logger = get_logger(__name__)

Tester = Callable[[ModelSubset, np.ndarray, np.ndarray], TestOutcome]


def count_submodels(size: int, max_size: int) -> int:
    return sum(comb(size, j) for j in range(1, max_size + 1))


def enumerate_submodels(
    encompassing: ModelSubset, max_size: int, *, first: int | None = None
) -> Iterator[ModelSubset]:
    """Non-empty subsets of ``encompassing`` with at most ``max_size`` elements.

    Yields in lexicographic order of the index tuples. ``first`` restricts the
    stream to subsets whose smallest element is ``encompassing.indices[first]``.
    """

    if not 1 <= max_size <= encompassing.size:
        raise DomainError(
            "max_size must lie in [1, |encompassing|]",
            details={"max_size": max_size, "encompassing": encompassing.size},
        )
    items = encompassing.indices
    p_total = encompassing.p_total
    starts = range(len(items)) if first is None else [first]

    def extend(prefix: tuple[int, ...], start: int) -> Iterator[ModelSubset]:
        yield ModelSubset(indices=prefix, p_total=p_total)
        if len(prefix) == max_size:
            return
        for position in range(start, len(items)):
            yield from extend((*prefix, items[position]), position + 1)

    for position in starts:
        yield from extend((items[position],), position + 1)


def _sweep(
    tester: Tester,
    X: np.ndarray,
    y: np.ndarray,
    encompassing: ModelSubset,
    max_size: int,
    first: int | None,
) -> list[tuple[ModelSubset, float | None]]:
    results: list[tuple[ModelSubset, float | None]] = []
    for submodel in enumerate_submodels(encompassing, max_size, first=first):
        try:
            outcome = tester(submodel, X, y)
        except ModelConfError as exc:
            logger.debug(
                "confset.submodel_error",
                extra={"submodel": str(submodel), "code": exc.error_code},
            )
            results.append((submodel, None))
            continue
        results.append((submodel, outcome.p_value))
    return results


def build_confidence_set(
    X: np.ndarray,
    y: np.ndarray,
    encompassing: ModelSubset,
    tester: Tester,
    alpha: float,
    max_size: int,
    *,
    method: str | None = None,
    workers: int = 1,
) -> ConfidenceSet:
    """Models whose p-value exceeds ``alpha``; ``alpha = 0`` rejects nothing.

    Submodels whose test raises a library error are counted as undetermined
    and left out of the set.
    """

    if not 0.0 <= alpha <= 1.0:
        raise DomainError("alpha must lie in [0,1]", details={"alpha": alpha})
    matrix = np.asarray(X, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    label = method or getattr(tester, "method", "custom")

    if workers > 1 and encompassing.size > 1:
        firsts = list(range(encompassing.size))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(
                _sweep,
                itertools.repeat(tester),
                itertools.repeat(matrix),
                itertools.repeat(vector),
                itertools.repeat(encompassing),
                itertools.repeat(max_size),
                firsts,
            )
            results = [item for chunk in chunks for item in chunk]
    else:
        results = _sweep(tester, matrix, vector, encompassing, max_size, None)

    expected = count_submodels(encompassing.size, max_size)
    if len(results) != expected:
        raise NumericalError(
            "sweep did not visit every submodel",
            details={"visited": len(results), "expected": expected},
        )

    accepted: list[ModelSubset] = []
    p_values: dict[str, float] = {}
    undetermined = 0
    for submodel, p_value in results:
        if p_value is None:
            undetermined += 1
            continue
        p_values[str(submodel)] = p_value
        if alpha == 0.0 or p_value > alpha:
            accepted.append(submodel)
    if undetermined:
        logger.warning(
            "confset.undetermined",
            extra={
                "method": label,
                "undetermined": undetermined,
                "tested": len(results),
            },
        )
    return ConfidenceSet(
        accepted=accepted,
        alpha=alpha,
        method=label,
        encompassing=encompassing,
        max_size=max_size,
        n_tested=len(results),
        n_undetermined=undetermined,
        p_values=p_values,
        inclusion_freq=_inclusion(accepted, encompassing),
    )


def _inclusion(
    accepted: list[ModelSubset], encompassing: ModelSubset
) -> dict[int, float]:
    counts = Counter(idx for model in accepted for idx in model.indices)
    total = len(accepted)
    return {
        idx: (counts[idx] / total if total else 0.0) for idx in encompassing.indices
    }


def summarize(confidence_set: ConfidenceSet, top_n: int = 10) -> SummaryReport:
    """Inclusion frequencies and the most frequent substitutions.

    A substitution ``(v, w)`` is the fraction of accepted models lacking ``v``
    that contain ``w``.
    """

    accepted = confidence_set.accepted
    variables = confidence_set.encompassing.indices
    inclusion = _inclusion(accepted, confidence_set.encompassing)
    if not accepted:
        return SummaryReport(
            method=confidence_set.method,
            alpha=confidence_set.alpha,
            n_accepted=0,
            n_tested=confidence_set.n_tested,
            empty=True,
            inclusion_freq=inclusion,
        )

    member = np.array(
        [[idx in set(model.indices) for idx in variables] for model in accepted],
        dtype=bool,
    )
    pairs: list[SubstitutionPair] = []
    for a, missing in enumerate(variables):
        lacking = ~member[:, a]
        n_lacking = int(lacking.sum())
        if n_lacking == 0:
            continue
        containing = member[lacking].sum(axis=0) / n_lacking
        for b, substitute in enumerate(variables):
            if b != a and containing[b] > 0:
                pairs.append(
                    SubstitutionPair(
                        missing=missing,
                        substitute=substitute,
                        frequency=float(containing[b]),
                    )
                )
    pairs.sort(key=lambda pair: (-pair.frequency, pair.missing, pair.substitute))
    return SummaryReport(
        method=confidence_set.method,
        alpha=confidence_set.alpha,
        n_accepted=len(accepted),
        n_tested=confidence_set.n_tested,
        inclusion_freq=inclusion,
        top_substitutions=pairs[:top_n],
    )
