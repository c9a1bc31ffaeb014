from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from statistics import mean
from threading import Lock

from app.models.schemas import ExperimentRow, ReplicateResult


@dataclass
class _CellCounts:
    replicates: int = 0
    failures: int = 0
    survived: int = 0
    covered: int = 0
    sizes: list[int] = field(default_factory=list)


def _binomial_se(rate: float, count: int) -> float | None:
    if count < 2:
        return None
    return math.sqrt(rate * (1.0 - rate) / count)


def _mean_se(values: list[int]) -> float | None:
    count = len(values)
    if count < 2:
        return None
    centre = mean(values)
    variance = sum((v - centre) ** 2 for v in values) / (count - 1)
    return math.sqrt(variance / count)


def _percentile(values: list[float], p: float) -> float:
    if not values:
        return 0.0
    if p <= 0:
        return float(min(values))
    if p >= 100:
        return float(max(values))
    ordered = sorted(values)
    k = (len(ordered) - 1) * (p / 100.0)
    f = int(k)
    c = min(f + 1, len(ordered) - 1)
    if f == c:
        return float(ordered[f])
    return float(ordered[f] * (c - k) + ordered[c] * (k - f))


class ExperimentTally:
    """Thread-safe aggregation of replicate outcomes into table rows.

    Cells are kept in first-seen order so the table layout follows the order
    in which the harness evaluates (method, reducer) pairs. Failed replicates
    are counted but excluded from the means.
    """

    def __init__(self) -> None:
        self._cells: dict[tuple[str, str], _CellCounts] = defaultdict(_CellCounts)
        self._latencies_ms: list[float] = []
        self._lock = Lock()

    def record(self, result: ReplicateResult) -> None:
        with self._lock:
            cell = self._cells[(result.method, result.reducer)]
            cell.replicates += 1
            if result.failed:
                cell.failures += 1
                return
            cell.survived += int(result.survived)
            cell.covered += int(result.covered)
            cell.sizes.append(int(result.set_size))

    def record_latency(self, latency_ms: float) -> None:
        with self._lock:
            self._latencies_ms.append(float(latency_ms))

    def rows(self) -> list[ExperimentRow]:
        with self._lock:
            rows = []
            for (method, reducer), cell in self._cells.items():
                count = len(cell.sizes)
                coverage = cell.covered / count if count else 0.0
                survival = cell.survived / count if count else 0.0
                rows.append(
                    ExperimentRow(
                        method=method,
                        reducer=reducer,
                        coverage=coverage,
                        coverage_se=_binomial_se(coverage, count),
                        survival=survival,
                        survival_se=_binomial_se(survival, count),
                        mean_size=mean(cell.sizes) if count else 0.0,
                        size_se=_mean_se(cell.sizes),
                        failures=cell.failures,
                    )
                )
            return rows

    def timing(self) -> dict:
        with self._lock:
            latencies = list(self._latencies_ms)
            return {
                "replicates_timed": len(latencies),
                "replicate_ms_mean": round(mean(latencies), 3) if latencies else 0.0,
                "replicate_ms_p95": round(_percentile(latencies, 95), 3),
            }

    def reset(self) -> None:
        with self._lock:
            self._cells.clear()
            self._latencies_ms.clear()
