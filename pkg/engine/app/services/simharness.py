"""Monte Carlo experiments on Toeplitz designs with a sparse true model.

Each replicate draws one dataset ``(X, y)`` from its own key path and runs
every (method, reducer) cell on it, so cells are compared on common random
numbers. Randomisation inside a cell (grid layout, pseudo-replicate noise) is
keyed by the cell so the tests themselves are not artificially coupled.
"""

from __future__ import annotations

import hashlib
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import stats

from app.core.errors import DomainError, ModelConfError
from app.core.logging import get_logger
from app.core.rng import Stream, derive_seed, method_key, stream
from app.models.schemas import (
    ExperimentTable,
    ModelSubset,
    NullCalibrationReport,
    ReductionResult,
    ReplicateResult,
    SimulationConfig,
    TestMethod,
    VarianceEstimate,
)
from app.services.confset import build_confidence_set
from app.services.modeltest import (
    ancillary_test,
    cosufficient_test,
    make_tester,
    naive_f_test,
)
from app.services.reduce import make_reducer, split_indices
from app.services.tally import ExperimentTally
from app.services.varest import mrcv_variance, oracle_variance

_LABEL = re.compile(r"^(?P<method>[a-z_]+?)(?:_k(?P<k>\d+))?$")


# --------------------------------------------------------------------------- #
# Data generation
# --------------------------------------------------------------------------- #


def gen_toeplitz_design(
    n: int, p: int, rho: float, rng: np.random.Generator
) -> np.ndarray:
    """Rows ``N(0, Σ)``, ``Σ_ij = ρ^|i−j|``, built by an AR(1) recursion."""

    if not 0.0 <= rho < 1.0:
        raise DomainError("rho must lie in [0,1)", details={"rho": rho})
    if n < 1 or p < 1:
        raise DomainError("n and p must be positive", details={"n": n, "p": p})
    innovations = rng.standard_normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = innovations[:, 0]
    scale = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * innovations[:, j]
    return X


def gen_response(
    X: np.ndarray, t: float, sigma2: float, rng: np.random.Generator
) -> np.ndarray:
    """``y = t(x₁ + x₂ + x₃) + σε``."""

    if X.shape[1] < 3:
        raise DomainError("need at least three columns", details={"p": X.shape[1]})
    if sigma2 < 0:
        raise DomainError("sigma2 must be non-negative", details={"sigma2": sigma2})
    signal = t * X[:, :3].sum(axis=1)
    return signal + math.sqrt(sigma2) * rng.standard_normal(X.shape[0])


def generate_dataset(
    config: SimulationConfig, replicate_index: int
) -> tuple[np.ndarray, np.ndarray]:
    rng = stream(config.seed, replicate_index, Stream.DATA)
    X = gen_toeplitz_design(config.n, config.p, config.rho, rng)
    y = gen_response(X, config.t, config.sigma2, rng)
    return X, y


def dataset_digest(X: np.ndarray, y: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(X).tobytes())
    digest.update(np.ascontiguousarray(y).tobytes())
    return digest.hexdigest()


# --------------------------------------------------------------------------- #
# Cells
# --------------------------------------------------------------------------- #


def experiment_cells(config: SimulationConfig) -> list[tuple[str, str]]:
    """(method label, reducer) pairs in table order.

    Co-sufficient labels carry their replicate count, e.g. ``cosufficient_k8``.
    """

    cells: list[tuple[str, str]] = []
    for reducer in config.reducers:
        for method in config.methods:
            if method == "split_f":
                continue
            if method == "cosufficient":
                cells.extend((f"cosufficient_k{k}", reducer) for k in config.k_values)
            else:
                cells.append((method, reducer))
    if "split_f" in config.methods:
        cells.extend(("split_f", reducer) for reducer in config.reducers)
    return cells


def parse_label(label: str, default_k: int = 2) -> tuple[TestMethod, int]:
    match = _LABEL.match(label)
    if match is None or match.group("method") not in {
        "cosufficient",
        "ancillary",
        "naive_f",
        "split_f",
    }:
        raise DomainError(f"unknown method label: {label}", details={"label": label})
    k = int(match.group("k")) if match.group("k") else default_k
    return match.group("method"), k


class _ReplicateState:
    """One dataset with its lazily computed reductions and variance estimate."""

    def __init__(
        self,
        config: SimulationConfig,
        index: int,
        X: np.ndarray,
        y: np.ndarray,
        encompassing_override: ModelSubset | None = None,
    ) -> None:
        self.config = config
        self.index = index
        self.X = X
        self.y = y
        self.encompassing_override = encompassing_override
        self._full: dict[str, ReductionResult] = {}
        self._train: dict[str, ReductionResult] = {}
        self._variance: VarianceEstimate | ModelConfError | None = None

    def reduction(self, reducer: str) -> ModelSubset:
        if self.encompassing_override is not None:
            return self.encompassing_override
        if reducer not in self._full:
            run = make_reducer(
                reducer,
                max_keep=self.config.max_keep,
                seed=derive_seed(self.config.seed, self.index, Stream.GRID),
            )
            self._full[reducer] = run(self.X, self.y)
        return self._full[reducer].selected

    def train_reduction(self, reducer: str) -> ModelSubset:
        if self.encompassing_override is not None:
            return self.encompassing_override
        if reducer not in self._train:
            train, _ = split_indices(self.config.n, self.config.split_frac)
            run = make_reducer(
                reducer,
                max_keep=self.config.max_keep,
                seed=derive_seed(self.config.seed, self.index, Stream.GRID, 1),
            )
            self._train[reducer] = run(self.X[train], self.y[train])
        return self._train[reducer].selected

    def variance(self) -> VarianceEstimate:
        if self._variance is None:
            try:
                self._variance = _estimate_variance(self.config, self.X, self.y)
            except ModelConfError as exc:
                self._variance = exc
        if isinstance(self._variance, ModelConfError):
            raise self._variance
        return self._variance


def _estimate_variance(
    config: SimulationConfig, X: np.ndarray, y: np.ndarray
) -> VarianceEstimate:
    if config.known_sigma:
        return oracle_variance(config.sigma2, config.n)
    screener = make_reducer("lasso", max_keep=config.max_keep)
    return mrcv_variance(X, y, screener, config.gamma_frac)


def _run_cell(
    state: _ReplicateState, label: str, reducer: str, alpha: float
) -> ReplicateResult:
    config = state.config
    method, k = parse_label(label, config.k_values[0])
    seed_used = derive_seed(config.seed, state.index)
    if method == "split_f":
        encompassing = state.train_reduction(reducer)
    else:
        encompassing = state.reduction(reducer)
    truth = config.true_model
    survived = truth.issubset(encompassing)
    if encompassing.size == 0:
        return ReplicateResult(
            replicate=state.index,
            method=label,
            reducer=reducer,
            survived=False,
            covered=False,
            set_size=0,
            seed_used=seed_used,
        )
    variance = state.variance() if method in {"cosufficient", "ancillary"} else None
    tester = make_tester(
        method,
        y=state.y,
        k=k,
        variance=variance,
        encompassing=encompassing,
        noise_seed=(config.seed, state.index, Stream.NOISE, method_key(label)),
        split_frac=config.split_frac,
    )
    confidence_set = build_confidence_set(
        state.X,
        state.y,
        encompassing,
        tester,
        alpha,
        min(config.max_model_size, encompassing.size),
        method=label,
    )
    return ReplicateResult(
        replicate=state.index,
        method=label,
        reducer=reducer,
        survived=survived,
        covered=survived and confidence_set.contains(truth),
        set_size=confidence_set.size,
        seed_used=seed_used,
        n_undetermined=confidence_set.n_undetermined,
    )


def run_replicate_cells(
    config: SimulationConfig,
    replicate_index: int,
    cells: list[tuple[str, str]] | None = None,
    *,
    encompassing_override: ModelSubset | None = None,
    alpha: float | None = None,
) -> list[ReplicateResult]:
    """Run ``cells`` (default: every cell of ``config``) on one dataset."""

    logger = get_logger(__name__)
    X, y = generate_dataset(config, replicate_index)
    state = _ReplicateState(
        config, replicate_index, X, y, encompassing_override=encompassing_override
    )
    level = config.alpha if alpha is None else alpha
    results = []
    for label, reducer in cells or experiment_cells(config):
        try:
            results.append(_run_cell(state, label, reducer, level))
        except ModelConfError as exc:
            logger.warning(
                "simharness.replicate_failed",
                extra={
                    "replicate": replicate_index,
                    "method": label,
                    "reducer": reducer,
                    "code": exc.error_code,
                    "error": exc.message,
                },
            )
            results.append(
                ReplicateResult(
                    replicate=replicate_index,
                    method=label,
                    reducer=reducer,
                    survived=False,
                    covered=False,
                    set_size=0,
                    seed_used=derive_seed(config.seed, replicate_index),
                    failed=True,
                    error=f"{exc.error_code}: {exc.message}",
                )
            )
    return results


def run_replicate(
    config: SimulationConfig, method: str, reducer: str, replicate_index: int
) -> ReplicateResult:
    """Single cell of one replicate.

    ``method`` is a bare method name or a label such as ``cosufficient_k8``.
    """

    label = method
    if method == "cosufficient":
        label = f"cosufficient_k{config.k_values[0]}"
    return run_replicate_cells(config, replicate_index, [(label, reducer)])[0]


def _replicate_job(
    config: SimulationConfig, replicate_index: int
) -> tuple[list[ReplicateResult], float]:
    started = time.perf_counter()
    results = run_replicate_cells(config, replicate_index)
    return results, (time.perf_counter() - started) * 1000.0


class ExperimentRunner:
    """Runs every replicate of a config and aggregates the cell table."""

    def __init__(self, config: SimulationConfig, workers: int | None = None) -> None:
        self.config = config
        self.workers = max(int(workers or config.workers), 1)
        self.tally = ExperimentTally()
        self._logger = get_logger(__name__)

    def run(self) -> ExperimentTable:
        config = self.config
        indices = range(config.replicates)
        self.tally.reset()
        self._logger.info(
            "simharness.started",
            extra={
                "replicates": config.replicates,
                "workers": self.workers,
                "cells": len(experiment_cells(config)),
            },
        )
        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                outputs = list(
                    pool.map(_replicate_job, [config] * config.replicates, indices)
                )
        else:
            outputs = [_replicate_job(config, index) for index in indices]

        all_results: list[ReplicateResult] = []
        for results, latency_ms in outputs:
            self.tally.record_latency(latency_ms)
            for result in results:
                self.tally.record(result)
            all_results.extend(results)

        rows = self.tally.rows()
        for row in rows:
            self._logger.info(
                "simharness.cell_done",
                extra={
                    "method": row.method,
                    "reducer": row.reducer,
                    "coverage": round(row.coverage, 4),
                    "survival": round(row.survival, 4),
                    "mean_size": round(row.mean_size, 2),
                    "failures": row.failures,
                },
            )
        return ExperimentTable(
            rows=rows,
            factors={"n": config.n, "t": config.t, "rho": config.rho},
            replicates=config.replicates,
            results=all_results,
        )


def run_experiment(config: SimulationConfig) -> ExperimentTable:
    return ExperimentRunner(config).run()


# --------------------------------------------------------------------------- #
# Null calibration
# --------------------------------------------------------------------------- #


def run_null_calibration(
    config: SimulationConfig,
    k_values: list[int] | None = None,
    replicates: int | None = None,
    *,
    known_sigma: bool | None = None,
    oracle_extra: int = 2,
) -> NullCalibrationReport:
    """Rejection rates for the true model against an oracle encompassing set.

    The encompassing set is the true model plus the next ``oracle_extra``
    columns, fixed before seeing the data. Co-sufficient statistics are also
    compared with N(0,1) by a Kolmogorov-Smirnov distance.
    """

    logger = get_logger(__name__)
    k_values = k_values or config.k_values
    replicates = replicates or config.replicates
    known = config.known_sigma if known_sigma is None else known_sigma
    truth = config.true_model
    extra = range(3, min(3 + oracle_extra, config.p))
    oracle = ModelSubset.of([*truth.indices, *extra], config.p)
    calibration_config = config.model_copy(update={"known_sigma": known})

    statistics: dict[str, list[float]] = {f"cosufficient_k{k}": [] for k in k_values}
    rejections: dict[str, int] = {label: 0 for label in statistics}
    rejections.update({"ancillary": 0, "naive_f": 0})
    failures = 0
    for index in range(replicates):
        X, y = generate_dataset(calibration_config, index)
        try:
            variance = _estimate_variance(calibration_config, X, y)
            for k in k_values:
                label = f"cosufficient_k{k}"
                outcome = cosufficient_test(
                    truth,
                    X,
                    y,
                    k,
                    variance,
                    seed=(config.seed, index, Stream.NOISE, method_key(label)),
                )
                statistics[label].append(outcome.statistic)
                rejections[label] += outcome.p_value <= config.alpha
            rejections["ancillary"] += (
                ancillary_test(truth, X, y, variance).p_value <= config.alpha
            )
            if oracle.size > truth.size:
                rejections["naive_f"] += (
                    naive_f_test(truth, oracle, X, y).p_value <= config.alpha
                )
        except ModelConfError as exc:
            failures += 1
            logger.warning(
                "simharness.calibration_failed",
                extra={"replicate": index, "code": exc.error_code},
            )

    completed = max(replicates - failures, 1)
    report = NullCalibrationReport(
        replicates=replicates,
        alpha=config.alpha,
        known_sigma=known,
        rejection_rates={
            label: count / completed for label, count in rejections.items()
        },
        failures=failures,
    )
    for label, values in statistics.items():
        if len(values) >= 2:
            result = stats.kstest(values, "norm")
            report.ks_distance[label] = float(result.statistic)
            report.ks_pvalue[label] = float(result.pvalue)
    return report
