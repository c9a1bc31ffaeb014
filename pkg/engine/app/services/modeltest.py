"""Tests of a single submodel against the data.

Four procedures share one interface, each returning a :class:`TestOutcome`:

* ``cosufficient_test``: Rayleigh test of uniformity of the projected
  pseudo-replicates on the co-sufficient sphere.
* ``ancillary_test``: residual sum of squares over σ̂², against χ²_{n−d}.
* ``naive_f_test``: F comparison with the encompassing model on all rows,
  ignoring the selection step.
* ``split_f_test``: the same comparison on held-out rows, after reducing on
  the training rows.

``make_tester`` binds one of them to the shared per-dataset state (variance
estimate, replicate bundle, encompassing set) for the confidence-set sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from app.core.errors import (
    DimensionMismatchError,
    DomainError,
    InsufficientDataError,
    NotNestedError,
)
from app.core.settings import settings
from app.models.schemas import (
    ModelSubset,
    TailSide,
    TestMethod,
    TestOutcome,
    VarianceEstimate,
)
from app.services import dist
from app.services.linalg_core import (
    ComplementBasis,
    complement_basis,
    design_for_columns,
    f_statistic,
    ols_fit,
)
from app.services.randomize import (
    ReplicateBundle,
    gamma_coefficients,
    pseudo_replicates,
    q_replicates,
)
from app.services.reduce import Reducer, split_indices

RayleighScaling = Literal["exact", "asymptotic"]

NOT_NESTED_IN_TRAIN = "not_nested_in_encompassing"


@dataclass(frozen=True)
class DepartureDiagnostic:
    mean_direction: np.ndarray
    kappa: float


def rayleigh_statistic(
    q_reps: np.ndarray, m: int, scaling: RayleighScaling = "exact"
) -> float:
    """Scaled sum of pairwise inner products of ``k`` unit vectors in ``R^m``.

    ``exact`` divides by the null standard deviation ``√(k(k−1)/(2m))`` so the
    statistic has unit variance for every ``k``. ``asymptotic`` uses the
    ``√(2m)/k`` factor, whose null variance is ``(k−1)/k``; it is the
    published form of the statistic, e.g. two identical unit vectors in
    ``R^98`` give 7 there and ``√98`` under ``exact``.
    """

    vectors = np.asarray(q_reps, dtype=np.float64)
    if vectors.ndim != 2:
        raise DimensionMismatchError("q_reps must be a k×m array")
    k = vectors.shape[0]
    if k < 2:
        raise DomainError("need at least two replicates", details={"k": k})
    if vectors.shape[1] != m:
        raise DimensionMismatchError(
            "vector length does not match m",
            details={"m": m, "len": int(vectors.shape[1])},
        )
    gram = vectors @ vectors.T
    pair_sum = 0.5 * (gram.sum() - np.trace(gram))
    if scaling == "asymptotic":
        factor = math.sqrt(2.0 * m) / k
    else:
        factor = math.sqrt(2.0 * m / (k * (k - 1)))
    return float(factor * pair_sum)


def _check_residual_df(n: int, d: int) -> None:
    if n - d < 2:
        raise InsufficientDataError(
            "submodel leaves fewer than two residual degrees of freedom",
            details={"n": n, "d": d},
        )


def _check_sigma(variance: VarianceEstimate) -> None:
    if not variance.sigma2_hat > 0:
        raise DomainError(
            "variance estimate must be positive",
            details={"sigma2_hat": variance.sigma2_hat, "method": variance.method},
        )


def cosufficient_test(
    submodel: ModelSubset,
    X: np.ndarray,
    y: np.ndarray,
    k: int,
    variance: VarianceEstimate,
    bundle: ReplicateBundle | None = None,
    seed: int | Sequence[int] | None = None,
    *,
    intercept: bool = False,
    scaling: RayleighScaling = "exact",
) -> TestOutcome:
    """Upper-tail normal p-value of the Rayleigh statistic for ``submodel``.

    A shared ``bundle`` keeps every submodel on the same randomisation; without
    one, replicates are drawn from ``seed``.
    """

    matrix = np.asarray(X, dtype=np.float64)
    n = matrix.shape[0]
    _check_residual_df(n, submodel.size + int(intercept))
    _check_sigma(variance)
    if bundle is None:
        plan = gamma_coefficients(k, variance.sigma_hat)
        bundle = pseudo_replicates(y, plan, seed)
    elif bundle.k != k:
        raise DimensionMismatchError(
            "bundle replicate count differs from k",
            details={"k": k, "bundle": bundle.k},
        )
    basis = complement_basis(
        design_for_columns(matrix, submodel.indices, intercept=intercept)
    )
    q = q_replicates(bundle, basis)
    statistic = rayleigh_statistic(q, basis.dim, scaling)
    return TestOutcome(
        method="cosufficient",
        statistic=statistic,
        p_value=float(dist.normal_sf(statistic)),
        null_params={"k": float(k), "m": float(basis.dim)},
        submodel=submodel,
    )


def ancillary_test(
    submodel: ModelSubset,
    X: np.ndarray,
    y: np.ndarray,
    variance: VarianceEstimate,
    *,
    intercept: bool = False,
    tail: TailSide = "upper",
) -> TestOutcome:
    matrix = np.asarray(X, dtype=np.float64)
    n = matrix.shape[0]
    _check_residual_df(n, submodel.size + int(intercept))
    _check_sigma(variance)
    design = design_for_columns(matrix, submodel.indices, intercept=intercept)
    fit = ols_fit(design, y)
    statistic = fit.rss / variance.sigma2_hat
    df = fit.df_resid
    if tail == "upper":
        p_value = float(dist.chi2_sf(statistic, df))
    elif tail == "lower":
        p_value = float(dist.chi2_cdf(statistic, df))
    else:
        lower = float(dist.chi2_cdf(statistic, df))
        p_value = min(1.0, 2.0 * min(lower, 1.0 - lower))
    return TestOutcome(
        method="ancillary",
        statistic=statistic,
        p_value=p_value,
        null_params={"df": float(df)},
        submodel=submodel,
        flags=[] if tail == "upper" else [f"tail={tail}"],
    )


def _f_outcome(
    method: TestMethod,
    submodel: ModelSubset,
    encompassing: ModelSubset,
    X: np.ndarray,
    y: np.ndarray,
    intercept: bool,
) -> TestOutcome:
    if not submodel.issubset(encompassing):
        raise NotNestedError(
            "submodel is not contained in the encompassing set",
            details={"submodel": str(submodel), "encompassing": str(encompassing)},
        )
    sub = design_for_columns(X, submodel.indices, intercept=intercept)
    full = design_for_columns(X, encompassing.indices, intercept=intercept)
    F, df1, df2, p_value = f_statistic(sub, full, y)
    return TestOutcome(
        method=method,
        statistic=F,
        p_value=p_value,
        null_params={"df1": float(df1), "df2": float(df2)},
        submodel=submodel,
    )


def naive_f_test(
    submodel: ModelSubset,
    encompassing: ModelSubset,
    X: np.ndarray,
    y: np.ndarray,
    *,
    intercept: bool = False,
) -> TestOutcome:
    matrix = np.asarray(X, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    return _f_outcome("naive_f", submodel, encompassing, matrix, vector, intercept)


def split_f_test(
    submodel: ModelSubset,
    X: np.ndarray,
    y: np.ndarray,
    frac: float | None = None,
    reducer: Reducer | None = None,
    *,
    encompassing_train: ModelSubset | None = None,
    intercept: bool = False,
) -> TestOutcome:
    """F test on the held-out rows against the set reduced on the training rows.

    Pass ``encompassing_train`` to reuse a reduction already run on the training
    split. A submodel outside that set is rejected with ``p = 0`` and a flag.
    """

    frac = frac if frac is not None else settings.split_frac
    matrix = np.asarray(X, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    train, test = split_indices(matrix.shape[0], frac)
    if encompassing_train is None:
        if reducer is None:
            raise DomainError("split_f_test needs a reducer or a training reduction")
        encompassing_train = reducer(matrix[train], vector[train]).selected
    if not submodel.issubset(encompassing_train):
        return TestOutcome(
            method="split_f",
            statistic=0.0,
            p_value=0.0,
            submodel=submodel,
            flags=[NOT_NESTED_IN_TRAIN],
        )
    return _f_outcome(
        "split_f", submodel, encompassing_train, matrix[test], vector[test], intercept
    )


def vmf_departure(
    basis: ComplementBasis, Z: np.ndarray, lam: np.ndarray, sigma: float
) -> DepartureDiagnostic:
    """Mean direction and concentration of the projected replicates under ``Zλ``.

    ``κ = (n − d)·‖UᵀZλ‖ / (σ√2)``; zero when ``Zλ`` lies in the column span of
    the submodel, with a zero mean direction.
    """

    if not sigma > 0:
        raise DomainError("sigma must be positive", details={"sigma": sigma})
    omitted = np.asarray(Z, dtype=np.float64)
    if omitted.ndim == 1:
        omitted = omitted[:, None]
    weights = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    if omitted.shape[0] != basis.U.shape[0] or omitted.shape[1] != weights.shape[0]:
        raise DimensionMismatchError(
            "Z and lambda do not conform with the basis",
            details={"Z": list(omitted.shape), "lambda": int(weights.shape[0])},
        )
    shift = omitted @ weights
    projected = basis.U.T @ shift
    norm = float(np.linalg.norm(projected))
    if norm <= settings.projection_floor * (1.0 + float(np.linalg.norm(shift))):
        return DepartureDiagnostic(np.zeros(basis.dim), 0.0)
    kappa = basis.dim * norm / (sigma * math.sqrt(2.0))
    return DepartureDiagnostic(projected / norm, kappa)


def vmf_partition_departures(
    X: np.ndarray,
    Z: np.ndarray,
    lam: np.ndarray,
    sigma: float,
    k: int,
    *,
    intercept: bool = False,
) -> list[DepartureDiagnostic]:
    """One departure diagnostic per consecutive subsample of size ``⌊n/k⌋``."""

    if int(k) != k or k < 2:
        raise DomainError("k must be an integer >= 2", details={"k": k})
    matrix = np.asarray(X, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    omitted = np.asarray(Z, dtype=np.float64)
    if omitted.ndim == 1:
        omitted = omitted[:, None]
    block = matrix.shape[0] // int(k)
    if block - matrix.shape[1] - int(intercept) < 1:
        raise InsufficientDataError(
            "subsamples too small for the design",
            details={"block": block, "d": matrix.shape[1] + int(intercept)},
        )
    columns = list(range(matrix.shape[1]))
    diagnostics = []
    for i in range(int(k)):
        rows = slice(i * block, (i + 1) * block)
        basis = complement_basis(
            design_for_columns(matrix[rows], columns, intercept=intercept)
        )
        diagnostics.append(vmf_departure(basis, omitted[rows], lam, sigma))
    return diagnostics


@dataclass(frozen=True)
class BoundTester:
    """A test procedure bound to the per-dataset state shared by all submodels.

    Instances are picklable so chunked sweeps can ship them to worker
    processes.
    """

    method: TestMethod
    k: int = 2
    variance: VarianceEstimate | None = None
    bundle: ReplicateBundle | None = None
    encompassing: ModelSubset | None = None
    split_frac: float = 0.6
    intercept: bool = False
    tail: TailSide = "upper"
    scaling: RayleighScaling = "exact"

    def __call__(
        self, submodel: ModelSubset, X: np.ndarray, y: np.ndarray
    ) -> TestOutcome:
        if self.method == "cosufficient":
            return cosufficient_test(
                submodel,
                X,
                y,
                self.k,
                self._variance(),
                self.bundle,
                intercept=self.intercept,
                scaling=self.scaling,
            )
        if self.method == "ancillary":
            return ancillary_test(
                submodel,
                X,
                y,
                self._variance(),
                intercept=self.intercept,
                tail=self.tail,
            )
        if self.method == "naive_f":
            return naive_f_test(
                submodel, self._encompassing(), X, y, intercept=self.intercept
            )
        return split_f_test(
            submodel,
            X,
            y,
            self.split_frac,
            encompassing_train=self._encompassing(),
            intercept=self.intercept,
        )

    def _variance(self) -> VarianceEstimate:
        if self.variance is None:
            raise DomainError(f"{self.method} test needs a variance estimate")
        return self.variance

    def _encompassing(self) -> ModelSubset:
        if self.encompassing is None:
            raise DomainError(f"{self.method} test needs an encompassing set")
        return self.encompassing


def make_tester(
    method: TestMethod,
    *,
    y: np.ndarray | None = None,
    k: int = 2,
    variance: VarianceEstimate | None = None,
    encompassing: ModelSubset | None = None,
    noise_seed: int | Sequence[int] | None = None,
    split_frac: float | None = None,
    intercept: bool = False,
    tail: TailSide = "upper",
    scaling: RayleighScaling = "exact",
) -> BoundTester:
    """Bind ``method`` to shared state, drawing the replicate bundle once for ``y``.

    For ``split_f`` the ``encompassing`` argument is the set reduced on the
    training rows.
    """

    bundle = None
    if method == "cosufficient":
        if variance is None or y is None:
            raise DomainError("cosufficient tester needs y and a variance estimate")
        _check_sigma(variance)
        plan = gamma_coefficients(k, variance.sigma_hat)
        bundle = pseudo_replicates(y, plan, noise_seed)
    return BoundTester(
        method=method,
        k=k,
        variance=variance,
        bundle=bundle,
        encompassing=encompassing,
        split_frac=split_frac if split_frac is not None else settings.split_frac,
        intercept=intercept,
        tail=tail,
        scaling=scaling,
    )
