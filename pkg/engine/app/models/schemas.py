from __future__ import annotations

import math
from typing import Any, Literal, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TestMethod = Literal["cosufficient", "ancillary", "naive_f", "split_f"]
ReducerName = Literal["cox", "lasso"]
VarianceMethod = Literal["rcv", "mrcv", "oracle"]
TailSide = Literal["upper", "lower", "two_sided"]


class ModelSubset(BaseModel):
    """Candidate model: strictly increasing 0-based column positions."""

    indices: tuple[int, ...] = ()
    p_total: int = Field(ge=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_indices(self) -> "ModelSubset":
        previous = -1
        for idx in self.indices:
            if idx <= previous:
                msg = "indices must be strictly increasing (no duplicates)"
                raise ValueError(msg)
            previous = idx
        if self.indices and (self.indices[0] < 0 or self.indices[-1] >= self.p_total):
            msg = f"indices must lie in [0, {self.p_total})"
            raise ValueError(msg)
        return self

    @classmethod
    def of(cls, indices: Sequence[int], p_total: int) -> "ModelSubset":
        return cls(indices=tuple(sorted(int(i) for i in indices)), p_total=p_total)

    @property
    def size(self) -> int:
        return len(self.indices)

    def issubset(self, other: "ModelSubset") -> bool:
        return set(self.indices) <= set(other.indices)

    def names(self, columns: Sequence[str] | None = None) -> list[str]:
        if columns is None:
            return [f"x{idx + 1}" for idx in self.indices]
        return [str(columns[idx]) for idx in self.indices]

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.indices) + "}"


class ReductionResult(BaseModel):
    selected: ModelSubset
    method: ReducerName
    final_alpha: float | None = None
    lambda_chosen: float | None = None
    flags: list[str] = Field(default_factory=list)
    trace: list[dict[str, Any]] = Field(default_factory=list)


class VarianceEstimate(BaseModel):
    sigma2_hat: float = Field(ge=0.0)
    method: VarianceMethod
    df1: int = Field(ge=1)
    df2: int = Field(ge=1)
    half_estimates: tuple[float, float] | None = None
    screen_sets: tuple[ModelSubset, ModelSubset] | None = None
    gamma_frac: float = Field(default=1.0, gt=0.5, le=1.0)
    rows_used: int | None = None

    @property
    def nu(self) -> int:
        return self.df1 + self.df2

    @property
    def sigma_hat(self) -> float:
        return math.sqrt(self.sigma2_hat)


class TestOutcome(BaseModel):
    method: TestMethod
    statistic: float
    p_value: float = Field(ge=0.0, le=1.0)
    null_params: dict[str, float] = Field(default_factory=dict)
    submodel: ModelSubset
    flags: list[str] = Field(default_factory=list)

    __test__ = False

    @field_validator("statistic")
    @classmethod
    def check_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("statistic must be finite")
        return value


class ConfidenceSet(BaseModel):
    accepted: list[ModelSubset] = Field(default_factory=list)
    alpha: float = Field(ge=0.0, le=1.0)
    method: str
    encompassing: ModelSubset
    max_size: int = Field(ge=1)
    n_tested: int = Field(ge=0)
    n_undetermined: int = 0
    p_values: dict[str, float] = Field(default_factory=dict)
    inclusion_freq: dict[int, float] = Field(default_factory=dict)

    def contains(self, model: ModelSubset) -> bool:
        return model in set(self.accepted)

    @property
    def size(self) -> int:
        return len(self.accepted)


class SubstitutionPair(BaseModel):
    missing: int
    substitute: int
    frequency: float


class SummaryReport(BaseModel):
    method: str
    alpha: float
    n_accepted: int
    n_tested: int
    empty: bool = False
    inclusion_freq: dict[int, float] = Field(default_factory=dict)
    top_substitutions: list[SubstitutionPair] = Field(default_factory=list)


class SimulationConfig(BaseModel):
    """One cell of the factorial simulation; field names are the config keys."""

    n: int = Field(default=100, ge=20)
    p: int = Field(default=400, ge=4)
    rho: float = 0.1
    t: float = 1.0
    sigma2: float = Field(default=1.0, ge=0.0)
    replicates: int = Field(default=500, ge=1)
    seed: int = Field(default=20240101, ge=0)
    methods: list[str] = Field(
        default_factory=lambda: ["cosufficient", "ancillary", "naive_f", "split_f"]
    )
    reducers: list[ReducerName] = Field(default_factory=lambda: ["cox", "lasso"])
    k_values: list[int] = Field(default_factory=lambda: [2, 8])
    alpha: float = 0.05
    max_model_size: int = Field(default=5, ge=1)
    max_keep: int = Field(default=15, ge=1)
    gamma_frac: float = 0.6
    split_frac: float = 0.6
    known_sigma: bool = False
    workers: int = Field(default=1, ge=1)

    model_config = ConfigDict(extra="forbid")

    @field_validator("rho")
    @classmethod
    def check_rho(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError("rho must lie in [0,1)")
        return value

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("alpha must lie in (0,1)")
        return value

    @field_validator("gamma_frac")
    @classmethod
    def check_gamma_frac(cls, value: float) -> float:
        if not 0.5 < value <= 1.0:
            raise ValueError("gamma_frac must lie in (0.5,1]")
        return value

    @field_validator("split_frac")
    @classmethod
    def check_split_frac(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("split_frac must lie in (0,1)")
        return value

    @field_validator("methods")
    @classmethod
    def check_methods(cls, value: list[str]) -> list[str]:
        allowed = {"cosufficient", "ancillary", "naive_f", "split_f"}
        unknown = [item for item in value if item not in allowed]
        if unknown:
            raise ValueError(f"unknown methods: {', '.join(unknown)}")
        if not value:
            raise ValueError("methods must not be empty")
        return value

    @field_validator("k_values")
    @classmethod
    def check_k_values(cls, value: list[int]) -> list[int]:
        if any(k < 2 for k in value):
            raise ValueError("every k must be >= 2")
        return value

    @property
    def true_model(self) -> ModelSubset:
        return ModelSubset(indices=(0, 1, 2), p_total=self.p)


class ReplicateResult(BaseModel):
    replicate: int
    method: str
    reducer: str
    survived: bool
    covered: bool
    set_size: int = Field(ge=0)
    seed_used: int
    failed: bool = False
    error: str | None = None
    n_undetermined: int = 0

    @model_validator(mode="after")
    def check_implication(self) -> "ReplicateResult":
        if self.covered and not self.survived:
            raise ValueError("covered implies survived")
        return self


class ExperimentRow(BaseModel):
    method: str
    reducer: str
    coverage: float
    coverage_se: float | None
    survival: float
    survival_se: float | None
    mean_size: float
    size_se: float | None
    failures: int = 0


class ExperimentTable(BaseModel):
    rows: list[ExperimentRow] = Field(default_factory=list)
    factors: dict[str, float] = Field(default_factory=dict)
    replicates: int = 0
    results: list[ReplicateResult] = Field(default_factory=list)

    def row(self, method: str, reducer: str) -> ExperimentRow:
        for item in self.rows:
            if item.method == method and item.reducer == reducer:
                return item
        raise KeyError(f"{method}/{reducer}")


class AnalysisRequest(BaseModel):
    data_path: str
    response_column: str = "y"
    alpha: float = Field(default=0.05, ge=0.0, le=1.0)
    method: TestMethod = "cosufficient"
    k: int = Field(default=2, ge=2)
    max_model_size: int = Field(default=5, ge=1)
    max_keep: int = Field(default=15, ge=1)
    reducer: ReducerName = "cox"
    gamma_frac: float = Field(default=0.6, gt=0.5, le=1.0)
    split_frac: float = Field(default=0.6, gt=0.0, lt=1.0)
    seed: int = Field(default=20240101, ge=0)
    intercept: bool = True
    log_response: bool = False
    tail: TailSide = "upper"
    shuffle_halves: bool = False
    stability_repeats: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    output_path: str = "modelconf_out"


class NullCalibrationReport(BaseModel):
    """Rejection rates of the true model when the reduction cannot fail."""

    replicates: int
    alpha: float
    known_sigma: bool
    rejection_rates: dict[str, float] = Field(default_factory=dict)
    ks_distance: dict[str, float] = Field(default_factory=dict)
    ks_pvalue: dict[str, float] = Field(default_factory=dict)
    failures: int = 0


class EffectRow(BaseModel):
    method: str
    reducer: str
    coverage_effects: dict[str, float | None] = Field(default_factory=dict)
    size_effects: dict[str, float | None] = Field(default_factory=dict)


class EffectsTable(BaseModel):
    factors: list[str] = Field(default_factory=list)
    rows: list[EffectRow] = Field(default_factory=list)

    def row(self, method: str, reducer: str) -> EffectRow:
        for item in self.rows:
            if item.method == method and item.reducer == reducer:
                return item
        raise KeyError(f"{method}/{reducer}")
