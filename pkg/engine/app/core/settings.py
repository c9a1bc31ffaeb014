from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Library-wide defaults sourced from env or .env file."""

    app_name: str = "modelconf"
    app_version: str = "0.1.0"

    default_alpha: float = Field(default=0.05, validation_alias="MODELCONF_ALPHA")
    default_k: int = Field(default=2, validation_alias="MODELCONF_K")
    default_max_model_size: int = Field(
        default=5, validation_alias="MODELCONF_MAX_MODEL_SIZE"
    )
    default_max_keep: int = Field(default=15, validation_alias="MODELCONF_MAX_KEEP")
    default_gamma_frac: float = Field(
        default=0.6, validation_alias="MODELCONF_GAMMA_FRAC"
    )
    default_seed: int = Field(default=20240101, validation_alias="MODELCONF_SEED")
    split_frac: float = Field(default=0.6, validation_alias="MODELCONF_SPLIT_FRAC")

    # --- reduction ---
    cox_alpha_start: float = Field(
        default=0.05, validation_alias="MODELCONF_COX_ALPHA_START"
    )
    cox_alpha_step: float = Field(
        default=0.001, validation_alias="MODELCONF_COX_ALPHA_STEP"
    )
    lasso_path_points: int = Field(
        default=100, validation_alias="MODELCONF_LASSO_PATH_POINTS"
    )
    lasso_min_ratio: float = Field(
        default=1e-3, validation_alias="MODELCONF_LASSO_MIN_RATIO"
    )
    lasso_tol: float = Field(default=1e-7, validation_alias="MODELCONF_LASSO_TOL")
    lasso_max_iter: int = Field(
        default=10000, validation_alias="MODELCONF_LASSO_MAX_ITER"
    )

    # --- numerics ---
    rank_rtol: float = Field(default=1e-10, validation_alias="MODELCONF_RANK_RTOL")
    projection_floor: float = Field(
        default=1e-12, validation_alias="MODELCONF_PROJECTION_FLOOR"
    )

    # --- execution ---
    workers: int = Field(default=1, validation_alias="MODELCONF_WORKERS")

    log_level: str = "INFO"
    log_directory: str = "logs"
    log_to_file: bool = False
    log_max_bytes: int = 2 * 1024 * 1024
    log_backup_count: int = 5

    model_config = SettingsConfigDict(
        env_file=(".env", "../.env"),
        env_file_encoding="utf-8",
        extra="ignore",
        populate_by_name=True,
    )

    @field_validator("default_alpha")
    @classmethod
    def check_alpha(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("alpha must lie in [0,1]")
        return value

    @field_validator("default_gamma_frac")
    @classmethod
    def check_gamma_frac(cls, value: float) -> float:
        if not 0.5 < value <= 1.0:
            raise ValueError("gamma_frac must lie in (0.5,1]")
        return value

    @field_validator("workers")
    @classmethod
    def check_workers(cls, value: int) -> int:
        return max(int(value), 1)


@lru_cache
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
