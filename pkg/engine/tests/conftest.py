from __future__ import annotations

# ruff: noqa: E402
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parents[2]
ENGINE_DIR = PROJECT_ROOT / "engine"
for path in (PROJECT_ROOT, ENGINE_DIR):
    if str(path) not in sys.path:
        sys.path.insert(0, str(path))

import numpy as np
import pytest
from app.core.settings import settings
from app.models.schemas import SimulationConfig
from app.services.simharness import generate_dataset


@pytest.fixture(autouse=True)
def deterministic_settings():
    """Run every test in-process with quiet logging and restore overrides."""

    snapshot = settings.model_dump()
    settings.log_level = "WARNING"
    settings.log_to_file = False
    settings.workers = 1
    yield settings
    for key, value in snapshot.items():
        setattr(settings, key, value)


@pytest.fixture()
def small_config() -> SimulationConfig:
    return SimulationConfig(
        n=40,
        p=16,
        rho=0.1,
        t=1.0,
        replicates=3,
        k_values=[2],
        max_model_size=2,
        max_keep=6,
    )


@pytest.fixture()
def toeplitz_data(small_config):
    return generate_dataset(small_config, 0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
