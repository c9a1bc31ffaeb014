from __future__ import annotations

# ruff: noqa: E402
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parents[2]
ENGINE_DIR = PROJECT_ROOT / "engine"
for path in (PROJECT_ROOT, ENGINE_DIR):
    if str(path) not in sys.path:
        sys.path.insert(0, str(path))

import pytest
from app.cli_config import load_config
from app.core.settings import settings
from app.models.schemas import ExperimentTable
from app.services.simharness import ExperimentRunner

CONFIG_DIR = PROJECT_ROOT / "configs"


def pytest_collection_modifyitems(items):
    for item in items:
        item.add_marker(pytest.mark.acceptance)


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    previous = settings.log_level
    settings.log_level = "WARNING"
    yield
    settings.log_level = previous


def _run(name: str) -> ExperimentTable:
    config, _ = load_config(CONFIG_DIR / name)
    return ExperimentRunner(config).run()


@pytest.fixture(scope="session")
def table3() -> ExperimentTable:
    return _run("table3_desk.cfg")


@pytest.fixture(scope="session")
def table5() -> ExperimentTable:
    return _run("table5_desk.cfg")
