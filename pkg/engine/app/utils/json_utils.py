from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

import numpy as np


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Enum):
        return value.value
    model_dump = getattr(value, "model_dump", None)
    if callable(model_dump):
        return model_dump(mode="json")
    return str(value)


def json_dumps(value: Any, **kwargs: Any) -> str:
    """`json.dumps` with defaults for numpy values and pydantic models."""

    kwargs.setdefault("ensure_ascii", False)
    kwargs.setdefault("default", _json_default)
    return json.dumps(value, **kwargs)


def write_json(path: Path, value: Any) -> None:
    path.write_text(json_dumps(value, indent=2, sort_keys=True) + "\n", "utf-8")


def write_jsonl(path: Path, records: Iterable[Any]) -> int:
    """Write one JSON document per line; returns the number of lines."""

    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json_dumps(record, sort_keys=True))
            handle.write("\n")
            count += 1
    return count
