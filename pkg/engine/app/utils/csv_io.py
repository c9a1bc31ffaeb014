"""Strict CSV input and byte-stable CSV output.

Design files need a header row, a response column and numeric, finite
covariates; anything else is an :class:`InputFormatError` naming the
offending line (the header is line 1) or column. Result files are written with
a fixed column order and ``%.6f`` floats so reruns compare byte for byte.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from app.core.errors import InputFormatError
from app.models.schemas import ExperimentRow, ReplicateResult

RESULT_COLUMNS = [
    "method",
    "reducer",
    "coverage",
    "coverage_se",
    "survival",
    "survival_se",
    "mean_size",
    "size_se",
]
REPLICATE_COLUMNS = [
    "replicate",
    "method",
    "reducer",
    "survived",
    "covered",
    "set_size",
    "failed",
    "n_undetermined",
    "seed_used",
]
FLOAT_FORMAT = "%.6f"


def _read_frame(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as exc:
        raise InputFormatError(
            f"file not found: {path}", details={"path": str(path)}
        ) from exc
    except pd.errors.EmptyDataError as exc:
        raise InputFormatError(
            f"{path}: file is empty", details={"path": str(path)}
        ) from exc
    except pd.errors.ParserError as exc:
        raise InputFormatError(
            f"{path}: {exc}".strip(), details={"path": str(path)}
        ) from exc


def _numeric_column(frame: pd.DataFrame, column: str, path: Path) -> np.ndarray:
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0])
        line = row + 2
        raise InputFormatError(
            f"{path}: line {line}: column {column!r} has non-numeric or "
            f"non-finite value {frame[column].iloc[row]!r}",
            details={"path": str(path), "line": line, "column": column},
        )
    return values


def read_design_csv(
    path: str | Path, response_column: str = "y"
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Covariate matrix, response and covariate names, in file order."""

    path = Path(path)
    frame = _read_frame(path)
    columns = [str(column).strip() for column in frame.columns]
    frame.columns = columns
    if response_column not in columns:
        raise InputFormatError(
            f"{path}: response column {response_column!r} not found",
            details={"path": str(path), "column": response_column},
            suggestion="Name the response column with --response-column.",
        )
    names = [column for column in columns if column != response_column]
    if not names:
        raise InputFormatError(
            f"{path}: no covariate columns", details={"path": str(path)}
        )
    if frame.empty:
        raise InputFormatError(f"{path}: no data rows", details={"path": str(path)})
    y = _numeric_column(frame, response_column, path)
    X = np.column_stack([_numeric_column(frame, name, path) for name in names])
    return X, y, names


def write_design_csv(
    path: str | Path, X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None
) -> None:
    names = list(names or [f"x{j + 1}" for j in range(X.shape[1])])
    frame = pd.DataFrame(np.asarray(X), columns=names)
    frame.insert(0, "y", np.asarray(y))
    frame.to_csv(path, index=False, float_format="%.10g")


def write_results_csv(path: str | Path, rows: Sequence[ExperimentRow]) -> None:
    frame = pd.DataFrame(
        [row.model_dump(include=set(RESULT_COLUMNS)) for row in rows],
        columns=RESULT_COLUMNS,
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")


def _optional(value: str) -> float | None:
    value = value.strip()
    return None if value == "" else float(value)


def read_results_csv(path: str | Path) -> list[ExperimentRow]:
    path = Path(path)
    frame = _read_frame(path)
    columns = [str(column).strip() for column in frame.columns]
    if columns != RESULT_COLUMNS:
        raise InputFormatError(
            f"{path}: unexpected columns",
            details={"expected": RESULT_COLUMNS, "found": columns},
        )
    if frame.empty:
        raise InputFormatError(f"{path}: no result rows", details={"path": str(path)})
    rows = []
    for offset, record in enumerate(frame.to_dict(orient="records")):
        try:
            rows.append(
                ExperimentRow(
                    method=record["method"],
                    reducer=record["reducer"],
                    coverage=float(record["coverage"]),
                    coverage_se=_optional(record["coverage_se"]),
                    survival=float(record["survival"]),
                    survival_se=_optional(record["survival_se"]),
                    mean_size=float(record["mean_size"]),
                    size_se=_optional(record["size_se"]),
                )
            )
        except ValueError as exc:
            line = offset + 2
            raise InputFormatError(
                f"{path}: line {line}: {exc}",
                details={"path": str(path), "line": line},
            ) from exc
        if not all(
            math.isfinite(value)
            for value in (rows[-1].coverage, rows[-1].survival, rows[-1].mean_size)
        ):
            raise InputFormatError(
                f"{path}: line {offset + 2}: non-finite value",
                details={"path": str(path), "line": offset + 2},
            )
    return rows


def write_replicates_csv(path: str | Path, results: Sequence[ReplicateResult]) -> None:
    frame = pd.DataFrame(
        [result.model_dump(include=set(REPLICATE_COLUMNS)) for result in results],
        columns=REPLICATE_COLUMNS,
    )
    for column in ("survived", "covered", "failed"):
        frame[column] = frame[column].astype(int)
    frame.to_csv(path, index=False)


def read_replicates_csv(path: str | Path) -> list[ReplicateResult]:
    path = Path(path)
    frame = _read_frame(path)
    missing = [column for column in REPLICATE_COLUMNS if column not in frame.columns]
    if missing:
        raise InputFormatError(
            f"{path}: missing columns {', '.join(missing)}",
            details={"path": str(path), "missing": missing},
        )
    results = []
    for offset, record in enumerate(frame.to_dict(orient="records")):
        try:
            results.append(
                ReplicateResult(
                    replicate=int(record["replicate"]),
                    method=record["method"],
                    reducer=record["reducer"],
                    survived=bool(int(record["survived"])),
                    covered=bool(int(record["covered"])),
                    set_size=int(record["set_size"]),
                    failed=bool(int(record["failed"])),
                    n_undetermined=int(record["n_undetermined"]),
                    seed_used=int(record["seed_used"]),
                )
            )
        except ValueError as exc:
            line = offset + 2
            raise InputFormatError(
                f"{path}: line {line}: {exc}",
                details={"path": str(path), "line": line},
            ) from exc
    return results
