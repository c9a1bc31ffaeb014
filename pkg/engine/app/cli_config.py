"""Flat ``key = value`` simulation configs.

Keys are the field names of :class:`SimulationConfig`. Blank lines and lines
starting with ``#`` are ignored, list fields take comma-separated values and
booleans accept ``true``/``false``/``1``/``0``. Parsing is strict: unknown or
repeated keys and out-of-domain values raise :class:`ConfigError`.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from app.core.errors import ConfigError
from app.models.schemas import SimulationConfig

LIST_FIELDS = {"methods", "reducers", "k_values"}


def content_hash(data: bytes) -> str:
    """Git blob id of ``data``, so manifests can be matched against a checkout."""

    header = f"blob {len(data)}\0".encode("ascii")
    return hashlib.sha1(header + data).hexdigest()


def parse_config_text(text: str, source: str = "<config>") -> SimulationConfig:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.split(" #", 1)[0].strip()
        if not sep or not key:
            raise ConfigError(
                f"{source}: line {lineno}: expected 'key = value'",
                details={"line": lineno, "text": raw},
            )
        if key not in SimulationConfig.model_fields:
            raise ConfigError(
                f"{source}: line {lineno}: unknown key {key!r}",
                details={"line": lineno, "key": key},
                suggestion="Keys are the SimulationConfig field names.",
            )
        if key in values:
            raise ConfigError(
                f"{source}: line {lineno}: duplicate key {key!r}",
                details={"line": lineno, "key": key},
            )
        if key in LIST_FIELDS:
            values[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            values[key] = value

    try:
        return SimulationConfig.model_validate(values)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        message = str(first["msg"]).removeprefix("Value error, ")
        raise ConfigError(
            f"{source}: {field}: {message}",
            details={"field": field, "errors": len(exc.errors())},
        ) from exc


def load_config(path: str | Path) -> tuple[SimulationConfig, str]:
    """Parsed config and the content hash of the file bytes."""

    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(
            f"cannot read config {path}: {exc.strerror}", details={"path": str(path)}
        ) from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(
            f"{path}: config is not UTF-8", details={"path": str(path)}
        ) from exc
    return parse_config_text(text, str(path)), content_hash(data)
