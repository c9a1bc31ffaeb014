from __future__ import annotations

import hashlib
from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Purpose ids keying independent sub-streams of one master seed."""

    DATA = 0
    GRID = 1
    NOISE = 2
    VARIANCE = 3
    STABILITY = 4


def stream(*keys: int) -> np.random.Generator:
    """Counter-based generator for the given key path.

    ``stream(seed)``, ``stream(seed, replicate)`` and
    ``stream(seed, replicate, Stream.NOISE)`` are mutually independent and
    reproducible across processes.
    """

    entropy = [int(k) for k in keys]
    if any(k < 0 for k in entropy):
        raise ValueError("seed keys must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(*keys: int) -> int:
    """Stable 63-bit integer seed derived from a key path, for manifests."""

    payload = "/".join(str(int(k)) for k in keys).encode("utf-8")
    digest = hashlib.sha256(payload).hexdigest()
    return int(digest[:16], 16) >> 1


def method_key(name: str) -> int:
    """Deterministic integer id for a method label (e.g. ``cosufficient_k8``)."""

    digest = hashlib.sha256(name.encode("utf-8")).hexdigest()
    return int(digest[:8], 16)
