"""Co-sufficient pseudo-replicates and their projections onto the sphere.

Given ``y`` and an auxiliary ``n×(k−1)`` standard normal matrix ``L``, the
replicates ``[y L]·Γ`` are independent ``N(µ, kσ²I)`` vectors whose average is
``y`` itself. Projecting each onto the orthogonal complement of a submodel's
column space and normalising gives ``k`` points that are uniform on the
hypersphere when the submodel is adequate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.core.errors import (
    DegenerateProjectionError,
    DimensionMismatchError,
    DomainError,
    InsufficientDataError,
    NumericalError,
)
from app.core.rng import derive_seed, stream
from app.core.settings import settings
from app.services.linalg_core import (
    ComplementBasis,
    complement_basis,
    design_for_columns,
)


@dataclass(frozen=True)
class GammaPlan:
    k: int
    sigma: float
    gamma: np.ndarray
    a: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class ReplicateBundle:
    y_reps: np.ndarray
    noise_seed: int | None
    sigma_used: float
    noise: np.ndarray

    @property
    def k(self) -> int:
        return int(self.y_reps.shape[1])


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.asarray(array, dtype=np.float64)
    array.setflags(write=False)
    return array


def gamma_coefficients(k: int, sigma: float) -> GammaPlan:
    """Build the k×k mixing matrix for ``[y L]``.

    Row 0 is all ones. Row ``i`` (``1 ≤ i < k``) holds ``a_i`` in column
    ``i − 1`` and ``−b_i`` in every later column, so the rows below the first
    sum to zero.
    """

    if int(k) != k or k < 2:
        raise DomainError("k must be an integer >= 2", details={"k": k})
    if not (math.isfinite(sigma) and sigma > 0):
        raise DomainError("sigma must be positive", details={"sigma": sigma})
    k = int(k)
    a_tilde = np.zeros(k - 1)
    b_tilde = np.zeros(k - 1)
    b_sq_sum = 0.0
    for i in range(k - 1):
        radicand = (k - 1) - b_sq_sum
        if radicand <= 0.0:
            raise NumericalError(
                "non-positive radicand in replicate coefficients",
                details={"k": k, "step": i, "radicand": radicand},
            )
        a_tilde[i] = math.sqrt(radicand)
        b_tilde[i] = (1.0 + b_sq_sum) / a_tilde[i]
        b_sq_sum += b_tilde[i] ** 2

    a = sigma * a_tilde
    b = sigma * b_tilde
    gamma = np.zeros((k, k))
    gamma[0, :] = 1.0
    for i in range(1, k):
        gamma[i, i - 1] = a[i - 1]
        gamma[i, i:] = -b[i - 1]
    return GammaPlan(
        k=k, sigma=float(sigma), gamma=_frozen(gamma), a=_frozen(a), b=_frozen(b)
    )


def orientation(y: np.ndarray) -> float:
    """Sign of the largest-magnitude entry of ``y``; ``1.0`` for a zero vector."""

    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    if vector.size == 0:
        return 1.0
    pivot = vector[int(np.argmax(np.abs(vector)))]
    return -1.0 if pivot < 0 else 1.0


def pseudo_replicates(
    y: np.ndarray,
    plan: GammaPlan,
    seed: int | Sequence[int] | None = None,
    *,
    noise: np.ndarray | None = None,
) -> ReplicateBundle:
    """Replicates ``[y L]·Γ`` with ``L`` drawn from ``seed``.

    A key path such as ``(master, replicate, Stream.NOISE)`` is folded into a
    single recorded ``noise_seed`` with :func:`derive_seed`.
    Supplying ``noise`` reuses a previous draw so that two plans can be
    compared on the same randomisation. The draw is multiplied by
    :func:`orientation` of ``y``, so ``c·y`` with ``|c|·σ`` gives ``c`` times the
    replicates for either sign of ``c``.
    """

    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    n = vector.shape[0]
    if n < 1:
        raise DimensionMismatchError("response must be non-empty")
    noise_seed: int | None = None
    if noise is None:
        if seed is None:
            noise_seed = settings.default_seed
        elif isinstance(seed, (int, np.integer)):
            noise_seed = int(seed)
        else:
            noise_seed = derive_seed(*seed)
        noise = stream(noise_seed).standard_normal((n, plan.k - 1))
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (n, plan.k - 1):
        raise DimensionMismatchError(
            "noise matrix must be n×(k−1)",
            details={"expected": [n, plan.k - 1], "got": list(noise.shape)},
        )
    signed = orientation(vector) * noise
    y_reps = np.column_stack([vector, signed]) @ plan.gamma
    return ReplicateBundle(
        y_reps=_frozen(y_reps),
        noise_seed=noise_seed,
        sigma_used=plan.sigma,
        noise=_frozen(noise.copy()),
    )


def q_replicates(bundle: ReplicateBundle, basis: ComplementBasis) -> np.ndarray:
    """Unit vectors ``UᵀỸ⁽ⁱ⁾/‖UᵀỸ⁽ⁱ⁾‖`` as the rows of a ``k×m`` array."""

    if basis.U.shape[0] != bundle.y_reps.shape[0]:
        raise DimensionMismatchError(
            "basis rows must match replicate length",
            details={"basis_rows": basis.U.shape[0], "n": bundle.y_reps.shape[0]},
        )
    projected = (basis.U.T @ bundle.y_reps).T
    norms = np.linalg.norm(projected, axis=1)
    floor = settings.projection_floor
    if np.any(norms <= floor):
        raise DegenerateProjectionError(
            "a projected replicate has zero length",
            details={"min_norm": float(norms.min()), "floor": floor},
        )
    return projected / norms[:, None]


def partition_q_replicates(
    X: np.ndarray,
    y: np.ndarray,
    columns: Sequence[int],
    k: int,
    *,
    intercept: bool = False,
) -> list[np.ndarray]:
    """Unit vectors from ``k`` disjoint consecutive subsamples of size ``⌊n/k⌋``.

    Each subsample is projected onto its own complement basis, so vectors from
    different subsamples live in different spaces and are not compared with
    inner products.
    """

    if int(k) != k or k < 2:
        raise DomainError("k must be an integer >= 2", details={"k": k})
    matrix = np.asarray(X, dtype=np.float64)
    vector = np.asarray(y, dtype=np.float64).reshape(-1)
    n = matrix.shape[0]
    if vector.shape[0] != n:
        raise DimensionMismatchError(
            "response length does not match design rows",
            details={"n": n, "len_y": int(vector.shape[0])},
        )
    block = n // int(k)
    d = len(columns) + int(intercept)
    if block - d < 2:
        raise InsufficientDataError(
            "subsamples too small for the submodel",
            details={"block": block, "d": d, "k": k},
        )
    vectors: list[np.ndarray] = []
    for i in range(int(k)):
        rows = slice(i * block, (i + 1) * block)
        basis = complement_basis(
            design_for_columns(matrix[rows], columns, intercept=intercept)
        )
        projected = basis.U.T @ vector[rows]
        norm = float(np.linalg.norm(projected))
        if norm <= settings.projection_floor:
            raise DegenerateProjectionError(
                "a projected subsample has zero length", details={"block": i}
            )
        vectors.append(projected / norm)
    return vectors
