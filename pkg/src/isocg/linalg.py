"""Dense double-precision kernels and SPD test-matrix generators.

Every reduction in this module accumulates in a fixed left-to-right order
(realised with ``np.cumsum``, which is a strict serial prefix sum), so
identical inputs produce bit-identical outputs run after run.  That
reproducibility is what makes fault-injection experiments replayable, and
it outranks raw speed here.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatchError, InvalidSpectrumError

__all__ = [
    "FlopCounter",
    "gemv",
    "dot",
    "axpy",
    "norm2",
    "gen_spd_diag_dominant",
    "gen_spd_spectrum",
]


class FlopCounter:
    """Running count of mathematical flops (a multiply and an add count as two).

    Only matrix-vector products feed the counter: vector operations are
    neglected, matching the 2*n*n per-iteration cost model used by the
    energy analysis.
    """

    __slots__ = ("total",)

    def __init__(self) -> None:
        self.total = 0

    def add(self, flops: int) -> None:
        if flops < 0:
            raise ValueError("flop increments must be non-negative")
        self.total += int(flops)

    def __repr__(self) -> str:
        return f"FlopCounter(total={self.total})"


def as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {a.shape}")
    if a.size == 0:
        raise DimensionMismatchError("vectors must have at least one element")
    return a


def as_matrix(a) -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d matrix, got shape {m.shape}")
    if m.size == 0:
        raise DimensionMismatchError("matrices must have at least one element")
    return m


def as_square_matrix(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
    return m


def gemv(a, v, counter: FlopCounter | None = None) -> np.ndarray:
    """Matrix-vector product with left-to-right row accumulation.

    Advances ``counter`` by 2*rows*cols (2*n*n for square matrices).
    """
    m = as_matrix(a)
    x = as_vector(v)
    if m.shape[1] != x.size:
        raise DimensionMismatchError(
            f"gemv: matrix has {m.shape[1]} columns but vector has length {x.size}"
        )
    if counter is not None:
        counter.add(2 * m.shape[0] * m.shape[1])
    # cumsum is a serial left fold; summing any other way may change low bits.
    return np.cumsum(m * x, axis=1)[:, -1].copy()


def dot(u, v) -> float:
    """Inner product accumulated left to right."""
    a = as_vector(u)
    b = as_vector(v)
    if a.size != b.size:
        raise DimensionMismatchError(f"dot: lengths differ ({a.size} vs {b.size})")
    return float(np.cumsum(a * b)[-1])


def axpy(alpha: float, x, y) -> np.ndarray:
    """Return ``y + alpha * x``."""
    a = as_vector(x)
    b = as_vector(y)
    if a.size != b.size:
        raise DimensionMismatchError(f"axpy: lengths differ ({a.size} vs {b.size})")
    return b + alpha * a


def norm2(v) -> float:
    """Euclidean norm, computed from the fixed-order inner product."""
    a = as_vector(v)
    return math.sqrt(dot(a, a))


def gen_spd_diag_dominant(n: int, seed: int) -> np.ndarray:
    """Random symmetric strictly diagonally dominant matrix (hence SPD).

    Off-diagonal entries are uniform in [0, 1); each diagonal entry is the
    sum of the absolute off-diagonals in its row plus one.  Deterministic
    per (n, seed).
    """
    if n < 1:
        raise ValueError(f"matrix order must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)), 1)
    a = upper + upper.T
    np.fill_diagonal(a, a.sum(axis=1) + 1.0)
    return a


def gen_spd_spectrum(eigenvalues, seed: int) -> np.ndarray:
    """SPD matrix with the prescribed spectrum.

    Builds A = Q^T diag(lambda) Q where Q is the orthogonal factor of a
    seeded Gaussian matrix, i.e. a product of Householder reflections.
    The result is symmetric to machine tolerance and lets experiments
    control the condition number directly.
    """
    eigs = as_vector(eigenvalues)
    if eigs.size < 1:
        raise InvalidSpectrumError("spectrum must contain at least one eigenvalue")
    if not np.all(np.isfinite(eigs)) or np.any(eigs <= 0.0):
        raise InvalidSpectrumError("all eigenvalues must be finite and > 0")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((eigs.size, eigs.size)))
    return q.T @ (eigs[:, None] * q)
