"""Dense matrix helpers and the three matrix norms used by the capacity bounds.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  The helpers
here validate shapes and finiteness at the boundary so the rest of the
package can assume well-formed inputs.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "ShapeError",
    "SpectralNormError",
    "as_matrix",
    "as_vector",
    "frobenius_norm",
    "one_norm",
    "spectral_norm",
    "matvec",
    "matmul",
    "add",
    "sub",
    "scale",
    "make_rng",
    "stream_rng",
]

SPECTRAL_TOL = 1e-10
SPECTRAL_MAX_ITER = 1000


class ShapeError(ValueError):
    """Operands do not conform."""


class SpectralNormError(RuntimeError):
    """Power iteration did not converge.

    Attributes
    ----------
    estimate : float
        Last singular value estimate.
    gap : float
        Difference between the last two estimates.
    iterations : int
        Total iterations performed, restarts included.
    """

    def __init__(self, estimate: float, gap: float, iterations: int):
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(estimate={estimate:.6g}, gap={gap:.3g})"
        )
        self.estimate = estimate
        self.gap = gap
        self.iterations = iterations


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_vector(v, name: str = "vector") -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def frobenius_norm(m) -> float:
    a = as_matrix(m)
    return float(np.sqrt(np.sum(a * a)))


def one_norm(m) -> float:
    """Maximum absolute column sum."""
    a = as_matrix(m)
    return float(np.max(np.sum(np.abs(a), axis=0)))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for work item ``key`` under ``seed``.

    Streams depend only on ``(seed, key)``, never on the order in which
    they are requested, so serial and parallel runs draw identical numbers.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _power_iterate(gram: np.ndarray, v: np.ndarray, tol: float, max_iter: int):
    prev = None
    est = 0.0
    gap = np.inf
    for it in range(1, max_iter + 1):
        w = gram @ v
        rq = float(v @ w)
        est = np.sqrt(max(rq, 0.0))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v lies in the null space; the estimate 0 is exact only if gram == 0
            return est, 0.0, it, nw
        v = w / nw
        if prev is not None:
            gap = abs(est - prev)
            if gap < tol:
                return est, gap, it, nw
        prev = est
    return est, gap, max_iter, None


def spectral_norm(
    m,
    tol: float = SPECTRAL_TOL,
    max_iter: int = SPECTRAL_MAX_ITER,
    seed: int = 0,
) -> float:
    """Largest singular value by power iteration on ``m.T @ m``.

    Starts from a seeded random unit vector and stops when successive
    square roots of the Rayleigh quotient differ by less than ``tol``.  On
    stagnation a single restart from a fresh seeded vector is attempted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    a = as_matrix(m)
    if not np.any(a):
        return 0.0
    gram = a.T @ a
    total = 0
    est, gap = 0.0, np.inf
    for attempt in range(2):
        rng = stream_rng(seed, attempt)
        v = rng.standard_normal(a.shape[1])
        v /= np.linalg.norm(v)
        est, gap, used, nw = _power_iterate(gram, v, tol, max_iter)
        total += used
        if nw is not None and nw > 0.0:
            return float(est)
    raise SpectralNormError(float(est), float(gap), total)


def _finite(r: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(r)):
        raise ValueError("operation produced non-finite entries")
    return r


def matvec(m, v) -> np.ndarray:
    a = as_matrix(m)
    x = as_vector(v)
    if a.shape[1] != x.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by vector of length {x.shape[0]}")
    return _finite(a @ x)


def matmul(a, b) -> np.ndarray:
    x, y = as_matrix(a), as_matrix(b)
    if x.shape[1] != y.shape[0]:
        raise ShapeError(f"cannot multiply {x.shape} by {y.shape}")
    return _finite(x @ y)


def add(a, b) -> np.ndarray:
    x, y = as_matrix(a), as_matrix(b)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {y.shape}")
    return _finite(x + y)


def sub(a, b) -> np.ndarray:
    x, y = as_matrix(a), as_matrix(b)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {y.shape}")
    return _finite(x - y)


def scale(a, c: float) -> np.ndarray:
    c = float(c)
    if not math.isfinite(c):
        raise ValueError("scale factor must be finite")
    return _finite(as_matrix(a) * c)
