"""Dense symmetric positive-definite factorizations with jitter escalation.

Observation matrices built from smooth kernels become numerically
singular as soon as two points (nearly) coincide, so the Cholesky routine
retries with a ladder of diagonal jitters scaled by the mean diagonal and
records the amount actually used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .errors import FactorizationError

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor of A + jitter * I."""

    matrix: np.ndarray
    lower: np.ndarray
    jitter_used: float

    @property
    def size(self) -> int:
        return self.lower.shape[0]


def cholesky(A: np.ndarray) -> SpdFactor:
    """Factor a symmetric matrix, escalating jitter until it succeeds.

    The input is symmetrized as (A + A^T)/2 first.  Jitter steps are
    {0, 1e-12, 1e-10, 1e-8, 1e-6} times the mean diagonal (falling back
    to absolute values for a zero diagonal).  Raises
    :class:`FactorizationError` if the last rung still fails.
    """
    A = np.asarray(A, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        A = 0.5 * (A + A.T)
    if not np.all(np.isfinite(A)):
        raise FactorizationError(float("inf"), "matrix has non-finite entries")
    n = A.shape[0]
    scale = float(np.mean(np.diag(A))) if n else 0.0
    if not scale > 0:
        scale = 1.0
    last = JITTER_LADDER[-1] * scale
    for rung in JITTER_LADDER:
        jitter = rung * scale
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        # huge pivots can overflow inside LAPACK without raising
        if not np.all(np.isfinite(L)):
            continue
        return SpdFactor(matrix=A, lower=L, jitter_used=jitter)
    raise FactorizationError(last)


def solve(factor: SpdFactor, rhs: np.ndarray) -> np.ndarray:
    """(A + jitter I)^-1 rhs via forward/back substitution."""
    return cho_solve((factor.lower, True), np.asarray(rhs, dtype=float))


def logdet(factor: SpdFactor) -> float:
    """log det(A + jitter I) from the factor diagonal."""
    return 2.0 * float(np.sum(np.log(np.diag(factor.lower))))


def sym_eigenvalues(A: np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetrized input, in descending order."""
    A = np.asarray(A, dtype=float)
    return np.linalg.eigvalsh(0.5 * (A + A.T))[::-1]
