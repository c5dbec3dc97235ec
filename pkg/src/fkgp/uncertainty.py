"""Uncertainty quantification: integrated posterior variance and its bounds.

Three a-priori quantities complement the measured integrated mean squared
error (IMSE) of a fitted posterior:

* a spectral lower bound ``r_min * sum_p lam_p / (r_min + N M lam_p)``
  built from the eigenvalues of the kernel integral operator under the
  slice measure, estimated here by the sampled-Gram (Nystrom) method;
* a Chebyshev-type bound on the probability that the minimum sample
  variance misses the true minimum noise level by more than epsilon;
* a conservative witness constant ``C`` with ``L >= C / (N M)`` over a
  grid of (N, M) pairs.

The spectral bound is asymptotic in N; at small N it can exceed the
measured IMSE, which is expected and reported, never corrected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import SeedSequence, default_rng

from .kernels import KernelSpec, gram_matrix
from .linalg import sym_eigenvalues
from .problems import QueryDomain
from .regression import GpPosterior
from .sampling import FkEnsemble

# relative floor used when the minimum sample variance is exactly zero
_RMIN_FLOOR = 1e-12


@dataclass(frozen=True)
class EigenEstimate:
    """Estimated integral-operator spectrum under the slice measure."""

    eigenvalues: np.ndarray
    sample_count: int
    measure: str

    def __post_init__(self):
        object.__setattr__(
            self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float)
        )


@dataclass(frozen=True)
class UncertaintyReport:
    """Everything the method can say about its own error, in one record."""

    imse: float
    l_imse: float
    r_min_estimate: float
    chebyshev_bound: float
    chebyshev_epsilon: float
    chebyshev_delta: float
    conservative_constant_check: bool
    conservative_constant: float
    eigenvalue_count: int = 0

    def to_dict(self) -> dict:
        return {
            "imse": self.imse,
            "l_imse": self.l_imse,
            "r_min_estimate": self.r_min_estimate,
            "chebyshev_bound": self.chebyshev_bound,
            "chebyshev_epsilon": self.chebyshev_epsilon,
            "chebyshev_delta": self.chebyshev_delta,
            "conservative_constant_check": self.conservative_constant_check,
            "conservative_constant": self.conservative_constant,
            "eigenvalue_count": self.eigenvalue_count,
        }


def imse(post: GpPosterior, domain: QueryDomain, quad_points: int = 200) -> float:
    """Posterior variance integrated over the slice (normalized measure).

    Trapezoidal quadrature on ``quad_points`` equally spaced nodes; exact
    for the constant prior variance, so an empty posterior returns the
    amplitude itself.
    """
    if quad_points < 2:
        raise ValueError(f"quad_points must be >= 2, got {quad_points}")
    coords = domain.coordinates(quad_points)
    var = post.variance(domain.embed(coords))
    return float(np.trapezoid(var, coords) / domain.width)


def estimate_eigenvalues(
    spec,
    domain: QueryDomain,
    S: int = 200,
    seed: int = 0,
) -> EigenEstimate:
    """Sampled-Gram estimate of the kernel operator spectrum.

    Draws S points i.i.d. from the uniform measure on the slice, forms
    the S x S Gram matrix and divides its eigenvalues by S.  Estimates
    are clamped at zero and sorted descending; their sum equals the mean
    prior variance (the amplitude for a stationary kernel) by the trace
    identity.

    ``spec`` is a :class:`KernelSpec`, or any batched two-point callable
    ``k(x, y)`` for non-Matern covariances.
    """
    if S < 2:
        raise ValueError(f"S must be >= 2, got {S}")
    rng = default_rng(SeedSequence(seed, spawn_key=(0xE1,)))
    lo, hi = domain.slice_range
    pts = domain.embed(rng.uniform(lo, hi, size=S))
    if isinstance(spec, KernelSpec):
        G = gram_matrix(spec, pts)
    else:
        G = np.asarray(spec(pts[:, None, :], pts[None, :, :]), dtype=float)
    lams = sym_eigenvalues(G) / S
    lams = np.maximum(lams, 0.0)
    return EigenEstimate(
        eigenvalues=lams,
        sample_count=S,
        measure=f"uniform[{lo}, {hi}] on slice axis {domain.slice_axis}",
    )


def imse_lower_bound(
    eigen: EigenEstimate, r_min: float, N: int, M: int
) -> float:
    """Spectral lower bound on the integrated posterior variance."""
    if not r_min > 0:
        raise ValueError(f"r_min must be positive, got {r_min}")
    lam = eigen.eigenvalues
    return float(r_min * np.sum(lam / (r_min + N * M * lam)))


def chebyshev_variance_bound(
    r_values: np.ndarray, M: int, epsilon: float, delta: float = 0.0
) -> float:
    """Bound on Pr(|min sample variance - min true variance| >= epsilon).

    Valid for Gaussian evaluations whose unbiased sample variance over M
    draws has variance 2 r^2 / (M - 1); ``delta`` must dominate the gap
    between the true variance at the argmin point and the true minimum.
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if not epsilon > delta >= 0:
        raise ValueError(
            f"need epsilon > delta >= 0, got epsilon={epsilon}, delta={delta}"
        )
    r = np.asarray(r_values, dtype=float)
    if np.any(r < 0):
        raise ValueError("r_values must be nonnegative")
    factors = np.maximum(1.0 - 2.0 * r * r / ((epsilon - delta) ** 2 * (M - 1)), 0.0)
    return float(1.0 - np.prod(factors))


def conservative_bound_check(
    eigen: EigenEstimate,
    r_min: float,
    nm_grid: list[tuple[int, int]],
) -> tuple[bool, float]:
    """Witness the 1/(N M) floor of the spectral bound on a grid.

    Returns ``(C > 0, C)`` with ``C = min over the grid of N M L(N, M)``.
    """
    if not nm_grid:
        raise ValueError("nm_grid must be nonempty")
    c_hat = min(N * M * imse_lower_bound(eigen, r_min, N, M) for N, M in nm_grid)
    return c_hat > 0, float(c_hat)


def r_min_estimate(ensemble: FkEnsemble) -> float:
    """Minimum per-point sample variance, floored away from exact zero.

    Deterministic problems produce all-zero variances; the floor is
    relative to the largest variance so downstream bounds stay defined
    whenever any point carries noise.
    """
    v = ensemble.variance
    raw = float(np.min(v))
    return max(raw, _RMIN_FLOOR * float(np.max(v)))


def build_report(
    post: GpPosterior,
    ensemble: FkEnsemble,
    domain: QueryDomain,
    eigen: EigenEstimate,
    quad_points: int = 200,
    epsilon: float | None = None,
    delta: float = 0.0,
    nm_grid: list[tuple[int, int]] | None = None,
) -> UncertaintyReport:
    """Assemble the full uncertainty record for one fitted posterior."""
    N = ensemble.points.shape[0]
    M = ensemble.sample_size
    r_min = r_min_estimate(ensemble)
    if epsilon is None:
        epsilon = max(r_min, 10.0 * _RMIN_FLOOR)
    if nm_grid is None:
        nm_grid = [(N, M), (N, 2 * M), (2 * N, 2 * M)]
    ok, c_hat = conservative_bound_check(eigen, r_min, nm_grid)
    return UncertaintyReport(
        imse=imse(post, domain, quad_points),
        l_imse=imse_lower_bound(eigen, r_min, N, M),
        r_min_estimate=r_min,
        chebyshev_bound=chebyshev_variance_bound(ensemble.variance, M, epsilon, delta),
        chebyshev_epsilon=float(epsilon),
        chebyshev_delta=float(delta),
        conservative_constant_check=ok,
        conservative_constant=c_hat,
        eigenvalue_count=int(np.sum(eigen.eigenvalues > 0)),
    )
