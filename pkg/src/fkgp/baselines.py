"""Reference estimators and the shared error metric.

Piecewise-linear interpolation of the per-point sample means is the
baseline every smoother is compared against; the squared L2 error over
the slice is the common accuracy criterion.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DomainError
from .problems import QueryDomain


def linear_interpolate(
    domain: QueryDomain, values: np.ndarray, x: np.ndarray
) -> np.ndarray | float:
    """Piecewise-linear interpolation along the slice coordinate.

    Exact at the grid nodes.  Queries outside the slice range raise a
    :class:`DomainError`; there is no extrapolation.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("need at least 2 node values to interpolate")
    if values.size != domain.grid_points:
        raise ValueError(
            f"{values.size} values for a grid of {domain.grid_points} points"
        )
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    coords = (x[None, :] if single else x)[..., domain.slice_axis]
    lo, hi = domain.slice_range
    if np.any(coords < lo) or np.any(coords > hi):
        raise DomainError(
            f"query coordinate outside slice range [{lo}, {hi}]"
        )
    out = np.interp(coords, domain.coordinates(), values)
    return float(out[0]) if single else out


def interpolant(domain: QueryDomain, values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Bind node values into a batched estimate function on the slice."""
    values = np.asarray(values, dtype=float)

    def estimate(x: np.ndarray) -> np.ndarray:
        return linear_interpolate(domain, values, x)

    return estimate


def l2_error(
    estimate: Callable[[np.ndarray], np.ndarray],
    reference: Callable[[np.ndarray], np.ndarray],
    domain: QueryDomain,
    quad_points: int = 200,
) -> float:
    """Squared L2 distance between two slice functions.

    Trapezoidal quadrature of (estimate - reference)^2 on ``quad_points``
    equally spaced nodes with respect to the slice Lebesgue measure.
    """
    if quad_points < 2:
        raise ValueError(f"quad_points must be >= 2, got {quad_points}")
    coords = domain.coordinates(quad_points)
    pts = domain.embed(coords)
    diff = np.asarray(estimate(pts), dtype=float) - np.asarray(reference(pts), dtype=float)
    return float(np.trapezoid(diff * diff, coords))
