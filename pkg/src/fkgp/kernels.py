"""Matern covariance family and its hyperparameter derivatives.

The kernel is the isotropic Matern

    k(x, y) = amp * 2^(1-a)/Gamma(a) * z^a * K_a(z),   z = sqrt(2a) r / h

with smoothness ``a``, length-scale ``h``, output amplitude ``amp`` and
``r = |x - y|_2``.  Half-integer orders 1/2, 3/2 and 5/2 use the usual
exponential closed forms; any other order falls back to the modified
Bessel function.  The removable singularity at r = 0 is special-cased so
that k(x, x) = amp exactly.

Smoothness is a fixed configuration constant, chosen so that the
associated Sobolev regularity matches the expected regularity of the
solution on the query slice (order a + slice_dim/2, i.e. a = 3/2 for a
second-order match on a one-dimensional slice).  Only the length-scale
and the amplitude are optimized, so gradients are provided with respect
to their logarithms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gamma, kv

# below this scaled distance the kernel is evaluated at its r = 0 limit
_TINY_R = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Matern smoothness, length-scale and output amplitude."""

    smoothness: float = 1.5
    length_scale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.smoothness > 0:
            raise ValueError(f"smoothness must be > 0, got {self.smoothness}")
        if not self.length_scale > 0:
            raise ValueError(f"length_scale must be > 0, got {self.length_scale}")
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")


def _scaled_distance(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    return np.sqrt(2.0 * spec.smoothness) * r / spec.length_scale


def _order_code(a: float) -> int:
    """Dispatch tag: 0/1/2 for the half-integer closed forms, -1 otherwise."""
    for code, half in enumerate((0.5, 1.5, 2.5)):
        if abs(a - half) < 1e-12:
            return code
    return -1


def matern_from_distance(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """Kernel value as a function of Euclidean distance (array-valued)."""
    r = np.asarray(r, dtype=float)
    a = spec.smoothness
    z = _scaled_distance(spec, r)
    small = z < _TINY_R
    zs = np.where(small, 1.0, z)  # placeholder away from the singular limit

    code = _order_code(a)
    if code == 0:
        profile = np.exp(-zs)
    elif code == 1:
        profile = (1.0 + zs) * np.exp(-zs)
    elif code == 2:
        profile = (1.0 + zs + zs * zs / 3.0) * np.exp(-zs)
    else:
        with np.errstate(all="ignore"):
            profile = (2.0 ** (1.0 - a) / gamma(a)) * zs**a * kv(a, zs)
        profile = np.where(np.isfinite(profile), profile, 0.0)

    return spec.amplitude * np.where(small, 1.0, profile)


def _dk_dlog_h_from_distance(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """d k / d log(length_scale) as a function of distance."""
    r = np.asarray(r, dtype=float)
    a = spec.smoothness
    z = _scaled_distance(spec, r)
    small = z < _TINY_R
    zs = np.where(small, 1.0, z)

    code = _order_code(a)
    if code == 0:
        deriv = zs * np.exp(-zs)
    elif code == 1:
        deriv = zs * zs * np.exp(-zs)
    elif code == 2:
        deriv = zs * zs * (1.0 + zs) / 3.0 * np.exp(-zs)
    else:
        # d/dz [z^a K_a(z)] = -z^a K_{a-1}(z), and dz/dlog h = -z
        with np.errstate(all="ignore"):
            deriv = (2.0 ** (1.0 - a) / gamma(a)) * zs ** (a + 1.0) * kv(a - 1.0, zs)
        deriv = np.where(np.isfinite(deriv), deriv, 0.0)

    return spec.amplitude * np.where(small, 0.0, deriv)


def matern(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Kernel between points (broadcasts over leading axes)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(x - y, axis=-1)
    return matern_from_distance(spec, r)


def gram_matrix(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    """Exactly symmetric (N, N) kernel matrix with diagonal = amplitude."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = cdist(X, X)
    K = matern_from_distance(spec, r)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, spec.amplitude)
    return K


def cross_vector(spec: KernelSpec, X: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Kernel values between each row of X and the query point x."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(X - x, axis=-1)
    return matern_from_distance(spec, r)


def cross_matrix(spec: KernelSpec, X: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """(N, Q) kernel matrix between observation points and query points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return matern_from_distance(spec, cdist(X, Q))


def kernel_grad(spec: KernelSpec, X: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic Gram-matrix derivatives for likelihood fitting.

    Returns ``{"log_length_scale": dK/dlog h, "log_amplitude": dK/dlog amp}``;
    the amplitude enters linearly so its log-derivative is the Gram matrix
    itself, and the length-scale derivative vanishes on the diagonal.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = cdist(X, X)
    d_h = _dk_dlog_h_from_distance(spec, r)
    d_h = 0.5 * (d_h + d_h.T)
    np.fill_diagonal(d_h, 0.0)
    return {
        "log_length_scale": d_h,
        "log_amplitude": gram_matrix(spec, X),
    }
