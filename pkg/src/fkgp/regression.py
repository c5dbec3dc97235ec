"""Gaussian process regression with per-point or shared observation noise.

Observations are sample means of M noisy evaluations at each point, so
the effective noise covariance is diagonal with entries ``r_i / M``
(heteroscedastic, taken from the Monte Carlo sample variances) or
``sigma2`` (homoscedastic, learned).  Given the prior kernel ``k`` the
posterior at a query x is

    mean(x) = k_xX (K + R)^-1 u
    var(x)  = k(x, x) - k_xX (K + R)^-1 k_Xx

with K the Gram matrix over the observation points and R the effective
noise matrix.  Hyperparameters are fitted by multi-restart gradient
ascent on the log marginal likelihood

    -1/2 u^T A^-1 u - 1/2 log det A - N/2 log 2pi,      A = K + R,

using analytic gradients in log-parameter space and a backtracking line
search, which keeps the per-iteration likelihood nondecreasing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.random import SeedSequence, default_rng
from scipy.spatial.distance import cdist, pdist

from . import linalg
from .errors import FactorizationError, OptimizationError
from .kernels import (
    KernelSpec,
    _dk_dlog_h_from_distance,
    cross_matrix,
    gram_matrix,
    matern_from_distance,
)

logger = logging.getLogger(__name__)

# relative floor applied to zero per-point variances so A stays factorizable
_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class HeteroscedasticNoise:
    """Per-point variances of single evaluations, averaged over M of them."""

    variances: np.ndarray
    sample_size: int

    def __post_init__(self):
        v = np.asarray(self.variances, dtype=float)
        object.__setattr__(self, "variances", v)
        if np.any(v < 0):
            raise ValueError("noise variances must be nonnegative")
        if self.sample_size < 1:
            raise ValueError(f"sample_size must be >= 1, got {self.sample_size}")

    def effective(self) -> np.ndarray:
        """Diagonal noise entries r_i / M, with zeros floored."""
        eff = self.variances / self.sample_size
        floor = _VARIANCE_FLOOR * (
            float(np.max(self.variances)) / self.sample_size if self.variances.size else 0.0
        )
        return np.maximum(eff, floor)


@dataclass(frozen=True)
class HomoscedasticNoise:
    """A single shared noise variance (a learnable hyperparameter)."""

    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be nonnegative")

    def effective_for(self, n: int) -> np.ndarray:
        return np.full(n, self.variance)


NoiseModel = HeteroscedasticNoise | HomoscedasticNoise


def _effective_noise(noise: NoiseModel, n: int) -> np.ndarray:
    if isinstance(noise, HeteroscedasticNoise):
        if noise.variances.size != n:
            raise ValueError(
                f"noise has {noise.variances.size} entries for {n} observation points"
            )
        return noise.effective()
    return noise.effective_for(n)


@dataclass(frozen=True)
class GpPosterior:
    """Fitted posterior; immutable and safe for concurrent queries.

    ``weights`` is (K + R)^-1 u, precomputed so the posterior mean is a
    dot product per query and the variance one triangular solve.
    """

    spec: KernelSpec
    X: np.ndarray
    noise: NoiseModel
    factor: linalg.SpdFactor | None
    weights: np.ndarray
    data_mean: np.ndarray

    @property
    def n_observations(self) -> int:
        return self.X.shape[0]

    def mean(self, x: np.ndarray) -> np.ndarray | float:
        """Posterior mean at a point (d,) or a batch (Q, d)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if self.n_observations == 0:
            out = np.zeros(1 if single else x.shape[0])
        else:
            kxq = cross_matrix(self.spec, self.X, x[None, :] if single else x)
            out = kxq.T @ self.weights
        return float(out[0]) if single else out

    def variance(self, x: np.ndarray) -> np.ndarray | float:
        """Posterior variance at a point (d,) or a batch (Q, d).

        Clamped at zero from below (roundoff can push the subtraction
        slightly negative); clamping is logged at debug level.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        Q = x[None, :] if single else x
        prior = np.full(Q.shape[0], self.spec.amplitude)
        if self.n_observations == 0:
            out = prior
        else:
            kxq = cross_matrix(self.spec, self.X, Q)
            out = prior - np.sum(kxq * linalg.solve(self.factor, kxq), axis=0)
            clipped = out < 0
            if np.any(clipped):
                logger.debug(
                    "clamped %d negative posterior variances (min %.3e)",
                    int(np.sum(clipped)),
                    float(np.min(out)),
                )
                out = np.maximum(out, 0.0)
        return float(out[0]) if single else out

    def covariance(self, Q: np.ndarray) -> np.ndarray:
        """Posterior covariance matrix over a finite query set (Q, d)."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        prior = gram_matrix(self.spec, Q)
        if self.n_observations == 0:
            return prior
        kxq = cross_matrix(self.spec, self.X, Q)
        return prior - kxq.T @ linalg.solve(self.factor, kxq)


def fit_posterior(
    spec: KernelSpec,
    X: np.ndarray,
    data_mean: np.ndarray,
    noise: NoiseModel,
) -> GpPosterior:
    """Precompute the factored system matrix and weight vector.

    Subsequent mean queries cost O(N) and variance queries O(N^2).  An
    empty observation set yields the prior (zero mean, full variance).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    u = np.asarray(data_mean, dtype=float)
    if X.shape[0] != u.size:
        raise ValueError(f"{X.shape[0]} points but {u.size} data values")
    if X.shape[0] == 0:
        return GpPosterior(
            spec=spec, X=X, noise=noise, factor=None, weights=u, data_mean=u
        )
    A = gram_matrix(spec, X) + np.diag(_effective_noise(noise, X.shape[0]))
    factor = linalg.cholesky(A)
    return GpPosterior(
        spec=spec,
        X=X,
        noise=noise,
        factor=factor,
        weights=linalg.solve(factor, u),
        data_mean=u,
    )


def _gram_from_distances(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    K = matern_from_distance(spec, r)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, spec.amplitude)
    return K


def _lml_value(
    spec: KernelSpec, r: np.ndarray, u: np.ndarray, eff: np.ndarray
) -> tuple[float, linalg.SpdFactor, np.ndarray]:
    """Likelihood value only, from a precomputed distance matrix."""
    n = u.size
    A = _gram_from_distances(spec, r) + np.diag(eff)
    factor = linalg.cholesky(A)
    alpha = linalg.solve(factor, u)
    value = float(
        -0.5 * u @ alpha - 0.5 * linalg.logdet(factor) - 0.5 * n * math.log(2.0 * math.pi)
    )
    return value, factor, alpha


def _lml_gradient(
    spec: KernelSpec,
    r: np.ndarray,
    factor: linalg.SpdFactor,
    alpha: np.ndarray,
    noise: NoiseModel,
) -> dict[str, float]:
    """Analytic gradient wrt log hyperparameters, given the factored system.

    Each entry is 1/2 a^T (dA/dt) a - 1/2 tr(A^-1 dA/dt) with a = A^-1 u.
    """
    n = alpha.size
    A_inv = linalg.solve(factor, np.eye(n))
    d_h = _dk_dlog_h_from_distance(spec, r)
    d_h = 0.5 * (d_h + d_h.T)
    np.fill_diagonal(d_h, 0.0)
    d_amp = _gram_from_distances(spec, r)
    grads = {
        "log_length_scale": float(0.5 * alpha @ d_h @ alpha - 0.5 * np.sum(A_inv * d_h)),
        "log_amplitude": float(
            0.5 * alpha @ d_amp @ alpha - 0.5 * np.sum(A_inv * d_amp)
        ),
    }
    if isinstance(noise, HomoscedasticNoise):
        # dA/dlog sigma2 = sigma2 * I
        s2 = noise.variance
        grads["log_noise_variance"] = float(
            0.5 * s2 * (alpha @ alpha) - 0.5 * s2 * np.trace(A_inv)
        )
    return grads


def log_marginal_likelihood(
    spec: KernelSpec,
    X: np.ndarray,
    data_mean: np.ndarray,
    noise: NoiseModel,
) -> tuple[float, dict[str, float]]:
    """Log marginal likelihood and analytic gradient.

    Gradient entries are with respect to ``log_length_scale`` and
    ``log_amplitude``, plus ``log_noise_variance`` for homoscedastic
    noise.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    u = np.asarray(data_mean, dtype=float)
    r = cdist(X, X)
    eff = _effective_noise(noise, X.shape[0])
    value, factor, alpha = _lml_value(spec, r, u, eff)
    return value, _lml_gradient(spec, r, factor, alpha, noise)


@dataclass(frozen=True)
class FitResult:
    """Best hyperparameters found over all restarts."""

    spec: KernelSpec
    noise: NoiseModel
    log_likelihood: float
    restart_index: int
    iterations: int


def _pack_names(noise: NoiseModel, fit_amplitude: bool) -> list[str]:
    names = ["log_length_scale"]
    if fit_amplitude:
        names.append("log_amplitude")
    if isinstance(noise, HomoscedasticNoise):
        names.append("log_noise_variance")
    return names


def _unpack(
    theta: np.ndarray,
    names: list[str],
    smoothness: float,
    amplitude: float,
    noise: NoiseModel,
) -> tuple[KernelSpec, NoiseModel]:
    values = dict(zip(names, theta))
    spec = KernelSpec(
        smoothness=smoothness,
        length_scale=math.exp(values["log_length_scale"]),
        amplitude=math.exp(values["log_amplitude"])
        if "log_amplitude" in values
        else amplitude,
    )
    if "log_noise_variance" in values:
        noise = HomoscedasticNoise(math.exp(values["log_noise_variance"]))
    return spec, noise


def optimize_hyperparameters(
    X: np.ndarray,
    data_mean: np.ndarray,
    noise: NoiseModel,
    restarts: int = 27,
    seed: int = 0,
    smoothness: float = 1.5,
    fit_amplitude: bool = True,
    amplitude: float = 1.0,
    max_iterations: int = 500,
    gradient_tolerance: float = 1e-6,
) -> FitResult:
    """Multi-restart gradient ascent on the log marginal likelihood.

    Each restart starts from log-uniform random hyperparameters (the
    length-scale spans 0.01 to 10 times the data diameter, amplitude and
    noise span 1e-3 to 1e3 times the data variance) and climbs the
    analytic gradient with a backtracking line search until the gradient
    infinity-norm drops below ``gradient_tolerance``, no ascent step is
    accepted, or ``max_iterations`` is reached.  The restart with the
    highest likelihood wins; ties break toward the lowest restart index.
    Deterministic for a given seed.

    With ``fit_amplitude=False`` the amplitude stays pinned at
    ``amplitude`` (the plain unit-variance kernel by default).
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    u = np.asarray(data_mean, dtype=float)

    diameter = float(np.max(pdist(X))) if X.shape[0] >= 2 else 1.0
    if not diameter > 0:
        diameter = 1.0
    data_scale = float(np.var(u))
    if not data_scale > 0:
        data_scale = max(float(np.mean(u * u)), 1e-12)

    names = _pack_names(noise, fit_amplitude)
    rng = default_rng(SeedSequence(seed))
    r = cdist(X, X)
    fixed_eff = (
        _effective_noise(noise, X.shape[0])
        if isinstance(noise, HeteroscedasticNoise)
        else None
    )

    def evaluate(theta, with_grad):
        # extreme candidates overflow to inf and are rejected, not raised
        try:
            spec, nz = _unpack(theta, names, smoothness, amplitude, noise)
        except (ValueError, OverflowError):
            return -math.inf, None
        eff = fixed_eff if fixed_eff is not None else nz.effective_for(u.size)
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                val, factor, alpha = _lml_value(spec, r, u, eff)
            except (FactorizationError, FloatingPointError):
                return -math.inf, None
            if not math.isfinite(val):
                return -math.inf, None
            if not with_grad:
                return val, None
            grads = _lml_gradient(spec, r, factor, alpha, nz)
        return val, np.array([grads[name] for name in names])

    best: FitResult | None = None
    for restart in range(restarts):
        init = [math.log(diameter) + rng.uniform(math.log(0.01), math.log(10.0))]
        if fit_amplitude:
            init.append(math.log(data_scale) + rng.uniform(math.log(1e-3), math.log(1e3)))
        if isinstance(noise, HomoscedasticNoise):
            init.append(math.log(data_scale) + rng.uniform(math.log(1e-3), math.log(1e3)))
        theta = np.array(init)

        f, g = evaluate(theta, with_grad=True)
        if not math.isfinite(f):
            continue
        step = 1.0
        iterations = 0
        for iterations in range(1, max_iterations + 1):
            if float(np.max(np.abs(g))) < gradient_tolerance:
                break
            gg = float(g @ g)
            accepted = False
            backtracked = False
            while step > 1e-18:
                cand = theta + step * g
                fc, _ = evaluate(cand, with_grad=False)
                if fc >= f + 1e-4 * step * gg:
                    accepted = True
                    break
                step *= 0.5
                backtracked = True
            if not accepted:
                break
            theta = cand
            f, g = evaluate(theta, with_grad=True)
            if not backtracked:
                step = min(step * 2.0, 1e3)

        if best is None or f > best.log_likelihood:
            spec, nz = _unpack(theta, names, smoothness, amplitude, noise)
            best = FitResult(
                spec=spec,
                noise=nz,
                log_likelihood=f,
                restart_index=restart,
                iterations=iterations,
            )

    if best is None:
        raise OptimizationError("every restart failed to factorize the system matrix")
    return best
