"""Path sampling and Monte Carlo evaluation of the stochastic representation.

The solution of a terminal-value problem at (t0, x0) is estimated by the
path functional

    u_hat = int_t0^T h(s, X(s)) exp(-int_t0^s c) ds
            + g(X(T)) exp(-int_t0^T c)

where X solves ``dX = b dt + a dW`` started at x0.  Paths are discretized
with the explicit Euler-Maruyama scheme on a uniform grid, and both the
inner discount integral and the outer source integral are accumulated by
the trapezoidal rule on the same grid (no substepping).

Reproducibility
---------------
Every sample (point index i, sample index j) draws its Wiener increments
from an independent counter-based stream keyed by
``SeedSequence(master_seed, spawn_key=(FK_STREAM, i, j))``.  Streams are
derived, never shared, so ensembles are bit-identical across runs and
independent of how work is distributed over workers.  Ensembles are also
evaluated in fixed-size sample chunks so the floating-point reduction
order never depends on the environment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .errors import CoefficientError, PathBlowupError
from .problems import Orientation, PdeProblem, QueryDomain

# spawn_key tag separating path streams from any other derived randomness
FK_STREAM = 0xF1
# fixed vectorization width; part of the reproducibility contract
_CHUNK = 4096


@dataclass(frozen=True)
class FkConfig:
    """Discretization and sampling sizes for one ensemble run."""

    time_steps: int = 100
    sample_size: int = 800
    seed: int = 0

    def __post_init__(self):
        if self.time_steps < 1:
            raise ValueError(f"time_steps must be >= 1, got {self.time_steps}")
        if self.sample_size < 2:
            # the unbiased variance divisor (M - 1) must be positive
            raise ValueError(f"sample_size must be >= 2, got {self.sample_size}")


@dataclass(frozen=True)
class FkEnsemble:
    """Per-point sample mean and unbiased sample variance of M path samples."""

    points: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    sample_size: int

    def __post_init__(self):
        for name in ("points", "mean", "variance"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.points.shape[0] == self.mean.size == self.variance.size):
            raise ValueError("points, mean and variance lengths disagree")
        if not np.all(np.isfinite(self.mean)) or not np.all(np.isfinite(self.variance)):
            raise ValueError("ensemble statistics must be finite")
        if np.any(self.variance < 0):
            raise ValueError("sample variances must be nonnegative")


def sample_stream(seed: int, point_index: int, sample_index: int) -> SeedSequence:
    """Derived seed for one (point, sample) pair."""
    return SeedSequence(seed, spawn_key=(FK_STREAM, point_index, sample_index))


def _draw_increments(path_seed, steps: int, noise_dim: int, dt: float) -> np.ndarray:
    """All Wiener increments of one path, shape (steps, noise_dim)."""
    gen = Generator(Philox(path_seed))
    return np.sqrt(dt) * gen.standard_normal((steps, noise_dim))


def _apply_diffusion(a_val: np.ndarray, dw: np.ndarray) -> np.ndarray:
    """a(t, X) @ dW for constant (d, m) or batched (..., d, m) diffusion."""
    a_val = np.asarray(a_val, dtype=float)
    if a_val.ndim == 2:
        return dw @ a_val.T
    return np.einsum("...ij,...j->...i", a_val, dw)


def euler_maruyama_path(
    problem: PdeProblem,
    x0: np.ndarray,
    t0: float,
    config: FkConfig,
    path_seed,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one explicit Euler path over [t0, T].

    Returns ``(times, states)`` with ``times`` of length K+1 and
    ``states`` of shape (K+1, d); ``states[0] == x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    T = problem.horizon
    if not 0.0 <= t0 < T:
        raise ValueError(f"t0 must lie in [0, T), got {t0} with T={T}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")

    K = config.time_steps
    dt = (T - t0) / K
    dw = _draw_increments(path_seed, K, problem.noise_dim, dt)

    times = t0 + dt * np.arange(K + 1)
    states = np.empty((K + 1, x0.size))
    states[0] = x0
    x = x0
    for k in range(K):
        t = times[k]
        x = x + np.asarray(problem.drift(t, x), dtype=float) * dt + _apply_diffusion(
            problem.diffusion(t, x), dw[k]
        )
        if not np.all(np.isfinite(x)):
            raise PathBlowupError(step=k + 1)
        states[k + 1] = x
    return times, states


def _fk_batch(
    problem: PdeProblem,
    x0: np.ndarray,
    t0: float,
    increments: np.ndarray,
    point_index=None,
    sample_offset: int = 0,
) -> np.ndarray:
    """Path functional values for a batch of samples sharing a start point.

    ``x0`` has shape (d,), ``increments`` has shape (B, K, m).  Returns the
    (B,) functional values.  The running discount integral and the outer
    source integral are both trapezoidal sums on the step grid.
    """
    B, K, m = increments.shape
    T = problem.horizon
    dt = (T - t0) / K

    x = np.broadcast_to(np.asarray(x0, dtype=float), (B, x0.size)).copy()
    discount_exponent = np.zeros(B)
    outer = np.zeros(B)

    def scalar_coef(fn, name, t, pts):
        vals = np.asarray(fn(t, pts), dtype=float)
        vals = np.broadcast_to(vals, (B,))
        if not np.all(np.isfinite(vals)):
            j = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise CoefficientError(name, t, pts[j])
        return vals

    c_prev = scalar_coef(problem.reaction, "reaction", t0, x)
    f_prev = scalar_coef(problem.source, "source", t0, x)  # discount is 1 at t0

    for k in range(K):
        t = t0 + k * dt
        b_val = np.asarray(problem.drift(t, x), dtype=float)
        a_val = problem.diffusion(t, x)
        x = x + b_val * dt + _apply_diffusion(a_val, increments[:, k, :])
        finite = np.isfinite(x).all(axis=-1)
        if not finite.all():
            j = int(np.flatnonzero(~finite)[0])
            raise PathBlowupError(
                step=k + 1, point_index=point_index, sample_index=sample_offset + j
            )
        t_next = t0 + (k + 1) * dt
        c_next = scalar_coef(problem.reaction, "reaction", t_next, x)
        discount_exponent += 0.5 * dt * (c_prev + c_next)
        h_next = scalar_coef(problem.source, "source", t_next, x)
        f_next = h_next * np.exp(-discount_exponent)
        outer += 0.5 * dt * (f_prev + f_next)
        c_prev, f_prev = c_next, f_next

    g_val = scalar_coef(lambda t, pts: problem.terminal(pts), "terminal", T, x)
    return outer + g_val * np.exp(-discount_exponent)


def fk_sample(
    problem: PdeProblem,
    x0: np.ndarray,
    t0: float,
    config: FkConfig,
    path_seed,
) -> float:
    """One path-functional sample of the solution at (t0, x0).

    The problem must be in terminal-value form; convert initial-value
    problems with :func:`fkgp.problems.reverse_time` first.
    """
    if problem.orientation is not Orientation.TERMINAL_VALUE:
        raise ValueError(
            "fk_sample requires a terminal-value problem; apply reverse_time first"
        )
    x0 = np.asarray(x0, dtype=float)
    T = problem.horizon
    if not 0.0 <= t0 < T:
        raise ValueError(f"t0 must lie in [0, T), got {t0} with T={T}")
    dt = (T - t0) / config.time_steps
    dw = _draw_increments(path_seed, config.time_steps, problem.noise_dim, dt)
    return float(_fk_batch(problem, x0, t0, dw[None, :, :])[0])


def fk_values(
    problem: PdeProblem,
    x0: np.ndarray,
    t0: float,
    config: FkConfig,
    point_index: int,
) -> np.ndarray:
    """All M path-functional samples at one observation point."""
    K, M, m = config.time_steps, config.sample_size, problem.noise_dim
    T = problem.horizon
    dt = (T - t0) / K
    values = np.empty(M)
    for start in range(0, M, _CHUNK):
        stop = min(start + _CHUNK, M)
        block = np.empty((stop - start, K, m))
        for j in range(start, stop):
            block[j - start] = _draw_increments(
                sample_stream(config.seed, point_index, j), K, m, dt
            )
        values[start:stop] = _fk_batch(
            problem, x0, t0, block, point_index=point_index, sample_offset=start
        )
    return values


def fk_ensemble(
    problem: PdeProblem,
    domain: QueryDomain,
    config: FkConfig,
) -> FkEnsemble:
    """Sample mean and unbiased sample variance of M samples per grid point.

    A pure function of its arguments: reruns with the same configuration
    give bit-identical statistics regardless of worker count, because
    each (point, sample) pair owns a derived random stream.
    """
    if problem.orientation is not Orientation.TERMINAL_VALUE:
        raise ValueError(
            "fk_ensemble requires a terminal-value problem; apply reverse_time first"
        )
    pts = domain.points()
    N = pts.shape[0]
    mean = np.empty(N)
    variance = np.empty(N)
    for i in range(N):
        vals = fk_values(problem, pts[i], 0.0, config, point_index=i)
        mean[i] = np.mean(vals)
        variance[i] = np.var(vals, ddof=1)
    return FkEnsemble(points=pts, mean=mean, variance=variance, sample_size=config.sample_size)
