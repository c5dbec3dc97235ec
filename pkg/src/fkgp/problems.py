"""Kolmogorov PDE problem definitions and transforms.

A :class:`PdeProblem` bundles the coefficient callables of a linear
second-order parabolic equation

    d/dt v + (1/2) tr{a a^T d2v/dx2} + b . dv/dx - c v + h = 0

on [0, T] x R^d together with the condition ``g`` pinned at one end of the
time interval.  The ``reaction`` coefficient ``c`` acts as a killing (i.e.
exponential discount) rate in the stochastic representation evaluated by
:mod:`fkgp.sampling`; ``c >= 0`` discounts, ``c < 0`` inflates.

Coefficient callables receive a scalar time ``t`` and a point array ``x``
of shape ``(..., d)`` and must broadcast over the leading batch axes:

=============  =======================  =========================
coefficient    input                    output shape
=============  =======================  =========================
drift  (b)     t, x: (..., d)           (..., d)
diffusion (a)  t, x: (..., d)           (..., d, m) or (d, m)
reaction (c)   t, x: (..., d)           (...,)
source (h)     t, x: (..., d)           (...,)
terminal (g)   x: (..., d)              (...,)
=============  =======================  =========================

Callables must be deterministic pure functions so that Monte Carlo runs
are reproducible, and safe to call concurrently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, LinearizationError


class Orientation(enum.Enum):
    """Which end of [0, T] carries the pinned condition ``g``."""

    TERMINAL_VALUE = "terminal"
    INITIAL_VALUE = "initial"


Coefficient = Callable[[float, np.ndarray], np.ndarray]
Condition = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PdeProblem:
    """One Kolmogorov PDE instance.

    Immutable after construction.  ``orientation`` records whether
    ``terminal`` pins the solution at ``t = T`` (terminal-value form,
    directly usable for path sampling) or at ``t = 0`` (initial-value
    form, to be converted with :func:`reverse_time` first).
    """

    dim: int
    noise_dim: int
    horizon: float
    drift: Coefficient
    diffusion: Coefficient
    reaction: Coefficient
    source: Coefficient
    terminal: Condition
    orientation: Orientation = Orientation.TERMINAL_VALUE

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.noise_dim < 1:
            raise ValueError(f"noise_dim must be >= 1, got {self.noise_dim}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be a positive real, got {self.horizon}")

    def coefficients(self):
        """Time-dependent coefficients by name (excludes the condition g)."""
        return {
            "drift": self.drift,
            "diffusion": self.diffusion,
            "reaction": self.reaction,
            "source": self.source,
        }


@dataclass(frozen=True)
class QueryDomain:
    """A one-dimensional slice of R^d on which the solution is queried.

    Point ``i`` of the grid equals ``anchor`` with coordinate
    ``slice_axis`` replaced by ``lo + i*(hi - lo)/(N - 1)``.  The slice
    carries the uniform (normalized Lebesgue) measure used for averaged
    error metrics and for eigenvalue sampling.
    """

    slice_axis: int
    slice_range: tuple[float, float]
    anchor: np.ndarray
    grid_points: int

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=float)
        object.__setattr__(self, "anchor", anchor)
        lo, hi = self.slice_range
        if not lo < hi:
            raise ValueError(f"slice_range must satisfy lo < hi, got {self.slice_range}")
        if anchor.ndim != 1:
            raise ValueError("anchor must be a 1-D point")
        if not 0 <= self.slice_axis < anchor.size:
            raise ValueError(
                f"slice_axis {self.slice_axis} out of range for dimension {anchor.size}"
            )
        if self.grid_points < 2:
            raise ValueError(f"grid_points must be >= 2, got {self.grid_points}")

    @property
    def dim(self) -> int:
        return self.anchor.size

    @property
    def width(self) -> float:
        lo, hi = self.slice_range
        return hi - lo

    def coordinates(self, n: int | None = None) -> np.ndarray:
        """Equally spaced slice coordinates (defaults to the grid count)."""
        lo, hi = self.slice_range
        return np.linspace(lo, hi, self.grid_points if n is None else n)

    def embed(self, coords: np.ndarray) -> np.ndarray:
        """Lift slice coordinates into R^d points on the slice."""
        coords = np.asarray(coords, dtype=float)
        pts = np.broadcast_to(self.anchor, coords.shape + (self.dim,)).copy()
        pts[..., self.slice_axis] = coords
        return pts

    def points(self) -> np.ndarray:
        """The (N, d) observation grid."""
        return self.embed(self.coordinates())


@dataclass(frozen=True)
class ValidationReport:
    """Randomized regularity probe results.  Advisory only."""

    lipschitz_ratios: dict[str, float]
    reaction_max_abs: float
    reaction_bounded: bool
    failures: tuple[tuple[str, float, np.ndarray], ...] = field(default_factory=tuple)
    probe_count: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures


def _coefficient_magnitude(value: np.ndarray) -> float:
    """Flatten a scalar/vector/matrix coefficient value to a Euclidean norm."""
    return float(np.linalg.norm(np.asarray(value, dtype=float).ravel()))


def validate_lipschitz(
    problem: PdeProblem,
    probe_count: int,
    seed: int,
    box: tuple[float, float] = (0.0, 1.0),
) -> ValidationReport:
    """Probe coefficient regularity by sampling random point pairs.

    For each coefficient this reports the largest observed ratio
    ``|f(t,x) - f(t,x')| / |x - x'|`` over ``probe_count`` random pairs
    drawn from ``box``^d at uniform times, plus a boundedness flag for the
    reaction coefficient.  Probes additionally include the box corners and
    center, where singular coefficients typically reveal themselves.  Any
    non-finite coefficient value is recorded as a failure naming the
    coefficient and the offending (t, x); the report never rejects a
    problem.
    """
    if probe_count < 2:
        raise ValueError(f"probe_count must be >= 2, got {probe_count}")
    rng = np.random.default_rng(seed)
    d, T = problem.dim, problem.horizon
    lo, hi = box

    times = rng.uniform(0.0, T, size=probe_count)
    xs = rng.uniform(lo, hi, size=(probe_count, d))
    ys = rng.uniform(lo, hi, size=(probe_count, d))
    # Deterministic extra probes at the corners and center of the box.
    extra_x = np.array([np.full(d, lo), np.full(d, hi), np.full(d, 0.5 * (lo + hi))])
    extra_t = np.array([0.0, T, 0.5 * T])

    ratios: dict[str, float] = {}
    failures: list[tuple[str, float, np.ndarray]] = []
    reaction_max = 0.0

    for name, fn in problem.coefficients().items():
        worst = 0.0
        with np.errstate(all="ignore"):
            for t, x, y in zip(times, xs, ys):
                fx = np.asarray(fn(t, x), dtype=float)
                fy = np.asarray(fn(t, y), dtype=float)
                if not np.all(np.isfinite(fx)):
                    failures.append((name, float(t), x))
                    continue
                if not np.all(np.isfinite(fy)):
                    failures.append((name, float(t), y))
                    continue
                gap = _coefficient_magnitude(fx - fy)
                dist = float(np.linalg.norm(x - y))
                if dist > 0:
                    worst = max(worst, gap / dist)
                if name == "reaction":
                    reaction_max = max(reaction_max, abs(float(fx)), abs(float(fy)))
            for t in extra_t:
                for x in extra_x:
                    val = np.asarray(fn(t, x), dtype=float)
                    if not np.all(np.isfinite(val)):
                        failures.append((name, float(t), x))
                    elif name == "reaction":
                        reaction_max = max(reaction_max, abs(float(val)))
        ratios[name] = worst

    return ValidationReport(
        lipschitz_ratios=ratios,
        reaction_max_abs=reaction_max,
        reaction_bounded=math.isfinite(reaction_max),
        failures=tuple(failures),
        probe_count=probe_count,
    )


def _reverse(fn: Coefficient, horizon: float) -> Coefficient:
    def reversed_fn(s, x):
        return fn(horizon - s, x)

    return reversed_fn


def reverse_time(problem: PdeProblem) -> PdeProblem:
    """Swap between initial-value and terminal-value form.

    Every time-dependent coefficient ``f`` is replaced by
    ``(s, x) -> f(T - s, x)`` and the orientation flag is flipped; the
    pinned condition ``g`` is unchanged.  The solution of the transformed
    problem at time 0 equals the original solution at time T.  Applying
    the transform twice recovers coefficients that agree pointwise with
    composing the substitution twice.
    """
    flipped = (
        Orientation.INITIAL_VALUE
        if problem.orientation is Orientation.TERMINAL_VALUE
        else Orientation.TERMINAL_VALUE
    )
    T = problem.horizon
    return replace(
        problem,
        drift=_reverse(problem.drift, T),
        diffusion=_reverse(problem.diffusion, T),
        reaction=_reverse(problem.reaction, T),
        source=_reverse(problem.source, T),
        orientation=flipped,
    )


def cole_hopf_linearize(
    ell: Condition,
    g: Condition,
    B: np.ndarray,
    R: np.ndarray,
    a: np.ndarray,
    horizon: float = 1.0,
) -> tuple[PdeProblem, float]:
    """Linearize a quadratic-control Bellman equation by exponential substitution.

    Finds the scalar ``lam > 0`` with ``lam * B R^-1 B^T = a a^T`` (to
    relative tolerance 1e-10 in Frobenius norm) and returns the linear
    terminal-value problem satisfied by ``exp(-v / lam)``:

    * drift 0, constant diffusion ``a``,
    * reaction (killing rate) ``ell(x) / lam``,
    * source 0, terminal condition ``exp(-g(x) / lam)``.

    ``ell`` and ``g`` must be batched callables of ``x`` alone.  ``lam`` is
    computed as ``trace(a a^T) / trace(B R^-1 B^T)``, which is robust when
    off-diagonal entries vanish, and then residual-checked.
    """
    B = np.asarray(B, dtype=float)
    R = np.asarray(R, dtype=float)
    a = np.asarray(a, dtype=float)
    control = B @ np.linalg.solve(R, B.T)
    diffusion_sq = a @ a.T

    denom = np.trace(control)
    if denom <= 0:
        raise LinearizationError(float("inf"), "B R^-1 B^T has non-positive trace")
    lam = float(np.trace(diffusion_sq) / denom)
    scale = np.linalg.norm(diffusion_sq)
    residual = np.linalg.norm(lam * control - diffusion_sq)
    rel = residual / scale if scale > 0 else residual
    if lam <= 0 or rel > 1e-10:
        raise LinearizationError(rel)

    d = B.shape[0]
    m = a.shape[1]
    zeros_d = np.zeros(d)

    def drift(t, x):
        return np.broadcast_to(zeros_d, np.shape(x))

    def diffusion(t, x):
        return a

    def reaction(t, x):
        return np.asarray(ell(x), dtype=float) / lam

    def source(t, x):
        return np.zeros(np.shape(x)[:-1])

    def terminal(x):
        return np.exp(-np.asarray(g(x), dtype=float) / lam)

    problem = PdeProblem(
        dim=d,
        noise_dim=m,
        horizon=horizon,
        drift=drift,
        diffusion=diffusion,
        reaction=reaction,
        source=source,
        terminal=terminal,
        orientation=Orientation.TERMINAL_VALUE,
    )
    return problem, lam


def cole_hopf_inverse(tilde_values: np.ndarray, lam: float) -> np.ndarray:
    """Map transformed solution values back: ``v = -lam * log(v_tilde)``.

    Inputs must be strictly positive; a non-positive entry means the Monte
    Carlo estimate of the linearized solution collapsed (sample size too
    small or ``lam`` mis-scaled) and raises a :class:`DomainError`
    carrying the first offending index.
    """
    values = np.asarray(tilde_values, dtype=float)
    bad = np.flatnonzero(~(values > 0))
    if bad.size:
        i = int(bad[0])
        raise DomainError(
            f"non-positive transformed value {values.flat[i]} at index {i}", index=i
        )
    return -lam * np.log(values)


# ---------------------------------------------------------------------------
# Built-in benchmark problems
# ---------------------------------------------------------------------------


def gaussian_bump(lam: float, center: np.ndarray) -> Condition:
    """The condition x -> exp(-lam * |x - center|^2)."""
    center = np.asarray(center, dtype=float)

    def g(x):
        diff = np.asarray(x, dtype=float) - center
        return np.exp(-lam * np.sum(diff * diff, axis=-1))

    return g


def _constant_drift(vec: np.ndarray) -> Coefficient:
    vec = np.asarray(vec, dtype=float)

    def drift(t, x):
        return np.broadcast_to(vec, np.shape(x))

    return drift


def _constant_diffusion(mat: np.ndarray) -> Coefficient:
    mat = np.asarray(mat, dtype=float)

    def diffusion(t, x):
        return mat

    return diffusion


def _zero_scalar(t, x):
    return np.zeros(np.shape(x)[:-1])


def heat_problem(
    dim: int = 10,
    horizon: float = 1.0,
    diffusion_scale: float = 0.4,
    bump_sharpness: float = 5.0,
    center: float = 0.5,
) -> PdeProblem:
    """Pure-diffusion initial value problem with a Gaussian bump start."""
    c = np.full(dim, center)
    return PdeProblem(
        dim=dim,
        noise_dim=dim,
        horizon=horizon,
        drift=_constant_drift(np.zeros(dim)),
        diffusion=_constant_diffusion(diffusion_scale * np.eye(dim)),
        reaction=_zero_scalar,
        source=_zero_scalar,
        terminal=gaussian_bump(bump_sharpness, c),
        orientation=Orientation.INITIAL_VALUE,
    )


def advection_diffusion_problem(
    dim: int = 10,
    horizon: float = 1.0,
    diffusion_scale: float = 0.4,
    drift_scale: float = 0.01,
    bump_sharpness: float = 5.0,
    center: float = 0.5,
) -> PdeProblem:
    """Diffusion plus constant drift, same Gaussian bump start."""
    c = np.full(dim, center)
    return PdeProblem(
        dim=dim,
        noise_dim=dim,
        horizon=horizon,
        drift=_constant_drift(np.full(dim, drift_scale)),
        diffusion=_constant_diffusion(diffusion_scale * np.eye(dim)),
        reaction=_zero_scalar,
        source=_zero_scalar,
        terminal=gaussian_bump(bump_sharpness, c),
        orientation=Orientation.INITIAL_VALUE,
    )


def hjb_problem(
    dim: int = 10,
    horizon: float = 1.0,
    diffusion_scale: float = 0.4,
    center: float = 0.5,
) -> tuple[PdeProblem, float]:
    """Quadratic-cost stochastic control problem, already linearized.

    State cost ``ell(x) = |x - center|^2``, zero terminal cost, identity
    control and weighting matrices.  Returns the linear terminal-value
    problem for the exponentially transformed value function together
    with the transform scale ``lam``.
    """
    c = np.full(dim, center)

    def ell(x):
        diff = np.asarray(x, dtype=float) - c
        return np.sum(diff * diff, axis=-1)

    def g(x):
        return np.zeros(np.shape(x)[:-1])

    I = np.eye(dim)
    return cole_hopf_linearize(ell, g, I, I, diffusion_scale * I, horizon=horizon)
