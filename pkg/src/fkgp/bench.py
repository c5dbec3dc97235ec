"""Config-driven experiment runner.

Sweeps sample size M, grid size N and seeds for one estimation method on
one benchmark problem, producing machine-readable records: squared L2
error against a configured reference, plus integrated posterior variance
and its spectral lower bound for the regression-based methods.

Outputs are reproducible byte for byte: records are sorted, floats are
serialized with shortest round-trip formatting, and the configuration
hash is embedded in every file.  Wall-clock timings are kept on the
in-memory records (and logged) but deliberately left out of the files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.random import SeedSequence

from . import baselines, uncertainty
from .errors import ConfigError, FkgpError
from .problems import (
    Orientation,
    PdeProblem,
    QueryDomain,
    advection_diffusion_problem,
    cole_hopf_inverse,
    heat_problem,
    hjb_problem,
    reverse_time,
)
from .regression import (
    FitResult,
    HeteroscedasticNoise,
    HomoscedasticNoise,
    fit_posterior,
    optimize_hyperparameters,
)
from .sampling import FkConfig, FkEnsemble, fk_ensemble

logger = logging.getLogger(__name__)

METHODS = ("hsgpr", "gpr", "linear")

# spawn_key tags for randomness derived from a record seed
_OPTIMIZER_STREAM = 0xA1
_EIGEN_STREAM = 0xE1


@dataclass(frozen=True)
class ProblemBundle:
    """A benchmark problem prepared for path sampling.

    ``problem`` is always in terminal-value form.  ``cole_hopf_lambda``
    is set when the sampled problem is an exponential linearization whose
    ensemble must be mapped back before regression.  ``analytic`` is the
    closed-form solution on the slice at the query time, when one exists.
    """

    name: str
    problem: PdeProblem
    cole_hopf_lambda: float | None = None
    analytic: Callable[[np.ndarray], np.ndarray] | None = None


def analytic_reference(problem_name: str, t: float, x: np.ndarray, **params) -> np.ndarray:
    """Closed-form solution of a built-in problem at time ``t``.

    For the pure-diffusion problem with Gaussian-bump start,

        w(t, x) = (1 + 4 s D t)^(-d/2) exp(-s |x - c|^2 / (1 + 4 s D t))

    with D = (diffusion scale)^2 / 2; the drift variant is the same
    profile evaluated at x + b t (the value at x averages the start
    condition over forward paths, which drift toward +b).  The control
    problem has no closed form here and falls back to a large-sample
    path reference.
    """
    if problem_name not in ("heat", "advdiff"):
        raise ConfigError(f"no analytic reference for problem {problem_name!r}")
    dim = params.get("dim", 10)
    sharp = params.get("bump_sharpness", 5.0)
    diffusion_scale = params.get("diffusion_scale", 0.4)
    center = np.full(dim, params.get("center", 0.5))
    x = np.asarray(x, dtype=float)
    if problem_name == "advdiff":
        x = x + params.get("drift_scale", 0.01) * t
    D = 0.5 * diffusion_scale**2
    denom = 1.0 + 4.0 * sharp * D * t
    sq = np.sum((x - center) ** 2, axis=-1)
    return denom ** (-dim / 2.0) * np.exp(-sharp * sq / denom)


def build_problem(spec) -> ProblemBundle:
    """Build a bundle from a name or ``{"name": ..., "params": {...}}``."""
    if isinstance(spec, str):
        name, params = spec, {}
    elif isinstance(spec, dict):
        try:
            name = spec["name"]
        except KeyError:
            raise ConfigError("inline problem spec needs a 'name' field") from None
        params = dict(spec.get("params", {}))
    else:
        raise ConfigError(f"problem must be a name or a mapping, got {type(spec)!r}")

    try:
        if name == "heat":
            prob = heat_problem(**params)
        elif name == "advdiff":
            prob = advection_diffusion_problem(**params)
        elif name == "hjb":
            prob, lam = hjb_problem(**params)
        elif name in _REGISTRY:
            return _REGISTRY[name](**params)
        else:
            raise ConfigError(f"unknown problem {name!r}")
    except TypeError as exc:
        raise ConfigError(f"bad parameters for problem {name!r}: {exc}") from exc

    if name == "hjb":
        return ProblemBundle(name=name, problem=prob, cole_hopf_lambda=lam)

    T = prob.horizon
    if prob.orientation is Orientation.INITIAL_VALUE:
        prob = reverse_time(prob)

    def reference(x, _name=name, _params=params, _T=T):
        return analytic_reference(_name, _T, x, **_params)

    return ProblemBundle(name=name, problem=prob, analytic=reference)


_REGISTRY: dict[str, Callable[..., ProblemBundle]] = {}


def register_problem(name: str, factory: Callable[..., ProblemBundle]):
    """Make a user problem constructible by name from configs."""
    _REGISTRY[name] = factory


def transform_cole_hopf_ensemble(ens: FkEnsemble, lam: float) -> FkEnsemble:
    """Map an ensemble of the linearized problem back to the original scale.

    Means transform exactly through ``-lam log``; variances propagate to
    first order with the squared Jacobian ``(lam / mean)^2``.
    """
    mean = cole_hopf_inverse(ens.mean, lam)
    jac = lam / ens.mean
    return FkEnsemble(
        points=ens.points,
        mean=mean,
        variance=jac * jac * ens.variance,
        sample_size=ens.sample_size,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a problem, a method, and the (M, N, seed) grid."""

    problem: str | dict = "heat"
    method: str = "hsgpr"
    M_list: tuple[int, ...] = (800,)
    N_list: tuple[int, ...] = (20,)
    seeds: tuple[int, ...] = (0,)
    time_steps: int = 100
    smoothness: float = 1.5
    fit_amplitude: bool = True
    restarts: int = 27
    reference: dict = field(
        default_factory=lambda: {"kind": "fk_large", "M": 40000, "N": 40, "seed": 424242}
    )
    quad_points: int = 200
    eigen_samples: int = 200
    domain: dict = field(
        default_factory=lambda: {"axis": 0, "lo": 0.0, "hi": 1.0, "anchor": 0.5}
    )
    out: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "M_list", tuple(int(m) for m in self.M_list))
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (self.M_list and self.N_list and self.seeds):
            raise ConfigError("M_list, N_list and seeds must be nonempty")
        if any(m < 2 for m in self.M_list):
            raise ConfigError("every M must be >= 2")
        if any(n < 2 for n in self.N_list):
            raise ConfigError("every N must be >= 2")
        kind = self.reference.get("kind")
        if kind not in ("analytic", "fk_large"):
            raise ConfigError(f"reference kind must be analytic or fk_large, got {kind!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        # the output destination is not part of the experiment identity
        out = dataclasses.asdict(self)
        del out["out"]
        out["M_list"] = list(self.M_list)
        out["N_list"] = list(self.N_list)
        out["seeds"] = list(self.seeds)
        return out

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass
class ResultRecord:
    """One (M, N, seed) outcome for one method."""

    problem: str
    method: str
    M: int
    N: int
    seed: int
    l2_error: float
    imse: float | None = None
    l_imse: float | None = None
    r_min_estimate: float | None = None
    length_scale: float | None = None
    amplitude: float | None = None
    noise_variance: float | None = None
    cole_hopf_lambda: float | None = None
    fit_jitter: float | None = None
    error: str | None = None
    wall_seconds: float = 0.0

    _SERIALIZED = (
        "problem",
        "method",
        "M",
        "N",
        "seed",
        "l2_error",
        "imse",
        "l_imse",
        "r_min_estimate",
        "length_scale",
        "amplitude",
        "noise_variance",
        "cole_hopf_lambda",
        "fit_jitter",
        "error",
    )

    def to_dict(self) -> dict:
        # wall_seconds stays off the record on disk so reruns are byte-identical
        return {k: getattr(self, k) for k in self._SERIALIZED}


def _domain_for(config: ExperimentConfig, dim: int, N: int) -> QueryDomain:
    d = config.domain
    anchor = d.get("anchor", 0.5)
    anchor_vec = np.full(dim, float(anchor)) if np.isscalar(anchor) else np.asarray(anchor)
    return QueryDomain(
        slice_axis=int(d.get("axis", 0)),
        slice_range=(float(d.get("lo", 0.0)), float(d.get("hi", 1.0))),
        anchor=anchor_vec,
        grid_points=N,
    )


def _ensemble_for(
    bundle: ProblemBundle, domain: QueryDomain, fk: FkConfig
) -> FkEnsemble:
    ens = fk_ensemble(bundle.problem, domain, fk)
    if bundle.cole_hopf_lambda is not None:
        ens = transform_cole_hopf_ensemble(ens, bundle.cole_hopf_lambda)
    return ens


@lru_cache(maxsize=8)
def _cached_reference_values(
    problem_key: str, M: int, N: int, time_steps: int, seed: int, domain_key: tuple
):
    """Large-sample path reference, cached per problem and size."""
    bundle = build_problem(json.loads(problem_key))
    axis, lo, hi, anchor = domain_key
    domain = QueryDomain(
        slice_axis=axis,
        slice_range=(lo, hi),
        anchor=np.full(bundle.problem.dim, anchor)
        if np.isscalar(anchor)
        else np.asarray(anchor),
        grid_points=N,
    )
    ens = _ensemble_for(bundle, domain, FkConfig(time_steps=time_steps, sample_size=M, seed=seed))
    return domain, ens


def build_reference(
    config: ExperimentConfig, bundle: ProblemBundle
) -> Callable[[np.ndarray], np.ndarray]:
    """Reference function on the slice per the configured kind."""
    kind = config.reference["kind"]
    if kind == "analytic":
        if bundle.analytic is None:
            raise ConfigError(
                f"problem {bundle.name!r} has no analytic reference; use fk_large"
            )
        return bundle.analytic
    ref = config.reference
    d = config.domain
    anchor = d.get("anchor", 0.5)
    domain_key = (
        int(d.get("axis", 0)),
        float(d.get("lo", 0.0)),
        float(d.get("hi", 1.0)),
        float(anchor) if np.isscalar(anchor) else tuple(anchor),
    )
    problem_key = json.dumps(
        config.problem if isinstance(config.problem, dict) else {"name": config.problem},
        sort_keys=True,
    )
    ref_domain, ens = _cached_reference_values(
        problem_key,
        int(ref.get("M", 40000)),
        int(ref.get("N", 40)),
        config.time_steps,
        int(ref.get("seed", 424242)),
        domain_key,
    )
    return baselines.interpolant(ref_domain, ens.mean)


def _run_tuple(
    config: ExperimentConfig,
    bundle: ProblemBundle,
    reference: Callable[[np.ndarray], np.ndarray],
    M: int,
    N: int,
    seed: int,
) -> ResultRecord:
    start = time.perf_counter()
    domain = _domain_for(config, bundle.problem.dim, N)
    ens = _ensemble_for(
        bundle, domain, FkConfig(time_steps=config.time_steps, sample_size=M, seed=seed)
    )
    record = ResultRecord(
        problem=bundle.name,
        method=config.method,
        M=M,
        N=N,
        seed=seed,
        l2_error=float("nan"),
        cole_hopf_lambda=bundle.cole_hopf_lambda,
    )

    if config.method == "linear":
        estimate = baselines.interpolant(domain, ens.mean)
    else:
        opt_seed = int(
            SeedSequence(seed, spawn_key=(_OPTIMIZER_STREAM,)).generate_state(1)[0]
        )
        if config.method == "hsgpr":
            noise = HeteroscedasticNoise(ens.variance, ens.sample_size)
        else:
            noise = HomoscedasticNoise(1.0)  # replaced by the fitted value
        fit: FitResult = optimize_hyperparameters(
            ens.points,
            ens.mean,
            noise,
            restarts=config.restarts,
            seed=opt_seed,
            smoothness=config.smoothness,
            fit_amplitude=config.fit_amplitude,
        )
        post = fit_posterior(fit.spec, ens.points, ens.mean, fit.noise)
        estimate = post.mean
        record.length_scale = fit.spec.length_scale
        record.amplitude = fit.spec.amplitude
        if isinstance(fit.noise, HomoscedasticNoise):
            record.noise_variance = fit.noise.variance
        record.fit_jitter = post.factor.jitter_used if post.factor is not None else 0.0
        record.imse = uncertainty.imse(post, domain, config.quad_points)
        eigen_seed = int(
            SeedSequence(seed, spawn_key=(_EIGEN_STREAM,)).generate_state(1)[0]
        )
        eigen = uncertainty.estimate_eigenvalues(
            fit.spec, domain, S=config.eigen_samples, seed=eigen_seed
        )
        record.r_min_estimate = uncertainty.r_min_estimate(ens)
        record.l_imse = uncertainty.imse_lower_bound(
            eigen, record.r_min_estimate, N, M
        )

    record.l2_error = baselines.l2_error(estimate, reference, domain, config.quad_points)
    record.wall_seconds = time.perf_counter() - start
    return record


def run_experiment(config: ExperimentConfig) -> list[ResultRecord]:
    """Run every (M, N, seed) tuple; failures are recorded, not raised.

    Records come back sorted by (M, N, seed).  A tuple that raises keeps
    its coordinates and carries the error message in ``error``.
    """
    bundle = build_problem(config.problem)
    reference = build_reference(config, bundle)
    records = []
    for M in config.M_list:
        for N in config.N_list:
            for seed in config.seeds:
                try:
                    rec = _run_tuple(config, bundle, reference, M, N, seed)
                except FkgpError as exc:
                    logger.warning("tuple (M=%d, N=%d, seed=%d) failed: %s", M, N, seed, exc)
                    rec = ResultRecord(
                        problem=bundle.name,
                        method=config.method,
                        M=M,
                        N=N,
                        seed=seed,
                        l2_error=float("nan"),
                        error=str(exc),
                    )
                logger.info(
                    "%s M=%d N=%d seed=%d: l2=%.3e (%.2fs)",
                    config.method,
                    M,
                    N,
                    seed,
                    rec.l2_error,
                    rec.wall_seconds,
                )
                records.append(rec)
    records.sort(key=lambda r: (r.M, r.N, r.seed))
    return records


@dataclass(frozen=True)
class SummaryRow:
    """Mean and standard error across seeds for one (method, M, N) cell."""

    method: str
    M: int
    N: int
    n_seeds: int
    l2_mean: float
    l2_stderr: float
    imse_mean: float | None
    imse_stderr: float | None
    l_imse_mean: float | None
    single_seed: bool


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(np.mean(arr))
    if arr.size < 2:
        return mean, 0.0
    return mean, float(np.std(arr, ddof=1) / np.sqrt(arr.size))


def summarize(records: list[ResultRecord]) -> list[SummaryRow]:
    """Aggregate per (method, M, N); one-seed cells are flagged."""
    groups: dict[tuple, list[ResultRecord]] = {}
    for rec in records:
        if rec.error is not None:
            continue
        groups.setdefault((rec.method, rec.M, rec.N), []).append(rec)
    rows = []
    for (method, M, N), group in sorted(groups.items()):
        l2_mean, l2_se = _mean_stderr([r.l2_error for r in group])
        imse_vals = [r.imse for r in group if r.imse is not None]
        if imse_vals:
            imse_mean, imse_se = _mean_stderr(imse_vals)
        else:
            imse_mean = imse_se = None
        l_vals = [r.l_imse for r in group if r.l_imse is not None]
        l_mean = float(np.mean(l_vals)) if l_vals else None
        rows.append(
            SummaryRow(
                method=method,
                M=M,
                N=N,
                n_seeds=len(group),
                l2_mean=l2_mean,
                l2_stderr=l2_se,
                imse_mean=imse_mean,
                imse_stderr=imse_se,
                l_imse_mean=l_mean,
                single_seed=len(group) == 1,
            )
        )
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def write_results(records: list[ResultRecord], config: ExperimentConfig, out_prefix: str):
    """Write ``<prefix>.jsonl`` (records) and ``<prefix>.summary.csv``.

    Both files start with the configuration hash and are byte-identical
    across reruns of the same configuration.
    """
    cfg_hash = config.hash()
    jsonl_path = f"{out_prefix}.jsonl"
    with open(jsonl_path, "w") as fh:
        header = {"config_hash": cfg_hash, "config": config.to_dict()}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")

    csv_path = f"{out_prefix}.summary.csv"
    with open(csv_path, "w") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(
            "method,M,N,n_seeds,l2_mean,l2_stderr,imse_mean,imse_stderr,l_imse_mean,single_seed\n"
        )
        for row in summarize(records):
            fh.write(
                ",".join(
                    [
                        row.method,
                        str(row.M),
                        str(row.N),
                        str(row.n_seeds),
                        _fmt(row.l2_mean),
                        _fmt(row.l2_stderr),
                        _fmt(row.imse_mean),
                        _fmt(row.imse_stderr),
                        _fmt(row.l_imse_mean),
                        str(row.single_seed).lower(),
                    ]
                )
                + "\n"
            )
    return jsonl_path, csv_path
