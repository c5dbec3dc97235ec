"""Command-line front end.

Subcommands:

* ``solve``    one (M, N, seed) run, prints the estimate per grid point
* ``sweep``    full experiment from a config file, writes jsonl + csv
* ``bounds``   uncertainty report for one run, prints JSON
* ``validate`` randomized coefficient regularity probe

Exit codes: 0 success, 1 at least one sweep tuple failed, 2 bad config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import bench, uncertainty
from .bench import ExperimentConfig, build_problem, build_reference
from .errors import ConfigError, FkgpError
from .problems import validate_lipschitz
from .regression import (
    HeteroscedasticNoise,
    HomoscedasticNoise,
    fit_posterior,
    optimize_hyperparameters,
)
from .sampling import FkConfig


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--problem", help="problem name (heat, advdiff, hjb)")
    parser.add_argument("--method", choices=bench.METHODS)
    parser.add_argument("--M", help="comma-separated sample sizes")
    parser.add_argument("--N", help="comma-separated grid sizes")
    parser.add_argument("--seeds", help="comma-separated seeds")
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--out", help="output path prefix")


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            raw = json.load(fh)
    if getattr(args, "problem", None):
        raw["problem"] = args.problem
    if getattr(args, "method", None):
        raw["method"] = args.method
    if getattr(args, "M", None):
        raw["M_list"] = _parse_int_list(args.M)
    if getattr(args, "N", None):
        raw["N_list"] = _parse_int_list(args.N)
    if getattr(args, "seeds", None):
        raw["seeds"] = _parse_int_list(args.seeds)
    if getattr(args, "restarts", None) is not None:
        raw["restarts"] = args.restarts
    if getattr(args, "out", None):
        raw["out"] = args.out
    return ExperimentConfig.from_dict(raw)


def _single_run_pieces(config: ExperimentConfig):
    """Ensemble + fitted posterior for the first (M, N, seed) tuple."""
    bundle = build_problem(config.problem)
    M, N, seed = config.M_list[0], config.N_list[0], config.seeds[0]
    domain = bench._domain_for(config, bundle.problem.dim, N)
    ens = bench._ensemble_for(
        bundle, domain, FkConfig(time_steps=config.time_steps, sample_size=M, seed=seed)
    )
    post = None
    if config.method in ("hsgpr", "gpr"):
        if config.method == "hsgpr":
            noise = HeteroscedasticNoise(ens.variance, ens.sample_size)
        else:
            noise = HomoscedasticNoise(1.0)
        fit = optimize_hyperparameters(
            ens.points,
            ens.mean,
            noise,
            restarts=config.restarts,
            seed=seed,
            smoothness=config.smoothness,
            fit_amplitude=config.fit_amplitude,
        )
        post = fit_posterior(fit.spec, ens.points, ens.mean, fit.noise)
    return bundle, domain, ens, post


def _cmd_solve(args) -> int:
    config = _load_config(args)
    bundle, domain, ens, post = _single_run_pieces(config)
    coords = domain.coordinates()
    print(f"problem={bundle.name} method={config.method} "
          f"M={config.M_list[0]} N={config.N_list[0]} seed={config.seeds[0]}")
    if bundle.cole_hopf_lambda is not None:
        print(f"cole_hopf_lambda={bundle.cole_hopf_lambda}")
    if post is not None:
        print(f"fitted length_scale={post.spec.length_scale:.6g} "
              f"amplitude={post.spec.amplitude:.6g}")
        mean = post.mean(ens.points)
        std = np.sqrt(post.variance(ens.points))
        print(f"{'x':>10} {'fk_mean':>14} {'post_mean':>14} {'post_std':>14}")
        for c, fk, m, s in zip(coords, ens.mean, mean, std):
            print(f"{c:>10.4f} {fk:>14.6e} {m:>14.6e} {s:>14.6e}")
    else:
        print(f"{'x':>10} {'fk_mean':>14} {'fk_var':>14}")
        for c, fk, v in zip(coords, ens.mean, ens.variance):
            print(f"{c:>10.4f} {fk:>14.6e} {v:>14.6e}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    records = bench.run_experiment(config)
    jsonl_path, csv_path = bench.write_results(records, config, config.out)
    failures = [r for r in records if r.error is not None]
    print(f"wrote {jsonl_path} and {csv_path} ({len(records)} records, "
          f"{len(failures)} failed)")
    return 1 if failures else 0


def _cmd_bounds(args) -> int:
    config = _load_config(args)
    if config.method == "linear":
        raise ConfigError("uncertainty bounds require a regression method")
    bundle, domain, ens, post = _single_run_pieces(config)
    eigen = uncertainty.estimate_eigenvalues(
        post.spec, domain, S=config.eigen_samples, seed=config.seeds[0]
    )
    report = uncertainty.build_report(
        post,
        ens,
        domain,
        eigen,
        quad_points=config.quad_points,
        epsilon=args.epsilon,
        delta=args.delta,
    )
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_validate(args) -> int:
    config = _load_config(args)
    bundle = build_problem(config.problem)
    report = validate_lipschitz(bundle.problem, probe_count=args.probes, seed=config.seeds[0])
    print(f"problem={bundle.name} probes={report.probe_count}")
    for name, ratio in report.lipschitz_ratios.items():
        print(f"  max |d{name}|/|dx| = {ratio:.6g}")
    print(f"  reaction bounded: {report.reaction_bounded} "
          f"(max |c| = {report.reaction_max_abs:.6g})")
    if report.failures:
        print(f"  FAILURES ({len(report.failures)}):")
        for coef, t, x in report.failures[:10]:
            print(f"    {coef} non-finite at t={t:.4f}, x={np.array2string(x, precision=4)}")
    else:
        print("  no non-finite values detected")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fkgp",
        description="Mesh-free Kolmogorov PDE solver with uncertainty bounds",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="single run, print the estimate table")
    _add_common(p_solve)
    p_solve.set_defaults(fn=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="full experiment sweep to jsonl + csv")
    _add_common(p_sweep)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_bounds = sub.add_parser("bounds", help="uncertainty report for one run")
    _add_common(p_bounds)
    p_bounds.add_argument("--epsilon", type=float, default=None)
    p_bounds.add_argument("--delta", type=float, default=0.0)
    p_bounds.set_defaults(fn=_cmd_bounds)

    p_val = sub.add_parser("validate", help="probe coefficient regularity")
    _add_common(p_val)
    p_val.add_argument("--probes", type=int, default=200)
    p_val.set_defaults(fn=_cmd_validate)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FkgpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
