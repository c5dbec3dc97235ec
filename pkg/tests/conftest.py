"""Shared fixtures: benchmark problems and a reusable fitted posterior."""

import numpy as np
import pytest

import fkgp


@pytest.fixture(scope="session")
def heat_terminal():
    """The pure-diffusion benchmark, converted to terminal-value form."""
    return fkgp.reverse_time(fkgp.heat_problem())


@pytest.fixture(scope="session")
def slice_domain():
    """Unit-interval slice through the 10-d benchmark anchor."""
    def make(n, dim=10):
        return fkgp.QueryDomain(
            slice_axis=0,
            slice_range=(0.0, 1.0),
            anchor=np.full(dim, 0.5),
            grid_points=n,
        )
    return make


@pytest.fixture(scope="session")
def heat_posterior(heat_terminal, slice_domain):
    """Fitted heteroscedastic posterior on the benchmark slice (M=800, N=20)."""
    domain = slice_domain(20)
    ens = fkgp.fk_ensemble(heat_terminal, domain, fkgp.FkConfig(100, 800, 0))
    fit = fkgp.optimize_hyperparameters(
        ens.points, ens.mean, fkgp.HeteroscedasticNoise(ens.variance, 800),
        restarts=8, seed=1,
    )
    post = fkgp.fit_posterior(fit.spec, ens.points, ens.mean, fit.noise)
    return domain, ens, post


def riccati_value(x0_coords, dim=10, horizon=1.0, diffusion_scale=0.4):
    """Closed-form cost-to-go of the quadratic control benchmark on the slice.

    The quadratic ansatz v(t, x) = p(t) |x - c|^2 + q(t) reduces the
    nonlinear equation to p' = 2 p^2 - 1 with p(T) = 0, solved by
    p(t) = tanh(sqrt(2) (T - t)) / sqrt(2), and
    q(t) = (a^2 d / 2) log cosh(sqrt(2) (T - t)).
    """
    s = np.sqrt(2.0)
    p0 = np.tanh(s * horizon) / s
    q0 = diffusion_scale**2 * dim * 0.5 * np.log(np.cosh(s * horizon))
    return p0 * (np.asarray(x0_coords) - 0.5) ** 2 + q0
