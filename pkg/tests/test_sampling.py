"""Path simulation, the path functional, and ensemble statistics."""

import numpy as np
import pytest

import fkgp
from fkgp.errors import CoefficientError, PathBlowupError
from fkgp.sampling import _CHUNK, sample_stream


def make_problem(dim=3, drift=None, diffusion=None, reaction=None, source=None,
                 terminal=None, horizon=1.0):
    return fkgp.PdeProblem(
        dim=dim,
        noise_dim=dim,
        horizon=horizon,
        drift=drift or (lambda t, x: np.zeros(np.shape(x))),
        diffusion=diffusion or (lambda t, x: np.zeros((dim, dim))),
        reaction=reaction or (lambda t, x: np.zeros(np.shape(x)[:-1])),
        source=source or (lambda t, x: np.zeros(np.shape(x)[:-1])),
        terminal=terminal or (lambda x: np.zeros(np.shape(x)[:-1])),
    )


class TestEulerMaruyama:
    def test_constant_drift_is_exact(self):
        e1 = np.array([1.0, 0.0, 0.0])
        prob = make_problem(drift=lambda t, x: np.broadcast_to(e1, np.shape(x)))
        x0 = np.array([0.5, 0.5, 0.5])
        # K a power of two keeps the time step exactly representable
        times, states = fkgp.euler_maruyama_path(prob, x0, 0.0, fkgp.FkConfig(64, 2, 0), 7)
        np.testing.assert_array_equal(states[0], x0)
        np.testing.assert_array_equal(states[-1], x0 + e1)
        assert times[0] == 0.0 and times[-1] == pytest.approx(1.0, abs=1e-15)

    def test_diffusion_moments(self):
        """Terminal mean stays at the start and variance matches a^2 T.

        Checked through the path functional with condition x -> x_1, which
        equals the terminal state coordinate when there is no discounting.
        """
        scale = 0.4
        prob = make_problem(
            diffusion=lambda t, x, s=scale: s * np.eye(3),
            terminal=lambda x: np.asarray(x)[..., 0],
        )
        x0 = np.array([0.5, 0.5, 0.5])
        M = 40000
        vals = fkgp.fk_values(prob, x0, 0.0, fkgp.FkConfig(10, M, 42), point_index=0)
        sigma_mean = scale / np.sqrt(M)
        assert abs(np.mean(vals) - 0.5) < 4 * sigma_mean
        # unbiased variance of the terminal coordinate: a^2 T within 5 percent
        assert np.var(vals, ddof=1) == pytest.approx(scale**2, rel=0.05)

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_blowup_reports_step(self):
        prob = make_problem(drift=lambda t, x: np.asarray(x) * 1e6)
        with pytest.raises(PathBlowupError) as exc:
            fkgp.euler_maruyama_path(
                prob, np.ones(3), 0.0, fkgp.FkConfig(100, 2, 0), 0
            )
        assert exc.value.step >= 1

    def test_t0_validation(self):
        prob = make_problem()
        with pytest.raises(ValueError):
            fkgp.euler_maruyama_path(prob, np.ones(3), 1.0, fkgp.FkConfig(10, 2, 0), 0)


class TestFkSample:
    def test_no_discount_no_source_reduces_to_condition(self):
        """With c = h = 0 the functional equals g at the terminal state of
        the same path, reproduced here with the standalone path simulator."""
        prob = make_problem(
            diffusion=lambda t, x: 0.4 * np.eye(3),
            terminal=lambda x: np.asarray(x)[..., 0],
        )
        cfg = fkgp.FkConfig(30, 2, 0)
        seed = sample_stream(5, 0, 0)
        out = fkgp.fk_sample(prob, np.zeros(3), 0.0, cfg, seed)
        _, states = fkgp.euler_maruyama_path(
            prob, np.zeros(3), 0.0, cfg, sample_stream(5, 0, 0)
        )
        assert out == pytest.approx(states[-1][0], rel=1e-12)

    def test_unit_discount(self):
        prob = make_problem(
            reaction=lambda t, x: np.ones(np.shape(x)[:-1]),
            terminal=lambda x: np.ones(np.shape(x)[:-1]),
        )
        out = fkgp.fk_sample(prob, np.zeros(3), 0.0, fkgp.FkConfig(100, 2, 0), 0)
        assert out == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_constant_source_integrates_exactly(self):
        prob = make_problem(source=lambda t, x: np.ones(np.shape(x)[:-1]))
        out = fkgp.fk_sample(prob, np.zeros(3), 0.0, fkgp.FkConfig(37, 2, 0), 0)
        assert out == pytest.approx(1.0, abs=1e-12)

    def test_requires_terminal_orientation(self):
        with pytest.raises(ValueError, match="reverse_time"):
            fkgp.fk_sample(
                fkgp.heat_problem(), np.full(10, 0.5), 0.0, fkgp.FkConfig(10, 2, 0), 0
            )

    def test_nan_source_is_reported(self):
        prob = make_problem(
            source=lambda t, x: np.full(np.shape(x)[:-1], np.nan)
        )
        with pytest.raises(CoefficientError) as exc:
            fkgp.fk_sample(prob, np.zeros(3), 0.0, fkgp.FkConfig(10, 2, 0), 0)
        assert exc.value.coefficient == "source"

    def test_quadrature_order_is_two(self):
        """Unit killing rate with unit source: the exact value is
        int_0^1 e^(-s) ds + e^(-1) = 1, and the trapezoidal error of the
        outer integral decays as K^-2."""
        prob = make_problem(
            reaction=lambda t, x: np.ones(np.shape(x)[:-1]),
            source=lambda t, x: np.ones(np.shape(x)[:-1]),
            terminal=lambda x: np.ones(np.shape(x)[:-1]),
        )
        ks = np.array([10, 20, 40, 80])
        errs = [
            abs(fkgp.fk_sample(prob, np.zeros(3), 0.0, fkgp.FkConfig(int(k), 2, 0), 0) - 1.0)
            for k in ks
        ]
        slope = np.polyfit(np.log(ks), np.log(errs), 1)[0]
        assert slope == pytest.approx(-2.0, abs=0.2)


class TestFkEnsemble:
    def test_deterministic_problem_has_zero_variance(self):
        prob = make_problem(terminal=lambda x: np.asarray(x)[..., 0])
        dom = fkgp.QueryDomain(0, (0.0, 1.0), np.zeros(3), 5)
        ens = fkgp.fk_ensemble(prob, dom, fkgp.FkConfig(10, 5, 0))
        np.testing.assert_array_equal(ens.mean, dom.points()[:, 0])
        np.testing.assert_array_equal(ens.variance, np.zeros(5))

    def test_bit_identical_reruns(self, heat_terminal, slice_domain):
        dom = slice_domain(4)
        cfg = fkgp.FkConfig(20, 50, 123)
        a = fkgp.fk_ensemble(heat_terminal, dom, cfg)
        b = fkgp.fk_ensemble(heat_terminal, dom, cfg)
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.variance, b.variance)

    def test_matches_single_sample_api(self, heat_terminal, slice_domain):
        """Each ensemble entry reproduces the standalone sample drawn from
        the stream derived for that (point, sample) pair."""
        dom = slice_domain(3)
        cfg = fkgp.FkConfig(10, 6, 99)
        pts = dom.points()
        for i in range(3):
            vals = fkgp.fk_values(heat_terminal, pts[i], 0.0, cfg, point_index=i)
            for j in (0, 3, 5):
                single = fkgp.fk_sample(
                    heat_terminal, pts[i], 0.0, cfg, sample_stream(99, i, j)
                )
                assert vals[j] == pytest.approx(single, rel=1e-12)

    def test_chunk_boundaries_are_invisible(self):
        """Sample values around the internal vectorization boundary agree
        with the per-sample evaluation path."""
        prob = make_problem(
            dim=2,
            diffusion=lambda t, x: np.eye(2),
            terminal=lambda x: np.sum(np.asarray(x) ** 2, axis=-1),
        )
        cfg = fkgp.FkConfig(5, _CHUNK + 3, 17)
        vals = fkgp.fk_values(prob, np.zeros(2), 0.0, cfg, point_index=0)
        for j in (_CHUNK - 1, _CHUNK, _CHUNK + 2):
            single = fkgp.fk_sample(prob, np.zeros(2), 0.0, cfg, sample_stream(17, 0, j))
            assert vals[j] == pytest.approx(single, rel=1e-12)

    def test_requires_terminal_orientation(self, slice_domain):
        with pytest.raises(ValueError, match="reverse_time"):
            fkgp.fk_ensemble(fkgp.heat_problem(), slice_domain(3), fkgp.FkConfig(10, 2, 0))

    def test_sample_size_floor(self):
        with pytest.raises(ValueError):
            fkgp.FkConfig(10, 1, 0)
        with pytest.raises(ValueError):
            fkgp.FkConfig(0, 5, 0)

    @pytest.mark.slow
    def test_standardized_residuals_stay_bounded(self, heat_terminal, slice_domain):
        """The path functional is an unbiased estimate: standardized means
        against the closed-form solution stay within 4 sigma at nearly
        every point for nearly every seed."""
        from fkgp.bench import analytic_reference

        dom = slice_domain(10)
        truth = analytic_reference("heat", 1.0, dom.points())
        M = 10_000
        good = 0
        seeds = range(10)
        for seed in seeds:
            # constant coefficients make the path scheme exact in
            # distribution at any step count, so few steps suffice here
            ens = fkgp.fk_ensemble(heat_terminal, dom, fkgp.FkConfig(20, M, seed))
            z = (ens.mean - truth) / np.sqrt(ens.variance / M)
            if np.all(np.abs(z) <= 4.0):
                good += 1
        assert good >= 9
