"""Linear interpolation baseline and the squared L2 error metric."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fkgp
from fkgp.baselines import interpolant, l2_error, linear_interpolate
from fkgp.errors import DomainError


def domain(n, dim=2):
    return fkgp.QueryDomain(0, (0.0, 1.0), np.zeros(dim), n)


class TestLinearInterpolate:
    def test_exact_at_nodes(self):
        dom = domain(5)
        values = np.array([3.0, -1.0, 2.0, 0.5, 7.0])
        for i, pt in enumerate(dom.points()):
            assert linear_interpolate(dom, values, pt) == values[i]

    def test_reproduces_linear_functions(self):
        dom = domain(7)
        values = 2.0 * dom.coordinates() - 0.3
        q = dom.embed(np.linspace(0, 1, 41))
        np.testing.assert_allclose(
            linear_interpolate(dom, values, q), 2.0 * np.linspace(0, 1, 41) - 0.3,
            atol=1e-14,
        )

    def test_quadratic_chord_value(self):
        dom = domain(5)
        values = dom.coordinates() ** 2  # nodes at 0, 0.25, 0.5, 0.75, 1
        got = linear_interpolate(dom, values, dom.embed(np.array([0.125]))[0])
        assert got == pytest.approx(0.03125, abs=1e-15)
        assert got - 0.125**2 == pytest.approx(0.015625, abs=1e-15)

    def test_no_extrapolation(self):
        dom = domain(4)
        with pytest.raises(DomainError):
            linear_interpolate(dom, np.ones(4), dom.embed(np.array([1.5]))[0])

    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            linear_interpolate(domain(2), np.ones(1), np.zeros(2))

    @given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_stays_between_adjacent_nodes(self, vals_list, coord):
        dom = domain(4)
        values = np.asarray(vals_list)
        got = linear_interpolate(dom, values, dom.embed(np.array([coord]))[0])
        nodes = dom.coordinates()
        j = min(np.searchsorted(nodes, coord, side="right"), 3)
        lo, hi = sorted((values[j - 1], values[j]))
        assert lo - 1e-12 <= got <= hi + 1e-12


class TestL2Error:
    def test_identical_functions(self):
        dom = domain(5)
        f = interpolant(dom, np.array([1.0, 2.0, 3.0, 2.0, 1.0]))
        assert l2_error(f, f, dom, quad_points=100) == 0.0

    def test_constant_offset(self):
        dom = domain(5)
        c = 0.7

        def f(x):
            return np.zeros(x.shape[0])

        def g(x):
            return np.full(x.shape[0], c)

        assert l2_error(f, g, dom, quad_points=50) == pytest.approx(c * c, rel=1e-12)

    def test_linear_vs_zero(self):
        dom = domain(5)

        def f(x):
            return np.asarray(x)[..., 0]

        def zero(x):
            return np.zeros(x.shape[0])

        assert l2_error(f, zero, dom, quad_points=1001) == pytest.approx(1 / 3, abs=1e-5)

    def test_symmetric_and_nonnegative(self):
        dom = domain(6)
        rng = np.random.default_rng(0)
        f = interpolant(dom, rng.standard_normal(6))
        g = interpolant(dom, rng.standard_normal(6))
        assert l2_error(f, g, dom) == l2_error(g, f, dom)
        assert l2_error(f, g, dom) >= 0
