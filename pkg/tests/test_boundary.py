import math

import mpmath as mp
import numpy as np
import pytest
from conftest import solved
from hypothesis import given, settings
from hypothesis import strategies as st

from fbm_seqtest import boundary as bd
from fbm_seqtest.boundary import (BoundaryTable, RangeError, SolverError, SolverOptions,
                                  boundary_at, boundary_cap, boundary_grid, check_table,
                                  f_func, g_func, residual, solve_boundary)
from fbm_seqtest.model import ModelParams, cost_rate
from fbm_seqtest.specfun import DomainError

PHI0 = 1 / math.sqrt(2 * math.pi)
# E|zeta sqrt(0.5) + 1.3| - 1.3 by mpmath quadrature at 50 digits
G_REF = 0.018314321820883006744
# 32 (Phi(0.2) - Phi(-0.6)), mpmath
F_REF = 9.7602109340489420701


class TestG:
    def test_examples(self):
        assert g_func(1.0, 2.0) == 0.0
        assert g_func(1.0, -2.0) == 4.0
        assert g_func(0.75, 0.0) == pytest.approx(2 * 0.5 * PHI0, rel=1e-15)
        assert g_func(0.5, 1.3) == pytest.approx(G_REF, abs=1e-10)

    def test_domain(self):
        with pytest.raises(DomainError):
            g_func(1.2, 0.0)

    @given(st.floats(0, 1), st.floats(-20, 20))
    def test_properties(self, t, x):
        g = g_func(t, x)
        assert g >= -1e-15
        # E|.| - x with |.| even in the mean shift: G(t, -x) = G(t, x) + 2x
        assert g_func(t, -x) == pytest.approx(g + 2 * x, abs=1e-12)

    def test_against_quadrature(self):
        mp.mp.dps = 30
        for t, x in [(0.1, 0.4), (0.9, -0.2), (0.3, 2.5)]:
            sd = mp.sqrt(1 - t)
            ref = mp.quad(lambda z: abs(z * sd + x) * mp.npdf(z), [-mp.inf, -x / sd, mp.inf]) - x
            assert g_func(t, x) == pytest.approx(float(ref), abs=1e-12)


class TestF:
    def test_examples(self):
        c = ModelParams(0, 1, 0.5).consts
        assert f_func(0.5, 0.3, 0.75, 0.0, c) == 0.0
        assert f_func(0.5, 0.0, 0.75, 1e3, c) == pytest.approx(cost_rate(0.75, c), rel=1e-14)
        assert f_func(0.5, 0.1, 0.75, 0.2, c) == pytest.approx(F_REF, rel=1e-13)

    def test_monte_carlo(self):
        c = ModelParams(0, 1, 0.5).consts
        zeta = np.random.default_rng(7).standard_normal(200000)
        hit = np.abs(zeta * math.sqrt(0.25) + 0.1) <= 0.2
        est, se = 32 * hit.mean(), 32 * hit.std(ddof=1) / math.sqrt(hit.size)
        assert abs(f_func(0.5, 0.1, 0.75, 0.2, c) - est) < 3 * se

    def test_domain(self):
        c = ModelParams(0, 1, 0.5).consts
        with pytest.raises(DomainError):
            f_func(0.5, 0.0, 0.5, 1.0, c)
        with pytest.raises(DomainError):
            f_func(0.5, 0.0, 1.0, 1.0, c)

    @given(st.floats(-40, 40), st.floats(-40, 40))
    def test_normal_mass_against_mpmath(self, x, y):
        lo, hi = min(x, y), max(x, y)
        # tail difference on the side away from the mode, with enough digits
        # to survive the cancellation for very narrow intervals
        width = hi - lo
        extra = int(-math.log10(width)) if 0 < width < 1 else 0
        with mp.workdps(40 + extra + int(max(abs(lo), abs(hi)) ** 2 / 4.6)):
            if lo > 0:
                ref = mp.ncdf(-lo) - mp.ncdf(-hi)
            else:
                ref = mp.ncdf(hi) - mp.ncdf(lo)
        got = float(bd._normal_mass(lo, hi))
        assert got == pytest.approx(float(ref), rel=1e-11, abs=1e-300)


class TestCap:
    def test_example(self):
        c = ModelParams(0, 1, 0.5).consts
        assert boundary_cap(0.9, c) == pytest.approx(0.025, rel=1e-14)

    def test_below_two_t0(self):
        c = ModelParams(0, 1, 0.3).consts
        flat = 1 / (2 * cost_rate(c.t0, c))
        for t in (0.01, c.t0, 2 * c.t0):
            assert boundary_cap(t, c) == flat
        with pytest.raises(DomainError):
            boundary_cap(0.0, c)


class TestSolvedTable:
    @pytest.mark.parametrize("h", [0.3, 0.5, 0.7])
    def test_structure(self, h):
        tab = solved(h, 250)
        assert all(check_table(tab).values())
        assert tab.grid[-1] == 1.0 and tab.a_values[-1] == 0.0
        assert tab.grid[0] == pytest.approx(tab.t0 + 1e-4)
        assert tab.meta["converged"] and tab.meta["max_residual"] <= 5e-3

    def test_bound_example(self):
        assert boundary_at(solved(0.5, 250), 0.9) <= 0.025

    def test_residual_tolerance(self):
        tab = solved(0.5, 250)
        assert residual(tab) <= 5e-3
        assert residual(tab) == tab.meta["max_residual"]

    def test_doubled_table_is_worse(self):
        tab = solved(0.5, 250)
        assert residual(tab.scaled(2.0)) > residual(tab)

    def test_zero_table(self):
        p = ModelParams(0, 1, 0.5)
        zero = BoundaryTable.constant(p, 0.0)
        pts = zero.grid[1:-1]
        assert residual(zero) == pytest.approx(float(np.max(g_func(pts, 0.0))), rel=1e-12)
        assert residual(zero) == pytest.approx(2 * math.sqrt(1 - zero.grid[1]) * PHI0,
                                               rel=1e-12)

    def test_refinement_does_not_increase_residual(self):
        assert residual(solved(0.5, 500)) <= residual(solved(0.5, 250))

    def test_solution_invariance(self):
        coarse, fine = solved(0.5, 250), solved(0.5, 500)
        pts = np.linspace(coarse.grid[0], 0.999, 400)
        diff = np.max(np.abs(boundary_at(coarse, pts) - boundary_at(fine, pts)))
        assert diff <= 2 * coarse.meta["residual_tol"]

    def test_mu_independence(self):
        a = solve_boundary(ModelParams(0.0, 1.0, 0.7), 60)
        b = solve_boundary(ModelParams(2.5, 1.0, 0.7), 60)
        assert a == b

    def test_extended_below_t0(self):
        tab = solved(0.3, 250, extend=True)
        assert tab.grid[0] == pytest.approx(1e-4) and tab.grid[0] < tab.t0
        assert tab.meta["extend_below_t0"]
        assert all(check_table(tab).values())

    @settings(max_examples=6)
    @given(st.floats(0.2, 0.85), st.floats(0.5, 2.0))
    def test_structure_random_params(self, h, sigma):
        tab = solve_boundary(ModelParams(0, sigma, h), 60)
        assert all(check_table(tab).values())


class TestBoundaryAt:
    def test_examples(self):
        tab = solved(0.5, 250)
        assert boundary_at(tab, 1.0) == 0.0
        k = 37
        assert boundary_at(tab, tab.grid[k]) == tab.a_values[k]
        mid = 0.5 * (tab.grid[k] + tab.grid[k + 1])
        assert boundary_at(tab, mid) == pytest.approx(
            0.5 * (tab.a_values[k] + tab.a_values[k + 1]), rel=1e-14)

    def test_range(self):
        tab = solved(0.5, 250)
        with pytest.raises(RangeError):
            boundary_at(tab, tab.grid[0] / 2)
        with pytest.raises(RangeError):
            residual(tab, [tab.grid[0]])


class TestSolverErrors:
    def test_small_grid(self):
        with pytest.raises(ValueError):
            solve_boundary(ModelParams(0, 1, 0.5), 49)

    def test_bracket_failure(self, monkeypatch):
        monkeypatch.setattr(bd, "boundary_cap", lambda t, c: 1e-12)
        with pytest.raises(SolverError, match="no sign change"):
            solve_boundary(ModelParams(0, 1, 0.5), 50)

    def test_grid_layout(self):
        p = ModelParams(0, 1, 0.3)
        g = boundary_grid(p, 100, SolverOptions())
        assert g[0] == pytest.approx(p.consts.t0 + 1e-4) and g[-1] == 1.0
        # graded toward 1
        assert np.diff(g)[-1] < np.diff(g)[0]

    def test_table_validation(self):
        p = ModelParams(0, 1, 0.5)
        with pytest.raises(ValueError):
            BoundaryTable.for_params(p, [0.5, 0.9], [0.1, 0.0])
        with pytest.raises(ValueError):
            BoundaryTable.for_params(p, [0.5, 1.0], [-0.1, 0.0])
