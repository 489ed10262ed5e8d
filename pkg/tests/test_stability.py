import math

import numpy as np
import pytest

from biharm.closed_form import ExpPolySolution
from biharm.euler_lagrange import DiscreteFunction, Grid
from biharm.lagrangian import Cylinder, TorusToSphere
from biharm.solver import SolveConfig, clamped_from_curve, linear_initial, solve
from biharm.stability import (
    NotCriticalError,
    analyze_stability,
    quad_form_vs_analytic,
    quadratic_form,
    second_variation_mode,
)


def constant(k, value, n=128):
    geom = TorusToSphere(k)
    return geom, DiscreteFunction(Grid.for_geometry(geom, n), np.full(n, value))


def test_second_variation_closed_form():
    assert second_variation_mode(1, 0) == pytest.approx(-4 * math.pi)
    assert second_variation_mode(1, 1) == 0.0
    assert second_variation_mode(2, 3) == pytest.approx(2 * math.pi * (81 - 16))


@pytest.mark.parametrize("mode", [0, 2, 3])
def test_discrete_quadratic_form_tracks_true_second_variation(mode):
    disc, printed = quad_form_vs_analytic(1, mode, 256)
    assert disc == pytest.approx(second_variation_mode(1, mode), rel=1e-2)
    assert printed > 0


def test_quarter_constant_is_unstable():
    # the constant direction lowers the energy: Q(1) = -4 pi k^4
    geom, crit = constant(1, math.pi / 4)
    rep = analyze_stability(geom, crit)
    assert rep.classification == "unstable"
    assert rep.eigen_low[0] < 0
    assert quadratic_form(geom, crit, np.ones(128)) == pytest.approx(-4 * math.pi, rel=1e-9)


def test_quarter_and_three_quarter_spectra_agree():
    e1 = analyze_stability(*constant(1, math.pi / 4)).eigen_low
    e2 = analyze_stability(*constant(1, 3 * math.pi / 4)).eigen_low
    np.testing.assert_allclose(e1, e2, atol=1e-10)


def test_trivial_constant_zero_is_degenerate_or_min():
    rep = analyze_stability(*constant(1, 0.0))
    assert rep.classification in ("degenerate", "strict_local_min")
    assert rep.eigen_low[0] >= -rep.pos_tol


def test_clamped_cylinder_solution_is_strict_minimum():
    exact = ExpPolySolution(((1.0, 0, 2.0),))
    geom = Cylinder(4.0, (0.0, 1.0))
    grid = Grid(0.0, 1.0, 80, clamped_from_curve(exact, 0.0, 1.0))
    rep = solve(geom, linear_initial(grid), SolveConfig(grad_tol=1e-7))
    srep = analyze_stability(geom, rep.solution)
    assert srep.classification == "strict_local_min"
    assert srep.quad_form_checks == []


def test_noncritical_profile_rejected():
    geom, _ = constant(1, 0.0)
    grid = Grid.for_geometry(geom, 64)
    with pytest.raises(NotCriticalError):
        analyze_stability(geom, DiscreteFunction(grid, 0.3 + 0.1 * np.cos(grid.nodes)))


def test_report_lines():
    rep = analyze_stability(*constant(1, math.pi / 4, 64))
    text = "\n".join(rep.lines())
    assert "classification = unstable" in text
    assert "quad_form[cos(2t)]" in text
