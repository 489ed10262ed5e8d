"""Acceptance criteria at their stated tolerances; one PASS/FAIL line each."""
import math

import numpy as np
import pytest

from biharm.closed_form import ExpPolySolution, basis_solutions, sampson_analyze
from biharm.curves import ConstantCurve, FourierCurve
from biharm.euler_lagrange import (
    BoundaryConditions,
    DiscreteFunction,
    Grid,
    discrete_energy,
    discrete_gradient,
    el_residual_along_curve,
    paper_ode_residual,
)
from biharm.lagrangian import Cylinder, DecoupledSystem, EuclideanLog, TorusToSphere, check_partials_fd
from biharm.solver import convergence_study, fourier_initial, solve
from biharm.stability import analyze_stability, quad_form_vs_analytic
from biharm.verify import catalog, directional_error, hessian_error, random_jet, random_profile

QUARTER = math.pi / 4
T50 = np.linspace(0.0, 2 * math.pi, 50, endpoint=False)


def random_exponential(rng, n_terms=4):
    return ExpPolySolution(tuple((rng.uniform(-1, 1), 0, rng.uniform(-3, 3)) for _ in range(n_terms)))


def random_combination(rng, basis):
    c = rng.uniform(-1, 1, len(basis))
    return sum((ci * b for ci, b in zip(c[1:], basis[1:])), c[0] * basis[0])


def test_1_constant_solutions(criterion):
    worst_const, worst_third = 0.0, 0.0
    for k in (1, 2, 3):
        geom = TorusToSphere(k)
        for value in (0.0, math.pi / 2, math.pi, QUARTER, 3 * QUARTER):
            curve = ConstantCurve(value)
            worst_const = max(worst_const, max(abs(el_residual_along_curve(geom, curve, t)) for t in T50))
        direct = 0.5 * k**4 * math.sin(2 * math.pi / 3) * math.cos(2 * math.pi / 3)
        third = ConstantCurve(math.pi / 3)
        worst_third = max(worst_third, max(abs(el_residual_along_curve(geom, third, t) - direct) for t in T50))
    ok = worst_const <= 1e-9 and worst_third <= 1e-9
    criterion("1", ok, f"constants max {worst_const:.2e}, pi/3 mismatch {worst_third:.2e} (tol 1e-9)")
    assert ok


def test_2_oracle_agreement(criterion):
    rng = np.random.default_rng(2)
    curve = FourierCurve(QUARTER, 0.1, 1, -math.pi / 2)  # pi/4 + 0.1 sin
    worst = {}
    worst["torus"] = max(
        abs(el_residual_along_curve(TorusToSphere(k), curve, t) - paper_ode_residual("torus", curve.jet(t), k=k))
        for k in (1, 2, 3) for t in T50)
    ts = np.linspace(-1, 1, 50)
    e = 0.0
    for _ in range(5):
        c = random_exponential(rng)
        e = max(e, max(abs(el_residual_along_curve(EuclideanLog(3, 8.0), c, t)
                           - paper_ode_residual("euclidean_m3_l8", c.jet(t))) for t in ts))
    worst["euclidean"] = e
    e = 0.0
    for lam in (0.5, 1.0, 4.0):
        c = random_exponential(rng)
        e = max(e, max(abs(el_residual_along_curve(Cylinder(lam), c, t)
                           - paper_ode_residual("cylinder", c.jet(t), lam=lam)) for t in ts))
    worst["cylinder"] = e
    ok = max(worst.values()) <= 1e-6
    criterion("2", ok, ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " (tol 1e-6)")
    assert ok


def test_3_closed_form_families(criterion):
    rng = np.random.default_rng(3)
    ts = np.linspace(-1, 1, 25)
    exact, fd = 0.0, 0.0
    cases = [("euclidean_m3_l8", None, EuclideanLog(3, 8.0)), ("cylinder", 1.0, Cylinder(1.0)),
             ("cylinder", 4.0, Cylinder(4.0))]
    for ode, lam, geom in cases:
        basis = basis_solutions(ode, lam)
        curves = list(basis) + [random_combination(rng, basis) for _ in range(20)]
        for c in curves:
            for t in ts:
                exact = max(exact, abs(paper_ode_residual(ode, c.jet(t), lam=lam or 1.0)))
                fd = max(fd, abs(el_residual_along_curve(geom, c, t)))
    ok = exact <= 1e-10 and fd <= 1e-6
    criterion("3", ok, f"exact-jet {exact:.2e} (tol 1e-10), FD-in-t {fd:.2e} (tol 1e-6)")
    assert ok


def test_4_manufactured_convergence(criterion):
    study = convergence_study(Cylinder(4.0, (0.0, 1.0)), ExpPolySolution(((1.0, 0, 2.0),)), [50, 100, 200])
    ok = all(1.8 <= p <= 2.2 for p in study.orders) and study.errors[-1] <= 1e-3
    criterion("4", ok, "errors " + ", ".join(f"{e:.3e}" for e in study.errors)
              + " orders " + ", ".join(f"{p:.3f}" for p in study.orders))
    assert ok


def _torus_constant(value, n=256):
    geom = TorusToSphere(1)
    return geom, DiscreteFunction(Grid.for_geometry(geom, n), np.full(n, value))


def test_5a_positive_spectrum(criterion):
    lows = [analyze_stability(*_torus_constant(v)).eigen_low[0] for v in (QUARTER, 3 * QUARTER)]
    ok = min(lows) > 0
    criterion("5.a", ok, f"lowest eigenvalues {lows[0]:.4e}, {lows[1]:.4e} (need > 0)")
    assert ok


def test_5b_mode_quadratic_forms(criterion):
    rels = []
    for mode in range(1, 9):
        disc, printed = quad_form_vs_analytic(1, mode, 256)
        rels.append(abs(disc - printed) / printed)
    ok = max(rels) <= 1e-2
    worst = int(np.argmax(rels)) + 1
    criterion("5.b", ok, f"worst mode {worst} relative gap {max(rels):.3e} (tol 1e-2)")
    assert ok


def test_5c_spectra_agree(criterion):
    e1 = analyze_stability(*_torus_constant(QUARTER)).eigen_low
    e2 = analyze_stability(*_torus_constant(3 * QUARTER)).eigen_low
    diff = float(np.max(np.abs(e1 - e2)))
    ok = diff <= 1e-10
    criterion("5.c", ok, f"max eigenvalue difference {diff:.2e} (tol 1e-10)")
    assert ok


def test_6_sampson(criterion):
    r1 = sampson_analyze(1.0)
    others = [sampson_analyze(lam) for lam in (0.25, 4.0, 9.0)]
    inv = max(abs(r.alpha_min - r1.alpha_min) for r in others)
    scale = max(abs(r.r0 * math.sqrt(r.lam) - r1.r0) for r in others)
    ok = (-0.35 <= r1.r0 <= -0.33 and 0.82 <= r1.alpha_min <= 0.84 and r1.alpha_min > 0
          and inv <= 1e-9 and scale <= 1e-9)
    criterion("6", ok, f"r0 {r1.r0:.7f}, min {r1.alpha_min:.7f}, invariance {inv:.1e}, scaling {scale:.1e}")
    assert ok


def test_7_energy_values(criterion):
    geom = TorusToSphere(1)
    grid = Grid.for_geometry(geom, 256)
    q = DiscreteFunction(grid, np.full(256, QUARTER))
    z = DiscreteFunction(grid, np.zeros(256))
    e_q, e_z = discrete_energy(geom, q), discrete_energy(geom, z)
    g = max(float(np.max(np.abs(discrete_gradient(geom, d)))) for d in (q, z))
    ok = abs(e_q - math.pi / 2) <= 1e-10 and abs(e_z) <= 1e-12 and g <= 1e-12
    criterion("7", ok, f"E(pi/4)-pi/2 {e_q - math.pi / 2:.1e}, E(0) {e_z:.1e}, max grad {g:.1e}")
    assert ok


def test_8_property_suites(criterion):
    rng = np.random.default_rng(8)
    geoms = catalog()
    grad = hess = part = 0.0
    for i in range(100):
        geom, iv = geoms[i % len(geoms)]
        df = random_profile(rng, geom, iv, 40)
        grad = max(grad, directional_error(geom, df, rng.standard_normal(df.grid.n_free)))
        hess = max(hess, hessian_error(geom, df, rng.standard_normal(df.grid.n_free)))
        part = max(part, check_partials_fd(geom, random_jet(rng, geom, iv)))
    comps = (Cylinder(1.0, (0.0, 1.0)), Cylinder(3.0, (0.0, 1.0)))
    vals = rng.uniform(-1, 1, (4, 2))
    prof = rng.standard_normal((30, 2))
    g2 = discrete_gradient(DecoupledSystem(comps), DiscreteFunction(Grid(0.0, 1.0, 30, BoundaryConditions.clamped(*vals)), prof))
    exact = all(
        np.array_equal(discrete_gradient(c, DiscreteFunction(Grid(0.0, 1.0, 30, BoundaryConditions.clamped(*vals[:, j])),
                                                               prof[:, j]))[:, 0], g2[:, j])
        for j, c in enumerate(comps))
    ok = grad <= 1e-6 and hess <= 1e-5 and part <= 1e-7 and exact
    criterion("8", ok, f"gradient {grad:.1e}, hessian {hess:.1e}, partials {part:.1e}, system exact={exact}")
    assert ok


def preconditioned_descent(geom, start, iters=300):
    """Armijo gradient descent preconditioned by the periodic biharmonic symbol.

    Shares only the energy and gradient with the Newton solver.
    """
    n, h = start.grid.n, start.grid.h
    k = np.fft.fftfreq(n, d=1.0 / n)
    symbol = 2 * h * ((2 - 2 * np.cos(2 * np.pi * k / n)) ** 2 / h**4 + 1.0)
    u = start.free_vector()
    E = discrete_energy(geom, start)
    for _ in range(iters):
        g = discrete_gradient(geom, start.with_free(u))[:, 0]
        if np.linalg.norm(g) < 1e-10:
            break
        d = -np.real(np.fft.ifft(np.fft.fft(g) / symbol))
        s = 1.0
        while True:
            trial = u + s * d
            E_trial = discrete_energy(geom, start.with_free(trial))
            if E_trial <= E + 1e-4 * s * (g @ d) or s < 1e-8:
                break
            s /= 2
        u, E = trial, E_trial
    return u


@pytest.fixture(scope="module")
def basin():
    geom = TorusToSphere(1)
    start = fourier_initial(Grid.for_geometry(geom, 256), QUARTER, 0.05, 1)
    return geom, start


def test_9a_newton_basin(criterion, basin):
    geom, start = basin
    rep = solve(geom, start)
    dev = float(np.max(np.abs(rep.solution.values - QUARTER)))
    ok = rep.converged and dev <= 1e-8
    criterion("9.a", ok, f"converged={rep.converged}, max |alpha - pi/4| {dev:.3e} (tol 1e-8)")
    assert ok


def test_9b_descent_oracle(criterion, basin):
    geom, start = basin
    u = preconditioned_descent(geom, start)
    dev = float(np.max(np.abs(u - QUARTER)))
    ok = dev <= 1e-8
    criterion("9.b", ok, f"descent oracle max |alpha - pi/4| {dev:.3e}, range [{u.min():.4f}, {u.max():.4f}]")
    assert ok
