"""Quick oracle suite run by ``biharm verify``.

Each family returns ``(passed, detail)``.  ``mutate=True`` corrupts the analytic
partials handed to the finite-difference check, which must then fail.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .closed_form import basis_solutions, sampson_analyze
from .curves import FourierCurve
from .euler_lagrange import (
    BoundaryConditions,
    DiscreteFunction,
    Grid,
    discrete_energy,
    discrete_gradient,
    discrete_hessian,
    el_residual_along_curve,
    paper_ode_residual,
)
from .lagrangian import (
    Cylinder,
    DecoupledSystem,
    EuclideanLog,
    Jet2,
    TorusToSphere,
    WarpedProduct,
    WarpFn,
    check_partials_fd,
    eval_partials,
)


def catalog():
    """Representative geometries with an interior interval for random tests."""
    return [
        (TorusToSphere(1), None),
        (TorusToSphere(2), None),
        (WarpedProduct(3, 8.0, WarpFn("identity"), WarpFn("identity"), (1.0, 2.0)), (1.0, 2.0)),
        (WarpedProduct(2, 3.0, WarpFn("sine"), WarpFn("sine"), (0.5, 2.5)), (0.5, 2.5)),
        (WarpedProduct(4, 2.0, WarpFn("sinh"), WarpFn("sinh"), (0.5, 1.5)), (0.5, 1.5)),
        (WarpedProduct(2, 1.5, WarpFn("constant", c=1.5), WarpFn("identity"), (0.0, 1.0)), (0.0, 1.0)),
        (EuclideanLog(3, 8.0), (0.0, 1.0)),
        (EuclideanLog(5, 3.0), (0.0, 1.0)),
        (Cylinder(1.0), (-1.0, 1.0)),
        (Cylinder(4.0), (0.0, 1.0)),
    ]


def random_jet(rng, geom, interval):
    a, b = interval if interval is not None else geom.domain
    t = rng.uniform(a + 0.1 * (b - a), b - 0.1 * (b - a))
    x, p, q = rng.uniform(-1.0, 1.0, size=3)
    return Jet2(t, x, p, q)


def random_profile(rng, geom, interval, n):
    if geom.periodic:
        grid = Grid.for_geometry(geom, n)
    else:
        a, b = interval
        bc = BoundaryConditions.clamped(*rng.uniform(-0.5, 0.5, size=4))
        grid = Grid(a, b, n, bc)
    t = grid.nodes
    vals = 0.3 * np.sin(t) + 0.2 * rng.standard_normal() + 0.05 * rng.standard_normal(n)
    return DiscreteFunction(grid, vals)


def _corrupt(pl):
    grad = pl.grad.copy()
    grad[1:] *= 1.001
    return replace(pl, grad=grad)


def fam_partials_fd(rng, mutate=False, per_geom=20):
    worst = 0.0
    for geom, iv in catalog():
        for _ in range(per_geom):
            jet = random_jet(rng, geom, iv)
            pl = _corrupt(eval_partials(geom, jet)) if mutate else None
            worst = max(worst, check_partials_fd(geom, jet, 1e-4, partials=pl))
    return worst <= 1e-7, f"max discrepancy {worst:.3e} (tol 1e-7)"


def directional_error(geom, df, d, eps=1e-6):
    g = discrete_gradient(geom, df).T.ravel()
    u = df.free_vector()
    ep = discrete_energy(geom, df.with_free(u + eps * d))
    em = discrete_energy(geom, df.with_free(u - eps * d))
    fd = (ep - em) / (2 * eps)
    return abs(g @ d - fd) / max(abs(fd), 1e-300)


def hessian_error(geom, df, V, eps=1e-4):
    u = df.free_vector()
    e0 = discrete_energy(geom, df)
    ep = discrete_energy(geom, df.with_free(u + eps * V))
    em = discrete_energy(geom, df.with_free(u - eps * V))
    fd = (ep - 2 * e0 + em) / eps**2
    H = discrete_hessian(geom, df)
    return abs(V @ (H @ V) - fd) / max(abs(fd), 1e-300)


def fam_gradient_fd(rng, per_geom=5):
    worst = 0.0
    for geom, iv in catalog():
        for _ in range(per_geom):
            df = random_profile(rng, geom, iv, 40)
            d = rng.standard_normal(df.grid.n_free)
            worst = max(worst, directional_error(geom, df, d))
    return worst <= 1e-6, f"max relative error {worst:.3e} (tol 1e-6)"


def fam_hessian_fd(rng, per_geom=3):
    worst = 0.0
    for geom, iv in catalog():
        for _ in range(per_geom):
            df = random_profile(rng, geom, iv, 40)
            V = rng.standard_normal(df.grid.n_free)
            worst = max(worst, hessian_error(geom, df, V))
    return worst <= 1e-5, f"max relative error {worst:.3e} (tol 1e-5)"


def fam_oracle_agreement(rng, n_points=20):
    worst = 0.0
    torus = TorusToSphere(1)
    curve = FourierCurve(math.pi / 4, 0.1, 1, -math.pi / 2)
    for t in rng.uniform(0, 2 * math.pi, n_points):
        worst = max(worst, abs(el_residual_along_curve(torus, curve, t)
                               - paper_ode_residual("torus", curve.jet(t), k=1)))
    for geom, which, lam in ((EuclideanLog(3, 8.0), "euclidean_m3_l8", None), (Cylinder(2.0), "cylinder", 2.0)):
        basis = basis_solutions(which, lam)
        coeffs = rng.uniform(-1, 1, 4)
        curve = sum((c * b for c, b in zip(coeffs[1:], basis[1:])), coeffs[0] * basis[0])
        for t in rng.uniform(-0.5, 0.5, n_points):
            worst = max(worst, abs(el_residual_along_curve(geom, curve, t)
                                   - paper_ode_residual(which, curve.jet(t), lam=lam or 1.0)))
    return worst <= 1e-6, f"max discrepancy {worst:.3e} (tol 1e-6)"


def fam_closed_form(rng, n_points=20):
    worst = 0.0
    for which, lam in (("euclidean_m3_l8", None), ("cylinder", 1.0), ("cylinder", 4.0)):
        for b in basis_solutions(which, lam):
            for t in rng.uniform(-1, 1, n_points):
                worst = max(worst, abs(paper_ode_residual(which, b.jet(t), lam=lam or 1.0)))
    return worst <= 1e-10, f"max ODE residual {worst:.3e} (tol 1e-10)"


def fam_sampson(rng):
    r1, r4 = sampson_analyze(1.0), sampson_analyze(4.0)
    ok = (-0.35 <= r1.r0 <= -0.33 and 0.82 <= r1.alpha_min <= 0.84 and r1.violates_principle
          and abs(r1.alpha_min - r4.alpha_min) <= 1e-9 and abs(r1.r0 - 2 * r4.r0) <= 1e-9)
    return ok, f"r0={r1.r0:.6f} alpha_min={r1.alpha_min:.6f}"


def fam_energy(rng):
    geom = TorusToSphere(1)
    grid = Grid.for_geometry(geom, 256)
    quarter = DiscreteFunction(grid, np.full(256, math.pi / 4))
    zero = DiscreteFunction(grid, np.zeros(256))
    e1, e0 = discrete_energy(geom, quarter), discrete_energy(geom, zero)
    g1 = np.abs(discrete_gradient(geom, quarter)).max()
    g0 = np.abs(discrete_gradient(geom, zero)).max()
    ok = abs(e1 - math.pi / 2) <= 1e-10 and abs(e0) <= 1e-12 and g1 <= 1e-12 and g0 <= 1e-12
    return ok, f"E(pi/4)-pi/2={e1 - math.pi / 2:.2e} E(0)={e0:.2e}"


def fam_system_form(rng):
    comps = (Cylinder(1.0, (0.0, 1.0)), Cylinder(3.0, (0.0, 1.0)))
    sysg = DecoupledSystem(comps)
    vals = rng.uniform(-1, 1, (4, 2))
    bc2 = BoundaryConditions.clamped(vals[0], vals[1], vals[2], vals[3])
    grid2 = Grid(0.0, 1.0, 30, bc2)
    prof = rng.standard_normal((30, 2))
    g2 = discrete_gradient(sysg, DiscreteFunction(grid2, prof))
    ok = True
    for j, comp in enumerate(comps):
        bc1 = BoundaryConditions.clamped(vals[0, j], vals[1, j], vals[2, j], vals[3, j])
        g1 = discrete_gradient(comp, DiscreteFunction(Grid(0.0, 1.0, 30, bc1), prof[:, j]))
        ok &= bool(np.array_equal(g1[:, 0], g2[:, j]))
    return ok, "exact concatenation" if ok else "mismatch"


FAMILIES = {
    "partials_fd": fam_partials_fd,
    "gradient_fd": fam_gradient_fd,
    "hessian_fd": fam_hessian_fd,
    "oracle_agreement": fam_oracle_agreement,
    "closed_form": fam_closed_form,
    "sampson": fam_sampson,
    "energy": fam_energy,
    "system_form": fam_system_form,
}


def run(families=None, seed: int = 0, mutate: bool = False):
    """Run the selected families; returns ``{name: (passed, detail)}``."""
    names = list(FAMILIES) if families is None else list(families)
    unknown = [n for n in names if n not in FAMILIES]
    if unknown:
        raise KeyError(f"unknown families: {unknown}")
    out = {}
    for name in names:
        rng = np.random.default_rng([seed, list(FAMILIES).index(name)])
        fn = FAMILIES[name]
        ok, detail = fn(rng, mutate=True) if (mutate and name == "partials_fd") else fn(rng)
        out[name] = (bool(ok), detail)
    return out
