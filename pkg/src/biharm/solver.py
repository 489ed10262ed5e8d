"""Damped Newton iteration for discrete critical points of the reduced bienergy."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from .euler_lagrange import (
    BoundaryConditions,
    DiscreteFunction,
    Grid,
    discrete_energy,
    discrete_gradient,
    discrete_hessian,
    el_residual_along_curve,
)
from .lagrangian import Geometry

logger = logging.getLogger(__name__)

__all__ = [
    "SolveConfig",
    "SolveReport",
    "SingularHessianError",
    "solve",
    "ConvergenceStudy",
    "convergence_study",
    "constant_initial",
    "fourier_initial",
    "linear_initial",
    "gradient_floor",
    "clamped_from_curve",
]

_MIN_STEP = 2.0**-20
_MAX_SHIFT = 1e6


class SingularHessianError(RuntimeError):
    """The (shifted) Hessian could not be factorized at any admissible shift."""


@dataclass(frozen=True)
class SolveConfig:
    max_iter: int = 100
    grad_tol: float = 1e-10
    damping: float = 1.0
    regularization: float = 0.0

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not self.regularization >= 0:
            raise ValueError("regularization must be nonnegative")


@dataclass
class SolveReport:
    solution: DiscreteFunction
    grad_norm: float
    iterations: int
    converged: bool
    energy: float
    history: list = field(default_factory=list, repr=False)


def _flat_grad(geom, df):
    return discrete_gradient(geom, df).T.ravel()


def _factor(A):
    try:
        lu = splu(sps.csc_matrix(A), permc_spec="NATURAL")
    except RuntimeError:
        return None
    return lu


def solve(geom: Geometry, initial: DiscreteFunction, cfg: SolveConfig | None = None) -> SolveReport:
    """Newton on the discrete gradient with a halving line search on ``|grad|^2``.

    When the line search cannot reduce ``|grad|^2`` down to the minimum step, a
    Levenberg shift ``mu I`` is added to the Hessian and escalated tenfold (up
    to 1e6).  The best iterate is returned whether or not the tolerance is met.
    """
    cfg = cfg or SolveConfig()
    df = initial
    g = _flat_grad(geom, df)
    gn2 = float(g @ g)
    history = [math.sqrt(gn2)]
    it = 0
    while it < cfg.max_iter and math.sqrt(gn2) > cfg.grad_tol:
        H = discrete_hessian(geom, df)
        eye = sps.identity(H.shape[0], format="csr")
        mu = cfg.regularization
        mu_seed = 1e-8 * max(1.0, float(np.max(np.abs(H.diagonal()))))
        accepted = False
        while True:
            lu = _factor(H + mu * eye if mu else H)
            if lu is not None:
                d = -lu.solve(g)
                tau = cfg.damping
                u = df.free_vector()
                while tau >= _MIN_STEP and np.all(np.isfinite(d)):
                    trial = df.with_free(u + tau * d)
                    g_trial = _flat_grad(geom, trial)
                    gt2 = float(g_trial @ g_trial)
                    if gt2 < gn2:
                        df, g, gn2 = trial, g_trial, gt2
                        accepted = True
                        break
                    tau *= 0.5
            if accepted:
                break
            mu = max(10.0 * mu, mu_seed)
            if mu > _MAX_SHIFT:
                break
            logger.debug("iteration %d: escalating shift to %.3g", it, mu)
        if not accepted:
            if lu is None:
                raise SingularHessianError("Hessian singular for every admissible shift")
            logger.info("line search stalled at |grad| = %.3g", math.sqrt(gn2))
            break
        it += 1
        history.append(math.sqrt(gn2))
        logger.debug("iteration %d: |grad| = %.3e (step %.3g, shift %.3g)", it, history[-1], tau, mu)
    gnorm = math.sqrt(gn2)
    return SolveReport(
        solution=df,
        grad_norm=gnorm,
        iterations=it,
        converged=gnorm <= cfg.grad_tol,
        energy=discrete_energy(geom, df),
        history=history,
    )


# --------------------------------------------------------------------------
# initial guesses


def constant_initial(grid: Grid, value: float) -> DiscreteFunction:
    return DiscreteFunction(grid, np.full(grid.n, float(value)))


def fourier_initial(grid: Grid, base: float, amplitude: float, mode: int = 1) -> DiscreteFunction:
    return DiscreteFunction(grid, base + amplitude * np.cos(mode * (grid.nodes - grid.a)))


def linear_initial(grid: Grid) -> DiscreteFunction:
    """Straight line between the clamped end values (per component)."""
    bc = grid.bc
    if bc.kind != "clamped":
        raise ValueError("linear initial guess needs clamped boundary data")
    s = (grid.nodes - grid.a) / (grid.b - grid.a)
    va, vb = np.array(bc.value_a), np.array(bc.value_b)
    vals = va[None, :] + s[:, None] * (vb - va)[None, :]
    vals[-1] = vb
    return DiscreteFunction(grid, vals)


# --------------------------------------------------------------------------
# manufactured solutions


@dataclass
class ConvergenceStudy:
    ns: list
    errors: list
    orders: list
    reports: list = field(repr=False)


def gradient_floor(df: DiscreteFunction) -> float:
    """Rough float64 roundoff floor of the discrete gradient norm for ``df``.

    Second differences of values of size ``|alpha|`` carry ``eps |alpha| / h^2``
    error; the gradient differences them again and multiplies by ``h``.
    """
    grid = df.grid
    scale = max(1.0, float(np.max(np.abs(df.values))))
    return float(np.finfo(float).eps * scale * math.sqrt(grid.n * df.dim) / grid.h**3)


def clamped_from_curve(curve, a: float, b: float) -> BoundaryConditions:
    ja, jb = curve.jet(a), curve.jet(b)
    return BoundaryConditions.clamped(ja.x, ja.p, jb.x, jb.p)


def convergence_study(geom: Geometry, exact, grids, cfg: SolveConfig | None = None,
                      interval: tuple | None = None, residual_tol: float = 1e-7) -> ConvergenceStudy:
    """Solve on each grid from a neutral start and measure sup-errors against ``exact``.

    Clamped problems start from the linear interpolant of the end values of
    ``exact``; periodic problems have no boundary data to interpolate and start
    from the samples of ``exact``, so Newton walks to the nearby discrete solution.
    Observed orders are ``log2(e_n / e_{2n})`` between consecutive grids.  The
    gradient tolerance on each grid is raised to 100x ``gradient_floor`` when the
    configured one is unreachable in double precision.
    """
    cfg = cfg or SolveConfig()
    ns = [int(n) for n in grids]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("grid sizes must be strictly increasing")
    a, b = interval if interval is not None else geom.domain
    probes = np.linspace(a, b, 7)[1:-1]
    worst = max(float(np.max(np.abs(el_residual_along_curve(geom, exact, float(t))))) for t in probes)
    if worst > residual_tol:
        raise ValueError(f"exact curve is not a critical point (residual {worst:.3g})")

    errors, reports = [], []
    for n in ns:
        if geom.periodic:
            grid = Grid.for_geometry(geom, n)
            start = DiscreteFunction.sample(grid, exact)
        else:
            grid = Grid(a, b, n, clamped_from_curve(exact, a, b))
            start = linear_initial(grid)
        ref = np.asarray(exact(grid.nodes), dtype=float).reshape(grid.n, -1)
        tol = max(cfg.grad_tol, 100 * gradient_floor(DiscreteFunction(grid, ref)))
        rep = solve(geom, start, replace(cfg, grad_tol=tol))
        if not rep.converged:
            raise RuntimeError(f"solver did not converge on n={n} (|grad| = {rep.grad_norm:.3g})")
        errors.append(float(np.max(np.abs(rep.solution.values - ref))))
        reports.append(rep)
    orders = [math.log2(e0 / e1) if e1 > 0 and e0 > 0 else math.inf for e0, e1 in zip(errors, errors[1:])]
    return ConvergenceStudy(ns, errors, orders, reports)
