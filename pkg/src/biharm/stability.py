"""Second-variation analysis of discrete critical points.

For the torus family at the constant profiles pi/4 and 3pi/4, differentiating
the integrand twice gives the quadratic form

    Q(V) = int_0^{2 pi} (2 V''^2 - 2 k^4 V^2) dtheta,

so ``cos(n theta)`` has ``Q = 2 pi (n^4 - k^4)`` for ``n >= 1`` and the constant
direction has ``Q = -4 pi k^4``.  The printed form with ``+2 k^4 V^2`` is kept in
``quad_form_vs_analytic`` for comparison only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .euler_lagrange import DiscreteFunction, Grid, discrete_gradient, discrete_hessian
from .lagrangian import Geometry, TorusToSphere
from .solver import gradient_floor

__all__ = [
    "NotCriticalError",
    "StabilityReport",
    "analyze_stability",
    "quadratic_form",
    "quad_form_vs_analytic",
    "second_variation_mode",
]

CRITICAL_TOL = 1e-8
MAX_DENSE = 2048


class NotCriticalError(ValueError):
    """Stability was requested at a profile whose discrete gradient is not small."""


@dataclass
class StabilityReport:
    eigen_low: np.ndarray
    classification: str
    pos_tol: float
    quad_form_checks: list = field(default_factory=list)
    grad_norm: float = 0.0

    def lines(self) -> list[str]:
        out = [
            f"classification = {self.classification}",
            f"pos_tol = {self.pos_tol!r}",
            f"grad_norm = {self.grad_norm!r}",
            "eigen_low = " + ", ".join(repr(float(v)) for v in self.eigen_low),
        ]
        for label, disc, ana in self.quad_form_checks:
            out.append(f"quad_form[{label}] discrete = {disc!r} analytic = {ana!r}")
        return out


def quadratic_form(geom: Geometry, critical: DiscreteFunction, V) -> float:
    """``V^T H V`` with H the discrete Hessian over the free nodes."""
    H = discrete_hessian(geom, critical)
    V = np.asarray(V, dtype=float).ravel()
    return float(V @ (H @ V))


def second_variation_mode(k: int, mode: int) -> float:
    """Exact second variation of the torus functional at pi/4 along ``cos(mode theta)``."""
    norm = 2 * math.pi if mode == 0 else math.pi
    return (2.0 * mode**4 - 2.0 * k**4) * norm


def quad_form_vs_analytic(k: int, mode_n: int, grid_n: int) -> tuple[float, float]:
    """Discrete ``V^T H V`` at the constant pi/4 and the printed value ``2pi(n^4 + k^4)``.

    For ``mode_n = 0`` the printed integrand ``2 k^4`` over one period gives
    ``4 pi k^4``.  The true value is ``second_variation_mode(k, mode_n)``.
    """
    geom = TorusToSphere(k)
    grid = Grid.for_geometry(geom, grid_n)
    crit = DiscreteFunction(grid, np.full(grid_n, math.pi / 4))
    disc = quadratic_form(geom, crit, np.cos(mode_n * grid.nodes))
    printed = 4 * math.pi * k**4 if mode_n == 0 else 2 * math.pi * (mode_n**4 + k**4)
    return disc, printed


def _torus_checks(geom, critical):
    if not isinstance(geom, TorusToSphere):
        return []
    vals = critical.values[:, 0]
    if not any(np.all(np.abs(vals - c) < 1e-12) for c in (math.pi / 4, 3 * math.pi / 4)):
        return []
    H = discrete_hessian(geom, critical)
    t = critical.grid.nodes
    checks = []
    for mode in range(4):
        V = np.cos(mode * t)
        checks.append((f"cos({mode}t)", float(V @ (H @ V)), second_variation_mode(geom.k, mode)))
    return checks


def analyze_stability(geom: Geometry, critical: DiscreteFunction, pos_tol: float | None = None,
                      n_low: int = 10) -> StabilityReport:
    """Classify a discrete critical point by the spectrum of its Hessian.

    The Hessian is taken over admissible variations only: all nodes on periodic
    grids, interior nodes on clamped grids (boundary values and slopes fixed).
    ``pos_tol`` defaults to 1e-8 times the largest Hessian diagonal entry.
    The profile counts as critical when its gradient norm is at most 1e-8, or
    100 times the float64 roundoff floor on fine grids where that is larger.
    """
    g = discrete_gradient(geom, critical)
    gnorm = float(np.linalg.norm(g))
    if gnorm > max(CRITICAL_TOL, 100 * gradient_floor(critical)):
        raise NotCriticalError(f"profile is not critical (|grad| = {gnorm:.3g})")
    H = discrete_hessian(geom, critical)
    if H.shape[0] > MAX_DENSE:
        raise ValueError(f"dense eigensolve limited to {MAX_DENSE} unknowns")
    Hd = H.toarray()
    try:
        evals = eigh(Hd, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("symmetric eigensolve failed") from exc
    if pos_tol is None:
        pos_tol = 1e-8 * float(np.max(np.abs(np.diag(Hd))))
    low = np.sort(evals)[:n_low]
    if np.any(evals < -pos_tol):
        cls = "unstable"
    elif np.any(evals <= pos_tol):
        cls = "degenerate"
    else:
        cls = "strict_local_min"
    return StabilityReport(low, cls, pos_tol, _torus_checks(geom, critical), gnorm)
