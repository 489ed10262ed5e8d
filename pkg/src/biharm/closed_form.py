"""Exponential-polynomial solutions of the constant-coefficient biharmonicity ODEs.

Also hosts the analysis of the cylinder profile ``s sinh s + e^s`` (``s = sqrt(lam) r``),
a biharmonic solution with a strictly positive absolute minimum.  That positive
minimum is what breaks Sampson's maximum principle for proper biharmonic maps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .euler_lagrange import paper_ode_residual
from .lagrangian import Jet4

__all__ = [
    "ExpPolySolution",
    "characteristic_roots",
    "basis_solutions",
    "SampsonReport",
    "sampson_profile",
    "sampson_analyze",
]


@dataclass(frozen=True)
class ExpPolySolution:
    """``sum c * t**j * exp(r t)`` over ``terms = ((c, j, r), ...)``.

    Like terms are merged and zero coefficients dropped on construction, so
    equality and differentiation act on a canonical form.
    """

    terms: tuple = ()

    def __post_init__(self):
        merged: dict[tuple[int, float], float] = {}
        for c, j, r in self.terms:
            if int(j) != j or j < 0:
                raise ValueError("powers must be nonnegative integers")
            key = (int(j), float(r))
            merged[key] = merged.get(key, 0.0) + float(c)
        canon = tuple((c, j, r) for (j, r), c in sorted(merged.items()) if c != 0.0)
        object.__setattr__(self, "terms", canon)

    def __call__(self, t):
        t = np.asarray(t)
        if t.dtype.kind != "f":
            t = t.astype(float)
        out = np.zeros_like(t)
        for c, j, r in self.terms:
            out = out + c * t**j * np.exp(r * t)
        return out if out.ndim else out[()]

    def derivative(self, order: int = 1) -> "ExpPolySolution":
        sol = self
        for _ in range(order):
            new = []
            for c, j, r in sol.terms:
                if j:
                    new.append((c * j, j - 1, r))
                new.append((c * r, j, r))
            sol = ExpPolySolution(tuple(new))
        return sol

    def jet_values(self, t):
        """``(x, p, q)`` at ``t`` in the precision of ``t``."""
        d1 = self.derivative()
        return self(t), d1(t), d1.derivative()(t)

    def jet(self, t: float) -> Jet4:
        d = [self]
        for _ in range(4):
            d.append(d[-1].derivative())
        x, p, q, u, v = (f(t) for f in d)
        return Jet4(t, x, p, q, u=u, v=v)

    def __add__(self, other: "ExpPolySolution") -> "ExpPolySolution":
        return ExpPolySolution(self.terms + other.terms)

    def __mul__(self, s: float) -> "ExpPolySolution":
        return ExpPolySolution(tuple((s * c, j, r) for c, j, r in self.terms))

    __rmul__ = __mul__

    def to_list(self):
        return [[c, j, r] for c, j, r in self.terms]


def _ode_coeffs(ode: str, lam: float | None):
    # characteristic polynomial r^4 - B r^2 + C
    if ode == "euclidean_m3_l8":
        return 20.0, 64.0
    if ode == "cylinder":
        if lam is None or not lam > 0:
            raise ValueError("cylinder ODE needs lam > 0")
        return 2.0 * lam, lam * lam
    raise ValueError(f"no closed form for ODE {ode!r}")


def characteristic_roots(ode: str, lam: float | None = None) -> list[float]:
    """Roots of the characteristic polynomial, repeated by multiplicity.

    Solved as a biquadratic: the squares of the roots are
    ``(B +- sqrt(B^2 - 4C)) / 2``; a vanishing discriminant gives double roots.
    """
    B, C = _ode_coeffs(ode, lam)
    disc = B * B - 4 * C
    if disc < 0:
        raise ValueError("complex characteristic roots are not supported")
    root = math.sqrt(disc)
    roots = []
    for s in ((B + root) / 2, (B - root) / 2):
        r = math.sqrt(s)
        roots += [r, -r]
    return roots


def basis_solutions(ode: str, lam: float | None = None) -> list[ExpPolySolution]:
    """Fundamental solutions ``t**j e^{r t}``, ordered as in the printed families.

    Simple roots come first as ``e^{+r t}, e^{-r t}``; a double pair ``+-r``
    contributes ``e^{r t}, e^{-r t}, t e^{r t}, t e^{-r t}``.
    """
    roots = characteristic_roots(ode, lam)
    out, seen = [], {}
    for r in roots:
        j = seen.get(r, 0)
        seen[r] = j + 1
        out.append((j, r))
    out.sort(key=lambda jr: jr[0])
    return [ExpPolySolution(((1.0, j, r),)) for j, r in out]


@dataclass(frozen=True)
class SampsonReport:
    lam: float
    r0: float
    alpha_min: float
    violates_principle: bool
    derivative_at_r0: float
    end_margin: float
    ode_residual_max: float

    def lines(self) -> list[str]:
        return [
            f"lambda = {self.lam!r}",
            f"r0 = {self.r0!r}",
            f"alpha_min = {self.alpha_min!r}",
            f"alpha_dot(r0) = {self.derivative_at_r0!r}",
            f"end_growth_margin = {self.end_margin!r}",
            f"max_ode_residual = {self.ode_residual_max!r}",
            f"violates_principle = {str(self.violates_principle).lower()}",
        ]


def sampson_profile(lam: float) -> ExpPolySolution:
    """``s sinh s + e^s`` with ``s = sqrt(lam) r``, with sinh split into exponentials."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    k = math.sqrt(lam)
    return ExpPolySolution(((1.0, 0, k), (k / 2, 1, k), (-k / 2, 1, -k)))


def sampson_analyze(lam: float, width_tol: float = 1e-13, n_scan: int = 4000) -> SampsonReport:
    """Locate and certify the absolute minimum of the cylinder profile."""
    alpha = sampson_profile(lam)
    k = math.sqrt(lam)
    probes = np.linspace(-1.0, 1.0, 20) / k
    res = max(abs(paper_ode_residual("cylinder", alpha.jet(float(r)), lam=lam)) for r in probes)
    if res > 1e-10 * max(1.0, lam * lam):
        raise RuntimeError(f"profile does not satisfy the cylinder ODE (residual {res:.3g})")

    d1 = alpha.derivative()
    lo_end, hi_end = -10.0 / k, 10.0 / k
    grid = np.linspace(lo_end, hi_end, n_scan + 1)
    vals = d1(grid)
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    if len(flips) == 0:
        raise RuntimeError("no sign change of the derivative found")
    if len(flips) > 1 and not np.all(np.diff(flips) == 1):
        raise RuntimeError("derivative changes sign more than once")
    lo, hi = float(grid[flips[0]]), float(grid[flips[0] + 1])
    f_lo = float(d1(lo))
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = float(d1(mid))
        if f_mid == 0.0:
            lo = hi = mid
            break
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    r0 = 0.5 * (lo + hi)
    amin = float(alpha(r0))
    delta = 1e-3 / k
    if not (amin <= alpha(r0 - delta) and amin <= alpha(r0 + delta)):
        raise RuntimeError("stationary point is not a local minimum")
    margin = float(min(alpha(lo_end), alpha(hi_end)) - amin)
    if margin <= 1.0:
        raise RuntimeError("profile does not grow at the ends of the scan interval")
    return SampsonReport(
        lam=float(lam), r0=r0, alpha_min=amin, violates_principle=amin > 0,
        derivative_at_r0=float(d1(r0)), end_margin=margin, ode_residual_max=float(res),
    )
