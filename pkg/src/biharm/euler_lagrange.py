"""Fourth-order Euler-Lagrange operator of a reduced bienergy.

Two pathways that share no discretization code:

* ``el_residual_along_curve`` evaluates the operator on a smooth curve with exact
  jets, differentiating ``t -> L_p`` and ``t -> L_q`` numerically in t.
* ``discrete_energy`` / ``discrete_gradient`` / ``discrete_hessian`` discretize
  the functional on a grid and differentiate the discrete sum exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sps

from .lagrangian import (
    DomainError,
    Geometry,
    Jet4,
    eval_partials,
    first_partials,
    node_partials,
    node_values,
)

__all__ = [
    "BoundaryConditions",
    "Grid",
    "DiscreteFunction",
    "SmoothCurve",
    "el_residual_along_curve",
    "paper_ode_residual",
    "discrete_energy",
    "discrete_gradient",
    "discrete_hessian",
    "discrete_jets",
]


@dataclass(frozen=True)
class BoundaryConditions:
    """``periodic`` or ``clamped`` (value and slope at both ends, per component)."""

    kind: str = "periodic"
    value_a: tuple = ()
    value_b: tuple = ()
    slope_a: tuple = ()
    slope_b: tuple = ()

    def __post_init__(self):
        if self.kind not in ("periodic", "clamped"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")
        for name in ("value_a", "value_b", "slope_a", "slope_b"):
            val = tuple(float(v) for v in np.atleast_1d(getattr(self, name)))
            if not all(math.isfinite(v) for v in val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.kind == "clamped":
            lens = {len(self.value_a), len(self.value_b), len(self.slope_a), len(self.slope_b)}
            if len(lens) != 1 or 0 in lens:
                raise ValueError("clamped conditions need value and slope at both ends for every component")

    @classmethod
    def clamped(cls, value_a, slope_a, value_b, slope_b):
        return cls("clamped", value_a=value_a, value_b=value_b, slope_a=slope_a, slope_b=slope_b)

    @property
    def dim(self):
        return len(self.value_a) if self.kind == "clamped" else None

    def to_dict(self):
        if self.kind == "periodic":
            return {"kind": "periodic"}
        return {"kind": "clamped", "value_a": list(self.value_a), "slope_a": list(self.slope_a),
                "value_b": list(self.value_b), "slope_b": list(self.slope_b)}


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[a, b]``; periodic grids omit the node at ``b``."""

    a: float
    b: float
    n: int
    bc: BoundaryConditions = field(default_factory=BoundaryConditions)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ValueError("grid needs n >= 8 nodes")
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError("grid needs a finite interval a < b")
        object.__setattr__(self, "n", int(self.n))

    @property
    def periodic(self) -> bool:
        return self.bc.kind == "periodic"

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n if self.periodic else self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        if not self.periodic:
            w[0] = w[-1] = self.h / 2
        return w

    @property
    def free(self) -> slice:
        """Nodes that are degrees of freedom (all for periodic, interior for clamped)."""
        return slice(0, self.n) if self.periodic else slice(1, self.n - 1)

    @property
    def n_free(self) -> int:
        return self.n if self.periodic else self.n - 2

    @classmethod
    def for_geometry(cls, geom: Geometry, n: int, bc: BoundaryConditions | None = None, a=None, b=None):
        if geom.periodic:
            return cls(geom.domain[0], geom.domain[1], n, BoundaryConditions("periodic"))
        return cls(geom.domain[0] if a is None else a, geom.domain[1] if b is None else b, n, bc)


@dataclass(frozen=True)
class DiscreteFunction:
    """Samples of a profile on a grid; ``values`` has shape (n, D)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.grid.n:
            raise ValueError(f"values must have {self.grid.n} rows, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def sample(cls, grid: Grid, fn) -> "DiscreteFunction":
        """Sample ``fn(t)`` (vectorized, scalar- or (n, D)-valued) at the grid nodes."""
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    def with_free(self, u: np.ndarray) -> "DiscreteFunction":
        """Copy with the free degrees of freedom replaced by ``u`` (component-major)."""
        vals = self.values.copy()
        vals[self.grid.free, :] = np.asarray(u).reshape(self.dim, -1).T
        return DiscreteFunction(self.grid, vals)

    def free_vector(self) -> np.ndarray:
        return self.values[self.grid.free, :].T.ravel()


class SmoothCurve(Protocol):
    """Anything producing exact jets up to fourth order at a point."""

    def jet(self, t: float) -> Jet4: ...


# --------------------------------------------------------------------------
# continuous pathway


def _d1(f, t, s):
    return (-f(t + 2 * s) + 8 * f(t + s) - 8 * f(t - s) + f(t - 2 * s)) / (12 * s)


def _d2(f, t, s):
    return (-f(t + 2 * s) + 16 * f(t + s) - 30 * f(t) + 16 * f(t - s) - f(t - 2 * s)) / (12 * s * s)


def _richardson(op, f, t, s):
    # 4th-order stencils; one extrapolation level from steps s and s/2
    return (16 * op(f, t, s / 2) - op(f, t, s)) / 15


def el_residual_along_curve(geom: Geometry, curve: SmoothCurve, t: float, fd_step: float | None = None):
    """Euler-Lagrange residual of ``curve`` at ``t``.

    Returns half of ``L_x - d/dt L_p + d^2/dt^2 L_q``, which puts the residual on
    the scale of the expanded ODEs (unit coefficient on the fourth derivative
    for unit volume factor).  Only first partials of L are used; the total
    t-derivatives come from finite differences of ``t' -> L_p(jet(t'))``.
    A float is returned for scalar geometries, a length-D array otherwise.
    """
    a, b = geom.domain
    if fd_step is None:
        span = (b - a) if math.isfinite(b - a) else 1.0
        fd_step = 1e-3 * span
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    if not geom.periodic and (t - 2 * fd_step < a or t + 2 * fd_step > b):
        raise DomainError(f"t={t} too close to the boundary for the difference stencil")
    # extended precision keeps stencil cancellation below the truncation error
    # for curves that can evaluate in the dtype of t; others stay in float64
    raw = getattr(curve, "jet_values", None)
    if raw is not None:
        geom.check_t([t - 2 * fd_step, t + 2 * fd_step])
        t, fd_step = np.longdouble(t), np.longdouble(fd_step)

    def partials(tt):
        if raw is not None:
            x, p, q = (np.atleast_1d(v) for v in raw(tt))
            return first_partials(geom, tt, x, p, q)
        pl = eval_partials(geom, curve.jet(tt).jet2())
        return pl.L_x, pl.L_p, pl.L_q

    Lx = partials(t)[0]
    dLp = _richardson(_d1, lambda s: partials(s)[1], t, fd_step)
    d2Lq = _richardson(_d2, lambda s: partials(s)[2], t, fd_step)
    res = (0.5 * (Lx - dLp + d2Lq)).astype(float)
    return float(res[0]) if geom.dim == 1 else res


_EXPANDED_ODES = ("torus", "euclidean_m3_l8", "cylinder")


def paper_ode_residual(which: str, jet: Jet4, k: int = 1, lam: float = 1.0) -> float:
    """Residual of one of the three expanded biharmonicity ODEs, as printed.

    ``torus`` uses the winding number ``k``, ``cylinder`` the eigenvalue ``lam``;
    ``euclidean_m3_l8`` is the Hopf-map case in the log variable.
    """
    if which not in _EXPANDED_ODES:
        raise ValueError(f"unknown ODE {which!r}; expected one of {_EXPANDED_ODES}")
    if jet.dim != 1:
        raise ValueError("expanded ODEs are scalar")
    x, p, q, v = jet.x[0], jet.p[0], jet.q[0], jet.v[0]
    if which == "torus":
        k2 = k * k
        s2, c2 = math.sin(2 * x), math.cos(2 * x)
        return v - 2 * k2 * c2 * q + 2 * k2 * s2 * p * p + 0.5 * k2 * k2 * s2 * c2
    if which == "euclidean_m3_l8":
        return v - 20 * q + 64 * x
    return v - 2 * lam * q + lam * lam * x


# --------------------------------------------------------------------------
# discrete pathway


@dataclass(frozen=True)
class _Stencils:
    """Affine maps from free dofs ``u`` of one component to node x, p, q.

    ``X = Mx u + cx`` and likewise for P and Q; matrices are sparse (n, n_free).
    """

    Mx: sps.csr_matrix
    Mp: sps.csr_matrix
    Mq: sps.csr_matrix
    cx: np.ndarray
    cp: np.ndarray
    cq: np.ndarray


def _stencils(grid: Grid, comp: int) -> _Stencils:
    n, h = grid.n, grid.h
    if grid.periodic:
        eye = sps.identity(n, format="csr")
        up = sps.diags([1.0, 1.0], [1, -(n - 1)], shape=(n, n))
        dn = sps.diags([1.0, 1.0], [-1, n - 1], shape=(n, n))
        Mp = ((up - dn) / (2 * h)).tocsr()
        Mq = ((up - 2 * eye + dn) / (h * h)).tocsr()
        z = np.zeros(n)
        return _Stencils(eye, Mp, Mq, z, z.copy(), z.copy())

    bc = grid.bc
    va, vb = bc.value_a[comp], bc.value_b[comp]
    sa, sb = bc.slope_a[comp], bc.slope_b[comp]
    # extended vector [ghost_a, node_0 .. node_{n-1}, ghost_b] = E u + e
    m = n - 2
    E = sps.lil_matrix((n + 2, m))
    e = np.zeros(n + 2)
    for i in range(m):
        E[i + 2, i] = 1.0
    e[1], e[n] = va, vb
    # ghost from value/slope plus a one-sided second difference:
    # g = a0 - h*s + (2 a0 - 5 a1 + 4 a2 - a3)/2
    for ghost, end, step, val, slope in ((0, 1, 1, va, sa), (n + 1, n, -1, vb, -sb)):
        coeffs = (-2.5, 2.0, -0.5)
        e[ghost] = 2.0 * val - h * slope
        for c, off in zip(coeffs, (1, 2, 3)):
            E[ghost, end + step * off - 2] += c
    E = E.tocsr()
    shift = sps.diags([1.0], [1], shape=(n, n + 2))
    fwd = sps.diags([1.0], [2], shape=(n, n + 2))
    back = sps.diags([1.0], [0], shape=(n, n + 2))
    Dp = (fwd - back) / (2 * h)
    Dq = (fwd - 2 * shift + back) / (h * h)
    return _Stencils(
        (shift @ E).tocsr(), (Dp @ E).tocsr(), (Dq @ E).tocsr(),
        shift @ e, Dp @ e, Dq @ e,
    )


def _check_compat(geom: Geometry, df: DiscreteFunction):
    grid = df.grid
    if df.dim != geom.dim:
        raise ValueError(f"profile has D={df.dim}, geometry expects D={geom.dim}")
    if geom.periodic:
        if not grid.periodic:
            raise ValueError("periodic geometry requires periodic boundary conditions")
        if abs((grid.b - grid.a) - geom.period) > 1e-12 * geom.period:
            raise ValueError("periodic grid must span exactly one period")
    else:
        if grid.periodic:
            raise ValueError("this geometry requires clamped boundary conditions")
        if grid.bc.dim != geom.dim:
            raise ValueError("boundary data must have one entry per component")
        geom.check_t([grid.a, grid.b])


def _node_jets(geom, df):
    st = [_stencils(df.grid, j) for j in range(df.dim)]
    u = df.values[df.grid.free, :]
    X = np.column_stack([s.Mx @ u[:, j] + s.cx for j, s in enumerate(st)])
    P = np.column_stack([s.Mp @ u[:, j] + s.cp for j, s in enumerate(st)])
    Q = np.column_stack([s.Mq @ u[:, j] + s.cq for j, s in enumerate(st)])
    return st, X, P, Q


def discrete_jets(geom: Geometry, df: DiscreteFunction):
    """Node values, stencil first and second derivatives, each shaped (n, D).

    For clamped grids the boundary rows are rebuilt from the boundary data, so
    only the interior samples of ``df`` matter.
    """
    _check_compat(geom, df)
    _, X, P, Q = _node_jets(geom, df)
    return X, P, Q


def discrete_energy(geom: Geometry, df: DiscreteFunction) -> float:
    """Quadrature of the Lagrangian over the grid with stencil derivatives."""
    _check_compat(geom, df)
    _, X, P, Q = _node_jets(geom, df)
    L = node_values(geom, df.grid.nodes, X, P, Q)
    return float(np.dot(df.grid.weights, L))


def discrete_gradient(geom: Geometry, df: DiscreteFunction) -> np.ndarray:
    """Exact gradient of ``discrete_energy`` with respect to the free nodes.

    Returned with shape (n_free, D).
    """
    _check_compat(geom, df)
    st, X, P, Q = _node_jets(geom, df)
    _, first, _ = node_partials(geom, df.grid.nodes, X, P, Q)
    w = df.grid.weights
    cols = []
    for j, s in enumerate(st):
        cols.append(s.Mx.T @ (w * first["x"][:, j]) + s.Mp.T @ (w * first["p"][:, j])
                    + s.Mq.T @ (w * first["q"][:, j]))
    return np.column_stack(cols)


def discrete_hessian(geom: Geometry, df: DiscreteFunction) -> sps.csr_matrix:
    """Exact Hessian of ``discrete_energy`` over the free nodes (component-major).

    Sparse, symmetric to the last bit, pentadiagonal per component (cyclic for
    periodic grids).
    """
    _check_compat(geom, df)
    st, X, P, Q = _node_jets(geom, df)
    _, _, second = node_partials(geom, df.grid.nodes, X, P, Q)
    w = df.grid.weights
    D = df.dim
    blocks = [[None] * D for _ in range(D)]
    for j in range(D):
        for l in range(D):
            acc = None
            for v1 in "xpq":
                for v2 in "xpq":
                    coef = w * second[v1 + v2][:, j, l]
                    if not np.any(coef):
                        continue
                    A = getattr(st[j], "M" + v1)
                    B = getattr(st[l], "M" + v2)
                    term = A.T @ sps.diags(coef) @ B
                    acc = term if acc is None else acc + term
            if acc is None:
                m = df.grid.n_free
                acc = sps.csr_matrix((m, m))
            blocks[j][l] = acc
    H = sps.bmat(blocks, format="csr")
    return ((H + H.T) * 0.5).tocsr()
