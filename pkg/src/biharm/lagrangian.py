"""Catalog of reduced bienergy Lagrangians and their exact partial derivatives.

Every catalog entry has the form

    L(t, x, p, q) = w(t) * T(t, x, p, q)**2,   T = q + a(t) p - b(t) g(x)

where ``T`` is the reduced tension field and ``w`` the volume factor.  A geometry
therefore only supplies ``w, a, b`` (with two t-derivatives) and the target
nonlinearity ``g`` (with two x-derivatives); all first and second partials of
``L`` follow from the chain rule below.  Overall constant factors are dropped
exactly as in the usual reduced forms, so absolute energies are only meaningful
within a single geometry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

__all__ = [
    "DomainError",
    "Jet2",
    "Jet4",
    "WarpFn",
    "Geometry",
    "TorusToSphere",
    "WarpedProduct",
    "EuclideanLog",
    "Cylinder",
    "DecoupledSystem",
    "PartialsL",
    "eval_lagrangian",
    "eval_partials",
    "tension",
    "volume_factor",
    "check_partials_fd",
]


class DomainError(ValueError):
    """Evaluation point or profile outside the admissible domain of a geometry."""


def _arr(v):
    # keep extended-precision inputs intact, promote everything else to float64
    v = np.asarray(v)
    return v.astype(np.result_type(v.dtype, np.float64), copy=False)


def _as_vec(v, name):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a scalar or 1-d vector")
    return arr


@dataclass(frozen=True)
class Jet2:
    """Evaluation point ``(t, x, p, q)`` of a Lagrangian; x, p, q have length D."""

    t: float
    x: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        for name in ("x", "p", "q"):
            object.__setattr__(self, name, _as_vec(getattr(self, name), name))
        if not (len(self.x) == len(self.p) == len(self.q)) or len(self.x) < 1:
            raise ValueError("x, p, q must share a common length D >= 1")
        if not (math.isfinite(self.t) and all(np.isfinite(v).all() for v in (self.x, self.p, self.q))):
            raise ValueError("jet entries must be finite")

    @property
    def dim(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class Jet4(Jet2):
    """Jet2 extended with third (``u``) and fourth (``v``) derivatives."""

    u: np.ndarray = None
    v: np.ndarray = None

    def __post_init__(self):
        super().__post_init__()
        for name in ("u", "v"):
            val = getattr(self, name)
            if val is None:
                raise ValueError(f"Jet4 requires {name}")
            arr = _as_vec(val, name)
            if len(arr) != self.dim or not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite with length {self.dim}")
            object.__setattr__(self, name, arr)

    def jet2(self) -> Jet2:
        return Jet2(self.t, self.x, self.p, self.q)


# --------------------------------------------------------------------------
# warping functions

_WARP_KINDS = ("identity", "sine", "sinh", "constant", "table")


@dataclass(frozen=True)
class WarpFn:
    """Warping function with exact derivatives up to third order.

    ``kind`` is one of ``identity`` (r), ``sine`` (sin r), ``sinh`` (sinh r),
    ``constant`` (c) or ``table`` (quintic spline through ``(nodes, values)``).
    """

    kind: str = "identity"
    c: float | None = None
    nodes: tuple | None = None
    values: tuple | None = None
    _spline: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in _WARP_KINDS:
            raise ValueError(f"unknown warp kind {self.kind!r}; expected one of {_WARP_KINDS}")
        if self.kind == "constant":
            if self.c is None or not self.c > 0:
                raise ValueError("constant warp requires c > 0")
        if self.kind == "table":
            if self.nodes is None or self.values is None:
                raise ValueError("table warp requires nodes and values")
            r = np.asarray(self.nodes, dtype=float)
            y = np.asarray(self.values, dtype=float)
            if r.shape != y.shape or r.size < 6 or np.any(np.diff(r) <= 0):
                raise ValueError("table warp needs >= 6 strictly increasing nodes")
            object.__setattr__(self, "nodes", tuple(r))
            object.__setattr__(self, "values", tuple(y))
            object.__setattr__(self, "_spline", make_interp_spline(r, y, k=5))

    def derivs(self, r):
        """Return ``(f, f', f'', f''')`` evaluated at ``r`` (broadcast)."""
        r = _arr(r)
        if self.kind == "identity":
            one, zero = np.ones_like(r), np.zeros_like(r)
            return r.copy(), one, zero, zero.copy()
        if self.kind == "sine":
            s, c = np.sin(r), np.cos(r)
            return s, c, -s, -c
        if self.kind == "sinh":
            s, c = np.sinh(r), np.cosh(r)
            return s, c, s.copy(), c.copy()
        if self.kind == "constant":
            zero = np.zeros_like(r)
            return np.full_like(r, self.c), zero, zero.copy(), zero.copy()
        sp = self._spline
        r = np.asarray(r, dtype=float)
        return sp(r), sp(r, 1), sp(r, 2), sp(r, 3)

    def __call__(self, r):
        return self.derivs(r)[0]

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["c"] = self.c
        if self.kind == "table":
            d["nodes"] = list(self.nodes)
            d["values"] = list(self.values)
        return d


# --------------------------------------------------------------------------
# geometries


class Geometry:
    """Base class for reduced problems of the form ``w(t) (q + a p - b g(x))**2``."""

    dim = 1
    periodic = False
    domain: tuple = (-math.inf, math.inf)

    def coefficients(self, t):
        """Return ``(w, w', w'', a, a', a'', b, b', b'')`` as arrays shaped like t."""
        raise NotImplementedError

    def target(self, x):
        """Return ``(g, g', g'')`` as arrays shaped like x."""
        raise NotImplementedError

    def check_t(self, t):
        t = np.asarray(t, dtype=float)
        if self.periodic:
            return
        a, b = self.domain
        if np.any(t < a) or np.any(t > b):
            raise DomainError(f"t outside geometry domain [{a}, {b}]")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class TorusToSphere(Geometry):
    """Maps of the flat torus to S^2 winding k times in the fibre direction."""

    k: int = 1

    periodic = True
    period = 2 * math.pi

    def __post_init__(self):
        if int(self.k) != self.k or self.k == 0:
            raise ValueError("k must be a nonzero integer")
        object.__setattr__(self, "k", int(self.k))

    @property
    def domain(self):
        return (0.0, 2 * math.pi)

    @property
    def lam(self):
        return float(self.k**2)

    def coefficients(self, t):
        one = np.ones_like(_arr(t))
        zero = 0.0 * one
        return one, zero, zero, zero, zero, zero, self.lam * one, zero, zero

    def target(self, x):
        s2, c2 = np.sin(2 * x), np.cos(2 * x)
        return 0.5 * s2, c2, -2.0 * s2

    def to_dict(self):
        return {"kind": "torus", "k": self.k}


@dataclass(frozen=True)
class WarpedProduct(Geometry):
    """Equivariant maps between warped products ``f^2 g_{S^m} + dr^2``.

    ``f_min`` is the smallest sampled value of ``f`` on the domain and must be
    positive; the Lagrangian divides by ``f**2``.
    """

    m: int = 3
    lam: float = 8.0
    f: WarpFn = field(default_factory=WarpFn)
    h: WarpFn = field(default_factory=WarpFn)
    domain: tuple = (1.0, 2.0)
    n_check: int = 10_000
    f_min: float = field(default=None, init=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        a, b = map(float, self.domain)
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ValueError("warped product needs a finite interval a < b")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "domain", (a, b))
        f_min = float(np.min(self.f(np.linspace(a, b, self.n_check))))
        if not f_min > 0:
            raise DomainError(f"warping function must be positive on [{a}, {b}] (min {f_min:.3g})")
        object.__setattr__(self, "f_min", f_min)

    def coefficients(self, t):
        t = _arr(t)
        f0, f1, f2, f3 = self.f.derivs(t)
        if np.any(f0 <= 0):
            raise DomainError("non-positive warping function at t")
        m, lam = self.m, self.lam
        u = f1 / f0
        u1 = f2 / f0 - u**2
        u2 = f3 / f0 - f2 * f1 / f0**2 - 2 * u * u1
        w = f0**m
        w1 = m * f0 ** (m - 1) * f1
        w2 = m * (m - 1) * f0 ** (m - 2) * f1**2 + m * f0 ** (m - 1) * f2
        b = lam / f0**2
        b1 = -2 * lam * f1 / f0**3
        b2 = -2 * lam * (f2 / f0**3 - 3 * f1**2 / f0**4)
        return w, w1, w2, m * u, m * u1, m * u2, b, b1, b2

    def target(self, x):
        h0, h1, h2, h3 = self.h.derivs(x)
        return h0 * h1, h1**2 + h0 * h2, 3 * h1 * h2 + h0 * h3

    def to_dict(self):
        return {"kind": "warped", "m": self.m, "lambda": self.lam, "f": self.f.to_dict(),
                "h": self.h.to_dict(), "domain": list(self.domain)}


@dataclass(frozen=True)
class EuclideanLog(Geometry):
    """Euclidean warped product after the substitution r = e^t."""

    m: int = 3
    lam: float = 8.0
    domain: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "domain", tuple(map(float, self.domain)))

    def coefficients(self, t):
        t = _arr(t)
        e = self.m - 3
        w = np.exp(e * t)
        one, zero = np.ones_like(t), np.zeros_like(t)
        return w, e * w, e * e * w, (self.m - 1) * one, zero, zero, self.lam * one, zero, zero

    def target(self, x):
        return x, np.ones_like(x), np.zeros_like(x)

    def to_dict(self):
        return {"kind": "euclidean_log", "m": self.m, "lambda": self.lam, "domain": list(self.domain)}


@dataclass(frozen=True)
class Cylinder(Geometry):
    """Maps from S^m x R with unit warping into Euclidean space."""

    lam: float = 1.0
    domain: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        object.__setattr__(self, "domain", tuple(map(float, self.domain)))

    def coefficients(self, t):
        t = _arr(t)
        one, zero = np.ones_like(t), np.zeros_like(t)
        return one, zero, zero, zero, zero, zero, self.lam * one, zero, zero

    def target(self, x):
        return x, np.ones_like(x), np.zeros_like(x)

    def to_dict(self):
        return {"kind": "cylinder", "lambda": self.lam, "domain": list(self.domain)}


@dataclass(frozen=True)
class DecoupledSystem(Geometry):
    """D-component problem whose Lagrangian is the sum of scalar catalog entries.

    All components share one independent variable, so their domains (and
    periodicity) must agree.
    """

    components: tuple = ()

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps or any(isinstance(c, DecoupledSystem) for c in comps):
            raise ValueError("need at least one scalar component")
        if len({c.periodic for c in comps}) != 1 or len({tuple(c.domain) for c in comps}) != 1:
            raise ValueError("components must share domain and periodicity")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self):
        return len(self.components)

    @property
    def periodic(self):
        return self.components[0].periodic

    @property
    def period(self):
        return self.components[0].period

    @property
    def domain(self):
        return self.components[0].domain

    def to_dict(self):
        return {"kind": "system", "components": [c.to_dict() for c in self.components]}


def _scalar_parts(geom):
    return geom.components if isinstance(geom, DecoupledSystem) else (geom,)


# --------------------------------------------------------------------------
# evaluation


def _tension_parts(geom, t, x, p, q):
    w, w1, w2, a, a1, a2, b, b1, b2 = geom.coefficients(t)
    g, g1, g2 = geom.target(x)
    T = q + a * p - b * g
    return (w, w1, w2), T, (a1 * p - b1 * g, -b * g1, a), (a2 * p - b2 * g, -b1 * g1, a1, -b * g2)


def first_partials(geom: Geometry, t, x, p, q):
    """``(L_x, L_p, L_q)`` as length-D arrays, computed in the dtype of the inputs.

    Skips the jet validation of :func:`eval_partials`; meant for inner loops that
    evaluate in extended precision.
    """
    out = [[], [], []]
    for j, comp in enumerate(_scalar_parts(geom)):
        (w, _, _), T, (_, Tx, Tp), _ = _tension_parts(comp, t, x[j], p[j], q[j])
        wT = 2 * w * T
        for lst, dT in zip(out, (Tx, Tp, 1)):
            lst.append(wT * dT)
    return tuple(np.array(v) for v in out)


def node_values(geom: Geometry, t, X, P, Q):
    """Vectorized ``L`` over nodes; X, P, Q have shape (n, D)."""
    total = 0.0
    for j, comp in enumerate(_scalar_parts(geom)):
        (w, _, _), T, _, _ = _tension_parts(comp, t, X[:, j], P[:, j], Q[:, j])
        total = total + w * T * T
    return total


def node_partials(geom: Geometry, t, X, P, Q):
    """Vectorized first and second partials in (x, p, q) over nodes.

    Returns ``(L, first, second)`` where ``first[v]`` has shape (n, D) for
    ``v`` in ``"xpq"`` and ``second[v1 + v2]`` has shape (n, D, D).
    """
    n, D = X.shape
    L = np.zeros(n)
    first = {v: np.zeros((n, D)) for v in "xpq"}
    second = {a + b: np.zeros((n, D, D)) for a in "xpq" for b in "xpq"}
    for j, comp in enumerate(_scalar_parts(geom)):
        (w, _, _), T, (_, Tx, Tp), (_, _, _, Txx) = _tension_parts(comp, t, X[:, j], P[:, j], Q[:, j])
        L += w * T * T
        grads = {"x": Tx, "p": Tp, "q": 1.0}
        for v, Tv in grads.items():
            first[v][:, j] = 2 * w * T * Tv
        for v1, T1 in grads.items():
            for v2, T2 in grads.items():
                val = 2 * w * T1 * T2
                if v1 == v2 == "x":
                    val = val + 2 * w * T * Txx
                second[v1 + v2][:, j, j] = val
    return L, first, second


def eval_lagrangian(geom: Geometry, jet: Jet2) -> float:
    """Integrand of the reduced bienergy at ``jet``."""
    _check_jet(geom, jet)
    one = lambda v: v[None, :]
    return float(node_values(geom, np.array([jet.t]), one(jet.x), one(jet.p), one(jet.q))[0])


def tension(geom: Geometry, jet: Jet2):
    """Reduced tension field; a float for scalar geometries, an array otherwise."""
    _check_jet(geom, jet)
    out = np.array([
        float(_tension_parts(c, jet.t, jet.x[j], jet.p[j], jet.q[j])[1])
        for j, c in enumerate(_scalar_parts(geom))
    ])
    return float(out[0]) if geom.dim == 1 else out


def volume_factor(geom: Geometry, t):
    return _scalar_parts(geom)[0].coefficients(t)[0]


def _check_jet(geom, jet):
    if jet.dim != geom.dim:
        raise ValueError(f"jet has D={jet.dim}, geometry expects D={geom.dim}")
    geom.check_t(jet.t)


@dataclass(frozen=True)
class PartialsL:
    """Value, gradient and Hessian of L over the variables ``(t, x, p, q)``.

    Variables are flattened as ``[t, x_0..x_{D-1}, p_0.., q_0..]``.
    """

    value: float
    grad: np.ndarray
    hess: np.ndarray
    dim: int

    def _slc(self, k):
        return slice(1 + k * self.dim, 1 + (k + 1) * self.dim)

    @property
    def L_t(self):
        return self.grad[0]

    @property
    def L_x(self):
        return self.grad[self._slc(0)]

    @property
    def L_p(self):
        return self.grad[self._slc(1)]

    @property
    def L_q(self):
        return self.grad[self._slc(2)]

    def block(self, a: str, b: str) -> np.ndarray:
        """Second-partial block, e.g. ``block("x", "q")``; ``"t"`` selects the scalar row."""
        idx = {"t": slice(0, 1), "x": self._slc(0), "p": self._slc(1), "q": self._slc(2)}
        return self.hess[idx[a], idx[b]]


def eval_partials(geom: Geometry, jet: Jet2) -> PartialsL:
    """Exact L, all first partials and all second partials at ``jet``."""
    _check_jet(geom, jet)
    D = geom.dim
    nv = 1 + 3 * D
    grad = np.zeros(nv)
    hess = np.zeros((nv, nv))
    value = 0.0
    for j, comp in enumerate(_scalar_parts(geom)):
        (w, w1, w2), T, (Tt, Tx, Tp), (Ttt, Ttx, Ttp, Txx) = (
            tuple(float(v) for v in grp) if isinstance(grp, tuple) else float(grp)
            for grp in _tension_parts(comp, jet.t, jet.x[j], jet.p[j], jet.q[j])
        )
        ix, ip, iq = 1 + j, 1 + D + j, 1 + 2 * D + j
        value += w * T * T
        Tz = {ix: Tx, ip: Tp, iq: 1.0}
        Ttz = {ix: Ttx, ip: Ttp, iq: 0.0}
        grad[0] += w1 * T * T + 2 * w * T * Tt
        for i, Ti in Tz.items():
            grad[i] = 2 * w * T * Ti
        hess[0, 0] += w2 * T * T + 4 * w1 * T * Tt + 2 * w * (Tt * Tt + T * Ttt)
        for i, Ti in Tz.items():
            hess[0, i] = 2 * w1 * T * Ti + 2 * w * (Tt * Ti + T * Ttz[i])
            for k, Tk in Tz.items():
                if k < i:
                    continue
                val = 2 * w * Ti * Tk
                if i == k == ix:
                    val += 2 * w * T * Txx
                hess[i, k] = val
    # mirror the upper triangle
    hess = np.triu(hess) + np.triu(hess, 1).T
    return PartialsL(value=value, grad=grad, hess=hess, dim=D)


def _flat(jet: Jet2):
    return np.concatenate([[jet.t], jet.x, jet.p, jet.q])


def _values_at(geom, Z, D):
    t = Z[:, 0]
    X, P, Q = Z[:, 1:1 + D], Z[:, 1 + D:1 + 2 * D], Z[:, 1 + 2 * D:]
    return node_values(geom, t, X, P, Q)


def check_partials_fd(geom: Geometry, jet: Jet2, step: float = 1e-4, partials=None) -> float:
    """Max abs discrepancy between analytic partials and Richardson-extrapolated FD.

    First partials use central differences, second partials use the standard
    central (mixed) stencils; each is extrapolated once from steps ``s`` and
    ``s/2``.  Stencil values are computed in ``np.longdouble`` so that the
    second-difference roundoff (``eps * |L| / s**2``) stays well below the
    discrepancies worth reporting.  ``partials`` overrides the analytic values
    (fault injection).
    """
    if not step > 0:
        raise ValueError("step must be positive")
    _check_jet(geom, jet)
    D = geom.dim
    z0 = _flat(jet).astype(np.longdouble)
    nv = z0.size
    eye = np.eye(nv, dtype=np.longdouble)
    step = np.longdouble(step)
    pl = partials if partials is not None else eval_partials(geom, jet)

    def first(s):
        Z = np.concatenate([z0 + s * eye, z0 - s * eye])
        f = _values_at(geom, Z, D)
        return (f[:nv] - f[nv:]) / (2 * s)

    def second(s):
        pts, idx = [], []
        for i in range(nv):
            for k in range(i, nv):
                ei, ek = s * eye[i], s * eye[k]
                if i == k:
                    pts += [z0 + ei, z0, z0 - ei, z0]
                else:
                    pts += [z0 + ei + ek, z0 + ei - ek, z0 - ei + ek, z0 - ei - ek]
                idx.append((i, k))
        f = _values_at(geom, np.array(pts), D).reshape(-1, 4)
        H = np.zeros((nv, nv), dtype=np.longdouble)
        for (i, k), (a, b, c, d) in zip(idx, f):
            H[i, k] = H[k, i] = (a - b - c + d) / (4 * s * s) if i != k else (a - b - d + c) / (s * s)
        return H

    g = (4 * first(step / 2) - first(step)) / 3
    H = (4 * second(step / 2) - second(step)) / 3
    return float(max(np.max(np.abs(g - pl.grad)), np.max(np.abs(H - pl.hess))))


def geometry_from_dict(d: dict) -> Geometry:
    """Build a catalog geometry from its ``to_dict`` form."""
    d = dict(d)
    kind = d.pop("kind", None)
    lam = d.pop("lambda", None)
    dom = d.pop("domain", None)
    extra = {} if dom is None else {"domain": tuple(dom)}
    if kind == "torus":
        geom = TorusToSphere(k=d.pop("k", 1))
    elif kind == "warped":
        geom = WarpedProduct(m=d.pop("m", 3), lam=lam, f=WarpFn(**d.pop("f", {})),
                             h=WarpFn(**d.pop("h", {})), **extra)
    elif kind == "euclidean_log":
        geom = EuclideanLog(m=d.pop("m", 3), lam=lam if lam is not None else 8.0, **extra)
    elif kind == "cylinder":
        geom = Cylinder(lam=lam if lam is not None else 1.0, **extra)
    elif kind == "system":
        geom = DecoupledSystem(tuple(geometry_from_dict(c) for c in d.pop("components", [])))
    else:
        raise ValueError(f"unknown geometry kind {kind!r}")
    if d:
        raise ValueError(f"unknown geometry keys: {sorted(d)}")
    return geom
