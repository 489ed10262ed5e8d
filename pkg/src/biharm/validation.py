"""Input validation helpers shared by the estimator and the CLI."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .euler_lagrange import BoundaryConditions, Grid
from .lagrangian import Geometry, geometry_from_dict


def check_profile(X, n_min: int = 8) -> np.ndarray:
    """Return profile samples as a finite float array of shape (n, D)."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    X = check_array(X, dtype=np.float64, ensure_min_samples=n_min)
    return X


def check_geometry(geometry) -> Geometry:
    if isinstance(geometry, Geometry):
        return geometry
    if isinstance(geometry, dict):
        return geometry_from_dict(geometry)
    raise TypeError(f"expected a Geometry or a dict, got {type(geometry).__name__}")


def check_bc(bc) -> BoundaryConditions:
    if bc is None:
        return BoundaryConditions("periodic")
    if isinstance(bc, BoundaryConditions):
        return bc
    if isinstance(bc, dict):
        return BoundaryConditions(**bc)
    raise TypeError(f"expected BoundaryConditions or a dict, got {type(bc).__name__}")


def make_grid(geom: Geometry, n: int, bc=None, interval=None) -> Grid:
    """Grid over ``interval`` (or the geometry domain) with validated conditions."""
    bc = check_bc(bc)
    if geom.periodic:
        if bc.kind != "periodic":
            raise ValueError("periodic geometry requires periodic boundary conditions")
        return Grid.for_geometry(geom, n)
    if bc.kind != "clamped":
        raise ValueError("non-periodic geometry requires clamped boundary conditions")
    a, b = interval if interval is not None else geom.domain
    return Grid(float(a), float(b), n, bc)
