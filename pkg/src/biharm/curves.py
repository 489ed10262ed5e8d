"""Smooth curves with exact jets, used as residual probes and manufactured data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_interp_spline

from .lagrangian import Jet4


def _real(t):
    # keep extended precision when given, promote ints to float
    t = np.asarray(t)
    return t if t.dtype.kind == "f" else t.astype(float)


@dataclass(frozen=True)
class ConstantCurve:
    value: float

    def __call__(self, t):
        return np.full_like(_real(t), self.value)

    def jet(self, t: float) -> Jet4:
        return Jet4(t, self.value, 0.0, 0.0, u=0.0, v=0.0)

    def jet_values(self, t):
        z = _real(t)[()] * 0
        return z + self.value, z, z


@dataclass(frozen=True)
class FourierCurve:
    """``base + amplitude * cos(mode t + phase)``."""

    base: float
    amplitude: float
    mode: int = 1
    phase: float = 0.0

    def __call__(self, t):
        return self.base + self.amplitude * np.cos(self.mode * _real(t) + self.phase)

    def jet_values(self, t):
        """``(x, p, q)`` at ``t`` in the precision of ``t``."""
        k, A = self.mode, self.amplitude
        arg = k * _real(t)[()] + self.phase
        c, s = np.cos(arg), np.sin(arg)
        return self.base + A * c, -A * k * s, -A * k**2 * c

    def jet(self, t: float) -> Jet4:
        k, A = self.mode, self.amplitude
        arg = k * _real(t)[()] + self.phase
        c, s = np.cos(arg), np.sin(arg)
        return Jet4(t, self.base + A * c, -A * k * s, -A * k**2 * c, u=A * k**3 * s, v=A * k**4 * c)


class SplineCurve:
    """Quintic interpolating spline through grid samples (periodic when the grid is).

    Derivatives are those of the spline, so they are exact for the spline but
    only approximate the sampled profile to the spline's order.
    """

    def __init__(self, t, values, periodic: bool = False, period: float | None = None):
        t = np.asarray(t, dtype=float)
        y = np.asarray(values, dtype=float)
        self.periodic = periodic
        if periodic:
            t = np.append(t, t[0] + period)
            y = np.append(y, y[0])
            self._spline = make_interp_spline(t, y, k=5, bc_type="periodic")
            self._a, self._period = float(t[0]), float(period)
        else:
            self._spline = make_interp_spline(t, y, k=5)

    @classmethod
    def from_discrete(cls, df, component: int = 0) -> "SplineCurve":
        grid = df.grid
        return cls(grid.nodes, df.values[:, component], periodic=grid.periodic,
                   period=(grid.b - grid.a) if grid.periodic else None)

    def _wrap(self, t):
        if not self.periodic:
            return t
        return self._a + np.mod(np.asarray(t, dtype=float) - self._a, self._period)

    def __call__(self, t):
        return self._spline(self._wrap(t))

    def jet(self, t: float) -> Jet4:
        tt = float(self._wrap(t))
        x, p, q, u, v = (float(self._spline(tt, nu)) for nu in range(5))
        return Jet4(t, x, p, q, u=u, v=v)
