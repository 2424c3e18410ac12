"""Manufactured solution on the unit square.

The fields satisfy all three boundary conditions and are exactly
divergence-free:

    u* = g(t) (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y))
    B* = g(t) (sin(pi x) cos(pi y),     -cos(pi x) sin(pi y))
    p* = g(t) cos(pi x) cos(pi y),      g(t) = exp(-t)

The body force and the magnetic source that make (u*, B*, p*) an exact
solution of the momentum/induction equations are derived symbolically
(sympy) and compiled to numpy functions.  That derivation is a route
independent of the jet arithmetic, so comparing jet-evaluated residuals
against it validates both.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp

from ..jets import Jet2, jcos, jexp, jet_seed, jsin
from ..loss import ProblemData
from ..network import FieldSample
from ..physics import PhysicsParams

UNIT_SQUARE = (0.0, 1.0, 0.0, 1.0)


@lru_cache(maxsize=16)
def _derive_data(nu: float, mu: float, S: float):
    """Symbolic forcing f = L_f[u*,B*,p*] and source sB = L_B[u*,B*]."""
    x, y, t = sp.symbols("x y t")
    g = sp.exp(-t)
    u1 = g * sp.sin(sp.pi * x) ** 2 * sp.sin(2 * sp.pi * y)
    u2 = -g * sp.sin(2 * sp.pi * x) * sp.sin(sp.pi * y) ** 2
    B1 = g * sp.sin(sp.pi * x) * sp.cos(sp.pi * y)
    B2 = -g * sp.cos(sp.pi * x) * sp.sin(sp.pi * y)
    p = g * sp.cos(sp.pi * x) * sp.cos(sp.pi * y)

    lap = lambda f: sp.diff(f, x, 2) + sp.diff(f, y, 2)
    c = sp.diff(B2, x) - sp.diff(B1, y)            # scalar curl of B
    fx = (sp.diff(u1, t) - nu * lap(u1) + u1 * sp.diff(u1, x)
          + u2 * sp.diff(u1, y) + S * c * B2 + sp.diff(p, x))
    fy = (sp.diff(u2, t) - nu * lap(u2) + u1 * sp.diff(u2, x)
          + u2 * sp.diff(u2, y) - S * c * B1 + sp.diff(p, y))
    w = u1 * B2 - u2 * B1                          # z-part of u x B
    sBx = sp.diff(B1, t) + mu * sp.diff(c, y) - sp.diff(w, y)
    sBy = sp.diff(B2, t) - mu * sp.diff(c, x) + sp.diff(w, x)

    args = (x, y, t)
    lam = lambda e: sp.lambdify(args, e.doit(), modules="numpy", cse=True)
    return lam(fx), lam(fy), lam(sBx), lam(sBy)


class ManufacturedSolution:
    """Closed-form reference fields plus the data that makes them exact."""

    def __init__(self, phys: PhysicsParams):
        if tuple(phys.domain) != UNIT_SQUARE:
            raise ValueError("manufactured solution requires the unit square")
        self.phys = phys
        self._fx, self._fy, self._sBx, self._sBy = _derive_data(
            phys.nu, phys.mu, phys.S)

    # -- jet evaluators ----------------------------------------------------
    def u_jets(self, x, y, t) -> tuple[Jet2, Jet2]:
        jx, jy, jt = jet_seed(x, y, t)
        g = jexp(-jt)
        sx, sy = jsin(np.pi * jx), jsin(np.pi * jy)
        s2x, s2y = jsin(2 * np.pi * jx), jsin(2 * np.pi * jy)
        return g * sx * sx * s2y, -1.0 * g * s2x * sy * sy

    def B_jets(self, x, y, t) -> tuple[Jet2, Jet2]:
        jx, jy, jt = jet_seed(x, y, t)
        g = jexp(-jt)
        return (g * jsin(np.pi * jx) * jcos(np.pi * jy),
                -1.0 * g * jcos(np.pi * jx) * jsin(np.pi * jy))

    def p_jet(self, x, y, t) -> Jet2:
        jx, jy, jt = jet_seed(x, y, t)
        return jexp(-jt) * jcos(np.pi * jx) * jcos(np.pi * jy)

    # -- plain values --------------------------------------------------------
    def envelope(self, t):
        return np.exp(-np.asarray(t, dtype=float))

    def u_values(self, x, y, t):
        g = self.envelope(t)
        return (g * np.sin(np.pi * x) ** 2 * np.sin(2 * np.pi * y),
                -g * np.sin(2 * np.pi * x) * np.sin(np.pi * y) ** 2)

    def B_values(self, x, y, t):
        g = self.envelope(t)
        return (g * np.sin(np.pi * x) * np.cos(np.pi * y),
                -g * np.cos(np.pi * x) * np.sin(np.pi * y))

    def p_values(self, x, y, t):
        return self.envelope(t) * np.cos(np.pi * x) * np.cos(np.pi * y)

    # -- derived data --------------------------------------------------------
    def forcing(self, x, y, t):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(t))
        return (np.broadcast_to(self._fx(x, y, t), shape).astype(float),
                np.broadcast_to(self._fy(x, y, t), shape).astype(float))

    def source(self, x, y, t):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(t))
        return (np.broadcast_to(self._sBx(x, y, t), shape).astype(float),
                np.broadcast_to(self._sBy(x, y, t), shape).astype(float))

    def u0(self, x, y):
        return self.u_values(x, y, 0.0)

    def B0(self, x, y):
        return self.B_values(x, y, 0.0)

    # -- oracle field-sample evaluator (network stand-in) --------------------
    def field_sample(self, x, y, t) -> FieldSample:
        ux, uy = self.u_jets(x, y, t)
        Bx, By = self.B_jets(x, y, t)
        return FieldSample(ux, uy, Bx, By, self.p_jet(x, y, t))

    __call__ = field_sample

    def problem_data(self, forcing_scale: float = 1.0) -> ProblemData:
        if forcing_scale == 1.0:
            forcing = self.forcing
        else:
            def forcing(x, y, t, _s=forcing_scale):
                fx, fy = self.forcing(x, y, t)
                return _s * fx, _s * fy
        return ProblemData(forcing=forcing, u0=self.u0, B0=self.B0,
                           source=self.source)


def mms_default(phys: PhysicsParams) -> ManufacturedSolution:
    """The package's default manufactured solution (unit square only)."""
    return ManufacturedSolution(phys)
