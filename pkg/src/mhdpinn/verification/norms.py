"""Space-time error norms and energy diagnostics.

Spatial integrals use the midpoint rule on a uniform tensor grid, which
is exact enough at the resolutions used here (second order in 1/N).  The
sup over time is taken on an endpoint-inclusive uniform time grid; the
L^4-in-time integral uses time midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..network import NetworkParams, forward_jet, forward_values
from ..physics import PhysicsParams


def _midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    edges = np.linspace(lo, hi, n + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def _grid(phys: PhysicsParams, resolution: int):
    x0, x1, y0, y1 = phys.domain
    xs = _midpoints(x0, x1, resolution)
    ys = _midpoints(y0, y1, resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    cell = (x1 - x0) * (y1 - y0) / resolution**2
    return X.ravel(), Y.ravel(), cell


def _uB_values(model, x, y, t):
    """(ux, uy, Bx, By) arrays from a parameter set or a field callable."""
    if isinstance(model, NetworkParams):
        vals = forward_values(model, x, y, t)
        return vals[:, 0], vals[:, 1], vals[:, 2], vals[:, 3]
    s = model(x, y, t)
    def v(a):
        return a.val if hasattr(a, "val") else np.asarray(a, dtype=float)
    return v(s.ux), v(s.uy), v(s.Bx), v(s.By)


@dataclass
class ErrorReport:
    """Space-time discrepancies between a model and a reference field."""

    sup_u: float          # sup over t of ||u - u_ref||_{L^2}
    sup_B: float
    l4_u: float           # L^4 in time of ||u - u_ref||_{L^2}
    l4_B: float
    ref_sup_u: float
    ref_sup_B: float
    ref_l4_u: float
    ref_l4_B: float

    @property
    def rel_sup_u(self) -> float:
        return self.sup_u / self.ref_sup_u if self.ref_sup_u > 0 else np.inf

    @property
    def rel_sup_B(self) -> float:
        return self.sup_B / self.ref_sup_B if self.ref_sup_B > 0 else np.inf


def _l2_diff(model, reference, x, y, cell, t):
    tt = np.full_like(x, t)
    ux, uy, Bx, By = _uB_values(model, x, y, tt)
    rx, ry, rBx, rBy = _uB_values(reference, x, y, tt)
    du = np.sqrt(cell * float(np.sum((ux - rx) ** 2 + (uy - ry) ** 2)))
    dB = np.sqrt(cell * float(np.sum((Bx - rBx) ** 2 + (By - rBy) ** 2)))
    ru = np.sqrt(cell * float(np.sum(rx**2 + ry**2)))
    rB = np.sqrt(cell * float(np.sum(rBx**2 + rBy**2)))
    return du, dB, ru, rB


def error_norms(model, reference, phys: PhysicsParams,
                resolution: int = 48, time_slices: int = 17) -> ErrorReport:
    """Sup-in-time and L^4-in-time L^2 errors of u and B against a reference."""
    if resolution < 4:
        raise ValueError("resolution must be at least 4")
    if time_slices < 3:
        raise ValueError("time_slices must be at least 3")
    x, y, cell = _grid(phys, resolution)

    t_sup = np.linspace(0.0, phys.T, time_slices)
    sup_u = sup_B = ref_sup_u = ref_sup_B = 0.0
    for t in t_sup:
        du, dB, ru, rB = _l2_diff(model, reference, x, y, cell, float(t))
        sup_u, sup_B = max(sup_u, du), max(sup_B, dB)
        ref_sup_u, ref_sup_B = max(ref_sup_u, ru), max(ref_sup_B, rB)

    t_mid = _midpoints(0.0, phys.T, time_slices - 1)
    dt = phys.T / (time_slices - 1)
    s_u = s_B = r_u = r_B = 0.0
    for t in t_mid:
        du, dB, ru, rB = _l2_diff(model, reference, x, y, cell, float(t))
        s_u += dt * du**4
        s_B += dt * dB**4
        r_u += dt * ru**4
        r_B += dt * rB**4
    return ErrorReport(sup_u=sup_u, sup_B=sup_B,
                       l4_u=s_u**0.25, l4_B=s_B**0.25,
                       ref_sup_u=ref_sup_u, ref_sup_B=ref_sup_B,
                       ref_l4_u=r_u**0.25, ref_l4_B=r_B**0.25)


def l4l2_distance(model_a, model_b, phys: PhysicsParams,
                  resolution: int = 48, time_slices: int = 17):
    """L^4([0,T]; L^2) distances between two fields, for u and B separately."""
    x, y, cell = _grid(phys, resolution)
    t_mid = _midpoints(0.0, phys.T, time_slices - 1)
    dt = phys.T / (time_slices - 1)
    s_u = s_B = 0.0
    for t in t_mid:
        du, dB, _, _ = _l2_diff(model_a, model_b, x, y, cell, float(t))
        s_u += dt * du**4
        s_B += dt * dB**4
    return s_u**0.25, s_B**0.25


@dataclass
class EnergyReport:
    """Kinetic/magnetic energy levels and dissipation integrals."""

    sup_u2: float         # sup over t of ||u||_{L^2}^2
    sup_B2: float
    int_grad_u2: float    # integral over [0,T] of ||grad u||_{L^2}^2
    int_grad_B2: float

    @property
    def finite(self) -> bool:
        return all(np.isfinite(v) for v in
                   (self.sup_u2, self.sup_B2,
                    self.int_grad_u2, self.int_grad_B2))

    def bounded_by(self, ceiling: float) -> bool:
        return self.finite and max(
            self.sup_u2, self.sup_B2,
            self.int_grad_u2, self.int_grad_B2) <= ceiling


def _jet_fields(model, x, y, t):
    if isinstance(model, NetworkParams):
        return forward_jet(model, x, y, t)
    return model(x, y, t)


def energy_check(model, phys: PhysicsParams,
                 resolution: int = 48, time_slices: int = 17) -> EnergyReport:
    """Energy levels and gradient dissipation of a field over [0, T]."""
    x, y, cell = _grid(phys, resolution)
    t_sup = np.linspace(0.0, phys.T, time_slices)
    sup_u2 = sup_B2 = 0.0
    for t in t_sup:
        tt = np.full_like(x, float(t))
        ux, uy, Bx, By = _uB_values(model, x, y, tt)
        sup_u2 = max(sup_u2, cell * float(np.sum(ux**2 + uy**2)))
        sup_B2 = max(sup_B2, cell * float(np.sum(Bx**2 + By**2)))

    t_mid = _midpoints(0.0, phys.T, time_slices - 1)
    dt = phys.T / (time_slices - 1)
    g_u = g_B = 0.0
    for t in t_mid:
        tt = np.full_like(x, float(t))
        s = _jet_fields(model, x, y, tt)
        gu = np.sum(s.ux.dx**2 + s.ux.dy**2 + s.uy.dx**2 + s.uy.dy**2)
        gB = np.sum(s.Bx.dx**2 + s.Bx.dy**2 + s.By.dx**2 + s.By.dy**2)
        g_u += dt * cell * float(gu)
        g_B += dt * cell * float(gB)
    return EnergyReport(sup_u2=sup_u2, sup_B2=sup_B2,
                        int_grad_u2=g_u, int_grad_B2=g_B)
