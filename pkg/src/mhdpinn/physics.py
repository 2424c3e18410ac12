"""2D incompressible MHD operators, residuals and variational forms.

2D conventions: the scalar curl of a vector field v is
``curl v = dx(v_y) - dy(v_x)``; the vector curl of a scalar c is
``(dy c, -dx c)``; for B = (B_x, B_y), ``B x curl B = curlB * (B_y, -B_x)``.

The residual formulas only read slot attributes (``.val``, ``.dx``, ...)
and combine them with ``+ - *``, so they evaluate identically on plain
:class:`~mhdpinn.jets.Jet2` fields and on taped jet views.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysicsParams:
    """Coefficients, final time and the rectangular domain."""

    nu: float = 1.0          # fluid viscous diffusivity
    mu: float = 1.0          # magnetic diffusivity
    S: float = 1.0           # coupling coefficient
    T: float = 1.0
    domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)

    def __post_init__(self):
        if min(self.nu, self.mu, self.S) <= 0.0:
            raise ValueError("nu, mu and S must be strictly positive")
        x0, x1, y0, y1 = self.domain
        if not (x1 > x0 and y1 > y0 and self.T > 0.0):
            raise ValueError("degenerate domain or non-positive final time")

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.domain
        return (x1 - x0) * (y1 - y0)

    @property
    def perimeter(self) -> float:
        x0, x1, y0, y1 = self.domain
        return 2.0 * ((x1 - x0) + (y1 - y0))


def curl2(vx, vy):
    """Scalar curl dx(v_y) - dy(v_x) of a 2D field given as two jets."""
    return vy.dx - vx.dy


def div2(field):
    """Divergence of a 2D field given as a (v_x, v_y) jet pair."""
    vx, vy = field
    return vx.dx + vy.dy


def residual_f(s, phys: PhysicsParams):
    """Momentum residual: dt u - nu*Lap u + (u.grad)u + S B x curlB + grad p - f."""
    ux, uy, Bx, By, p = s.ux, s.uy, s.Bx, s.By, s.p
    c = curl2(Bx, By)
    rx = (ux.dt - phys.nu * (ux.dxx + ux.dyy)
          + ux.val * ux.dx + uy.val * ux.dy
          + phys.S * (c * By.val) + p.dx - s.fx)
    ry = (uy.dt - phys.nu * (uy.dxx + uy.dyy)
          + ux.val * uy.dx + uy.val * uy.dy
          - phys.S * (c * Bx.val) + p.dy - s.fy)
    return rx, ry


def residual_B(s, phys: PhysicsParams):
    """Induction residual: dt B + mu*curl curl B - curl(u x B) - source."""
    ux, uy, Bx, By = s.ux, s.uy, s.Bx, s.By
    # curl curl B = (dy c, -dx c) with c = curl B
    ccx = By.dxy - Bx.dyy
    ccy = Bx.dxy - By.dxx
    # w = z-component of u x B; curl(w e_z) = (dy w, -dx w) by product rule
    wx = (ux.dy * By.val + ux.val * By.dy
          - uy.dy * Bx.val - uy.val * Bx.dy)
    wy = (ux.dx * By.val + ux.val * By.dx
          - uy.dx * Bx.val - uy.val * Bx.dx)
    rx = Bx.dt + phys.mu * ccx - wx - s.sBx
    ry = By.dt + phys.mu * ccy + wy - s.sBy
    return rx, ry


def boundary_terms(s, normal):
    """Boundary penalties at points of the sample: u, B.n and scalar curl B.

    ``normal`` is an array of outward unit normals, shape (batch, 2).  In 2D
    the condition curl B x n = 0 reduces to curl B = 0 on the boundary.
    """
    normal = np.asarray(normal, dtype=float)
    nx, ny = normal[..., 0], normal[..., 1]
    u_pen = (s.ux.val, s.uy.val)
    Bn = s.Bx.val * nx + s.By.val * ny
    return u_pen, Bn, curl2(s.Bx, s.By)


# ---------------------------------------------------------------------------
# variational forms (Monte-Carlo quadrature over Omega at fixed t)

FORM_NAMES = ("a_f", "a_B", "d", "b", "c_hat", "c_tilde")


def _grad_dot(a, b):
    return a.dx * b.dx + a.dy * b.dy


def _form_integrand(form: str, fields, t, phys: PhysicsParams, x, y):
    evals = [f(x, y, t) for f in fields]
    if form == "a_f":
        (u, v) = evals
        return phys.nu * (_grad_dot(u[0], v[0]) + _grad_dot(u[1], v[1]))
    if form == "a_B":
        # as printed in the weak form: mu (curlB, curlH) + mu (divB, divH)
        (B, H) = evals
        return phys.mu * (curl2(*B) * curl2(*H) + div2(B) * div2(H))
    if form == "d":
        (v, q) = evals
        return q.val * div2(v)
    if form == "b":
        # skew-symmetrized trilinear form 1/2 [(w.grad)u.v - (w.grad)v.u]
        (w, u, v) = evals
        adv_u_v = ((w[0].val * u[0].dx + w[1].val * u[0].dy) * v[0].val
                   + (w[0].val * u[1].dx + w[1].val * u[1].dy) * v[1].val)
        adv_v_u = ((w[0].val * v[0].dx + w[1].val * v[0].dy) * u[0].val
                   + (w[0].val * v[1].dx + w[1].val * v[1].dy) * u[1].val)
        return 0.5 * (adv_u_v - adv_v_u)
    if form == "c_hat":
        # S (H x curl B) . v with H x (c e_z) = c (H_y, -H_x)
        (H, B, v) = evals
        c = curl2(*B)
        return phys.S * c * (H[1].val * v[0].val - H[0].val * v[1].val)
    if form == "c_tilde":
        # (u x B) . curl H, both z-scalars in 2D
        (u, B, H) = evals
        w = u[0].val * B[1].val - u[1].val * B[0].val
        return w * curl2(*H)
    raise ValueError(f"unknown form {form!r}; expected one of {FORM_NAMES}")


def forms_quadrature(form: str, fields, batch, t: float,
                     phys: PhysicsParams) -> tuple[float, float]:
    """Monte-Carlo estimate of a named integral form over Omega at time t.

    ``fields`` is a sequence of evaluators ``(x, y, t) -> (Jet2, Jet2)``
    (a single Jet2 for the scalar argument of form ``d``), in the argument
    order of the form.  Uses the spatial coordinates of ``batch.interior``.
    Returns (estimate, Monte-Carlo standard error).
    """
    pts = batch.interior
    if len(pts) == 0:
        raise ValueError("empty collocation batch")
    x, y = pts[:, 0], pts[:, 1]
    vals = np.asarray(_form_integrand(form, fields, t, phys, x, y))
    vals = np.broadcast_to(vals, x.shape)  # constant integrands collapse
    est = phys.area * float(np.mean(vals))
    stderr = phys.area * float(np.std(vals, ddof=1)) / np.sqrt(len(vals))
    return est, stderr
