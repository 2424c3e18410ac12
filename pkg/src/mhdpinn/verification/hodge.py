"""Discrete Helmholtz-Hodge splitting of a sampled 2D vector field.

A field w sampled on a uniform cell-centered N x N grid is split as
w = w1 + w2 with w2 = grad(phi) a discrete gradient and w1 the remainder.
phi solves the normal equations G^T G phi = G^T w, where G is the discrete
gradient operator (centered differences inside, one-sided at the edges).
Because w2 = G phi with the same G, the inner product (w1, w2) equals the
normal-equation residual paired with phi, so orthogonality holds to the
linear-solve tolerance by construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg


@dataclass
class GridField:
    """A vector field sampled at the centers of an N x N uniform grid."""

    N: int
    h: float
    vx: np.ndarray   # shape (N, N), first index along x
    vy: np.ndarray

    def __post_init__(self):
        self.vx = np.asarray(self.vx, dtype=float)
        self.vy = np.asarray(self.vy, dtype=float)
        if self.vx.shape != (self.N, self.N) or self.vy.shape != (self.N, self.N):
            raise ValueError("component arrays must have shape (N, N)")

    def norm(self) -> float:
        return float(np.sqrt(self.h**2 * (np.sum(self.vx**2) + np.sum(self.vy**2))))

    def inner(self, other: "GridField") -> float:
        return float(self.h**2 * (np.sum(self.vx * other.vx)
                                  + np.sum(self.vy * other.vy)))


def _diff1(phi: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Centered first derivative, one-sided at the two edge layers."""
    out = (np.roll(phi, -1, axis=axis) - np.roll(phi, 1, axis=axis)) / (2 * h)
    sl = [slice(None)] * phi.ndim

    def take(i):
        sl2 = list(sl)
        sl2[axis] = i
        return phi[tuple(sl2)]

    first = (take(1) - take(0)) / h
    last = (take(-1) - take(-2)) / h
    sl_first, sl_last = list(sl), list(sl)
    sl_first[axis], sl_last[axis] = 0, phi.shape[axis] - 1
    out[tuple(sl_first)] = first
    out[tuple(sl_last)] = last
    return out


def _diff1_adjoint(g: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Exact adjoint of _diff1 with respect to the unweighted dot product."""
    n = g.shape[axis]
    out = (np.roll(g, 1, axis=axis) - np.roll(g, -1, axis=axis)) / (2 * h)

    def row(i):
        sl = [slice(None)] * g.ndim
        sl[axis] = i
        return tuple(sl)

    if n < 4:
        raise ValueError("adjoint stencil needs at least 4 points per axis")
    # Undo the periodic wrap of roll at both ends, then add the
    # contributions of the one-sided stencils at rows 0 and n-1.
    out[row(0)] = -g[row(1)] / (2 * h)
    out[row(1)] = -g[row(2)] / (2 * h)
    out[row(-2)] = g[row(-3)] / (2 * h)
    out[row(-1)] = g[row(-2)] / (2 * h)
    out[row(0)] += -g[row(0)] / h
    out[row(1)] += g[row(0)] / h
    out[row(-2)] += -g[row(-1)] / h
    out[row(-1)] += g[row(-1)] / h
    return out


def gradient(phi: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    return _diff1(phi, 0, h), _diff1(phi, 1, h)


def gradient_adjoint(gx: np.ndarray, gy: np.ndarray, h: float) -> np.ndarray:
    return _diff1_adjoint(gx, 0, h) + _diff1_adjoint(gy, 1, h)


def sample_grid_field(field, N: int, t: float = 0.0,
                      domain=(0.0, 1.0, 0.0, 1.0)) -> GridField:
    """Sample a callable (x, y, t) -> (vx, vy) at cell centers."""
    x0, x1, y0, y1 = domain
    if x1 - x0 != y1 - y0:
        raise ValueError("grid sampling requires a square domain")
    h = (x1 - x0) / N
    xs = x0 + h * (np.arange(N) + 0.5)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vx, vy = field(X.ravel(), Y.ravel(), np.full(N * N, t))
    return GridField(N=N, h=h,
                     vx=np.asarray(vx, float).reshape(N, N),
                     vy=np.asarray(vy, float).reshape(N, N))


def hodge_decompose(w: GridField, tol: float = 1e-10,
                    maxiter: int | None = None):
    """Split w into (w1, w2) with w2 a discrete gradient and (w1, w2) ~ 0."""
    N, h = w.N, w.h
    if maxiter is None:
        maxiter = 50 * N

    def matvec(phi_flat):
        phi = phi_flat.reshape(N, N)
        phi = phi - phi.mean()          # fix the constant null space
        gx, gy = gradient(phi, h)
        return gradient_adjoint(gx, gy, h).ravel()

    A = LinearOperator((N * N, N * N), matvec=matvec, dtype=float)
    rhs = gradient_adjoint(w.vx, w.vy, h).ravel()
    rhs -= rhs.mean()
    phi_flat, info = cg(A, rhs, rtol=tol, atol=0.0, maxiter=maxiter)
    if info != 0:
        raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    phi = phi_flat.reshape(N, N)
    phi -= phi.mean()
    gx, gy = gradient(phi, h)
    w2 = GridField(N=N, h=h, vx=gx, vy=gy)
    w1 = GridField(N=N, h=h, vx=w.vx - gx, vy=w.vy - gy)
    return w1, w2


def decomposition_report(w: GridField, tol: float = 1e-10) -> dict:
    """Norm fractions and the orthogonality defect of the splitting."""
    w1, w2 = hodge_decompose(w, tol=tol)
    nw, n1, n2 = w.norm(), w1.norm(), w2.norm()
    ortho = abs(w1.inner(w2)) / (n1 * n2) if n1 > 0 and n2 > 0 else 0.0
    return {"norm_w": nw,
            "frac_w1": n1 / nw if nw > 0 else 0.0,
            "frac_w2": n2 / nw if nw > 0 else 0.0,
            "orthogonality": ortho}


def dump_csv(path, w: GridField, w1: GridField, w2: GridField) -> None:
    """Write the field and its two parts, one grid point per row."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "x", "y",
                         "wx", "wy", "w1x", "w1y", "w2x", "w2y"])
        h = w.h
        for i in range(w.N):
            for j in range(w.N):
                writer.writerow([i, j, repr(h * (i + 0.5)), repr(h * (j + 0.5)),
                                 repr(float(w.vx[i, j])), repr(float(w.vy[i, j])),
                                 repr(float(w1.vx[i, j])), repr(float(w1.vy[i, j])),
                                 repr(float(w2.vx[i, j])), repr(float(w2.vy[i, j]))])
