"""Collocation-point generation and Monte-Carlo quadrature weights."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import qmc

STRATEGIES = ("uniform", "low-discrepancy")


@dataclass
class CollocationBatch:
    """Interior / boundary / initial point sets with quadrature weights.

    interior: (m, 3) points in Omega x (0, T]
    boundary: (n, 3) points on the four edges, with outward unit normals
    initial:  (k, 2) points in Omega at t = 0
    Weights are |Omega_T|/m, |dOmega_T|/n and |Omega|/k respectively.
    """

    interior: np.ndarray
    boundary: np.ndarray
    normals: np.ndarray
    initial: np.ndarray
    w_interior: float
    w_boundary: float
    w_initial: float
    domain: tuple[float, float, float, float]
    T: float


def _open01(u: np.ndarray) -> np.ndarray:
    """Map [0,1) samples into the open interval (0,1)."""
    return np.clip(u, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def _edge_points(domain, s: np.ndarray):
    """Map arc-length fractions s in [0,1) onto the rectangle boundary."""
    x0, x1, y0, y1 = domain
    lx, ly = x1 - x0, y1 - y0
    per = 2.0 * (lx + ly)
    d = s * per
    pts = np.empty((len(s), 2))
    nrm = np.empty((len(s), 2))
    # edges in order: bottom, right, top, left
    on = d < lx
    pts[on] = np.stack([x0 + d[on], np.full(on.sum(), y0)], axis=1)
    nrm[on] = (0.0, -1.0)
    m = (d >= lx) & (d < lx + ly)
    pts[m] = np.stack([np.full(m.sum(), x1), y0 + (d[m] - lx)], axis=1)
    nrm[m] = (1.0, 0.0)
    m = (d >= lx + ly) & (d < 2 * lx + ly)
    pts[m] = np.stack([x1 - (d[m] - lx - ly), np.full(m.sum(), y1)], axis=1)
    nrm[m] = (0.0, 1.0)
    m = d >= 2 * lx + ly
    pts[m] = np.stack([np.full(m.sum(), x0), y1 - (d[m] - 2 * lx - ly)],
                      axis=1)
    nrm[m] = (-1.0, 0.0)
    return pts, nrm


def sample_batch(domain, T: float, m: int, n: int, k: int, seed: int = 0,
                 strategy: str = "uniform") -> CollocationBatch:
    """Draw a collocation batch, deterministic in (seed, counts, domain).

    ``low-discrepancy`` uses a seeded scrambled Halton sequence (3D for the
    interior, 2D for boundary arc-length x time, 2D for the initial slice).
    """
    if min(m, n, k) < 1:
        raise ValueError("point counts must all be at least 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    x0, x1, y0, y1 = domain
    if strategy == "uniform":
        rng = np.random.default_rng(seed)
        u_int = rng.random((m, 3))
        u_bnd = rng.random((n, 2))
        u_ini = rng.random((k, 2))
    else:
        u_int = qmc.Halton(3, seed=seed).random(m)
        u_bnd = qmc.Halton(2, seed=seed + 1).random(n)
        u_ini = qmc.Halton(2, seed=seed + 2).random(k)

    ui = _open01(u_int)
    interior = np.stack([
        x0 + (x1 - x0) * ui[:, 0],
        y0 + (y1 - y0) * ui[:, 1],
        T * ui[:, 2],                        # t in (0, T]
    ], axis=1)
    bpts, normals = _edge_points(domain, u_bnd[:, 0])
    boundary = np.column_stack([bpts, T * _open01(u_bnd[:, 1])])
    uk = _open01(u_ini)
    initial = np.stack([x0 + (x1 - x0) * uk[:, 0],
                        y0 + (y1 - y0) * uk[:, 1]], axis=1)

    area = (x1 - x0) * (y1 - y0)
    perim = 2.0 * ((x1 - x0) + (y1 - y0))
    return CollocationBatch(
        interior=interior, boundary=boundary, normals=normals,
        initial=initial,
        w_interior=area * T / m, w_boundary=perim * T / n, w_initial=area / k,
        domain=tuple(domain), T=T)


def dump_csv(batch: CollocationBatch, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["kind", "x", "y", "t", "nx", "ny"])
        for p in batch.interior:
            wr.writerow(["interior", repr(float(p[0])), repr(float(p[1])),
                         repr(float(p[2])), 0, 0])
        for p, nv in zip(batch.boundary, batch.normals):
            wr.writerow(["boundary", repr(float(p[0])), repr(float(p[1])),
                         repr(float(p[2])), repr(float(nv[0])),
                         repr(float(nv[1]))])
        for p in batch.initial:
            wr.writerow(["initial", repr(float(p[0])), repr(float(p[1])),
                         0.0, 0, 0])


def load_csv(path, domain, T: float) -> CollocationBatch:
    interior, boundary, normals, initial = [], [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["kind"] == "interior":
                interior.append([float(row["x"]), float(row["y"]),
                                 float(row["t"])])
            elif row["kind"] == "boundary":
                boundary.append([float(row["x"]), float(row["y"]),
                                 float(row["t"])])
                normals.append([float(row["nx"]), float(row["ny"])])
            elif row["kind"] == "initial":
                initial.append([float(row["x"]), float(row["y"])])
            else:
                raise ValueError(f"unknown point kind {row['kind']!r}")
    x0, x1, y0, y1 = domain
    area = (x1 - x0) * (y1 - y0)
    perim = 2.0 * ((x1 - x0) + (y1 - y0))
    interior = np.asarray(interior).reshape(-1, 3)
    boundary = np.asarray(boundary).reshape(-1, 3)
    initial = np.asarray(initial).reshape(-1, 2)
    return CollocationBatch(
        interior=interior, boundary=boundary,
        normals=np.asarray(normals).reshape(-1, 2), initial=initial,
        w_interior=area * T / max(len(interior), 1),
        w_boundary=perim * T / max(len(boundary), 1),
        w_initial=area / max(len(initial), 1),
        domain=tuple(domain), T=T)
