"""Empirical studies: loss-vs-error correlation and data-perturbation stability."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from ..loss import LossWeights, ProblemData, loss_eval
from ..network import NetworkParams, forward_values, load_checkpoint
from ..physics import PhysicsParams
from ..sampling import CollocationBatch
from .hodge import decomposition_report, sample_grid_field
from .norms import error_norms, l4l2_distance


@dataclass
class LossErrorRow:
    label: str
    loss: float
    err_u: float
    err_B: float
    irrotational_fraction: float | None = None


@dataclass
class LossErrorStudy:
    rows: list
    spearman_u: float
    spearman_B: float

    def monotone(self, threshold: float = 0.8) -> bool:
        return self.spearman_u >= threshold and self.spearman_B >= threshold


def _as_params(model) -> NetworkParams:
    if isinstance(model, NetworkParams):
        return model
    params, _ = load_checkpoint(model)
    return params


def _model_u_field(params: NetworkParams):
    def u(x, y, t):
        vals = forward_values(params, x, y, t)
        return vals[:, 0], vals[:, 1]
    return u


def loss_error_study(models, reference, phys: PhysicsParams,
                     batch: CollocationBatch, weights: LossWeights,
                     data: ProblemData, resolution: int = 48,
                     time_slices: int = 17,
                     irrotational: bool = False,
                     hodge_resolution: int = 64) -> LossErrorStudy:
    """Loss (on one fixed batch) against field errors across snapshots.

    ``models`` may mix checkpoint paths and in-memory parameter sets.
    When ``irrotational`` is set, each row also records the gradient-part
    norm fraction of the model's velocity field at t = T/2 (small boundary
    and divergence penalties should drive it down).
    """
    rows = []
    for model in models:
        params = _as_params(model)
        bd = loss_eval(params, phys, batch, weights, data)
        rep = error_norms(params, reference, phys,
                          resolution=resolution, time_slices=time_slices)
        frac = None
        if irrotational:
            grid = sample_grid_field(_model_u_field(params), hodge_resolution,
                                     t=0.5 * phys.T, domain=phys.domain)
            frac = decomposition_report(grid)["frac_w2"]
        rows.append(LossErrorRow(label=str(model), loss=bd.total,
                                 err_u=rep.rel_sup_u, err_B=rep.rel_sup_B,
                                 irrotational_fraction=frac))
    losses = [r.loss for r in rows]
    su = float(spearmanr(losses, [r.err_u for r in rows]).statistic)
    sB = float(spearmanr(losses, [r.err_B for r in rows]).statistic)
    return LossErrorStudy(rows=rows, spearman_u=su, spearman_B=sB)


@dataclass
class StabilityRow:
    delta: float
    data_diff: float       # size of the data perturbation in its natural norm
    dist_u: float          # L^4-in-time L^2 distance to the unperturbed model
    dist_B: float

    @property
    def model_diff(self) -> float:
        return self.dist_u + self.dist_B


@dataclass
class StabilityStudy:
    perturb: str
    rows: list = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        diffs = [r.model_diff for r in sorted(self.rows, key=lambda r: r.delta)]
        return all(b >= a for a, b in zip(diffs, diffs[1:]))


def _scaled_data(base: ProblemData, perturb: str, delta: float) -> ProblemData:
    s = 1.0 + delta

    def scale2(fn):
        def wrapped(*args):
            a, b = fn(*args)
            return s * a, s * b
        return wrapped

    if perturb == "f":
        return ProblemData(forcing=scale2(base.forcing), u0=base.u0,
                           B0=base.B0, source=base.source)
    if perturb == "u0":
        return ProblemData(forcing=base.forcing, u0=scale2(base.u0),
                           B0=base.B0, source=base.source)
    if perturb == "B0":
        return ProblemData(forcing=base.forcing, u0=base.u0,
                           B0=scale2(base.B0), source=base.source)
    raise ValueError(f"unknown perturbation target {perturb!r}")


def _data_norm(base: ProblemData, perturb: str, phys: PhysicsParams,
               resolution: int = 48, time_slices: int = 17) -> float:
    """L^2 size of the perturbed datum at delta = 1 (forcing over space-time,
    initial data over space)."""
    x0, x1, y0, y1 = phys.domain
    xs = x0 + (x1 - x0) * (np.arange(resolution) + 0.5) / resolution
    ys = y0 + (y1 - y0) * (np.arange(resolution) + 0.5) / resolution
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    cell = (x1 - x0) * (y1 - y0) / resolution**2
    if perturb == "f":
        ts = phys.T * (np.arange(time_slices) + 0.5) / time_slices
        total = 0.0
        for t in ts:
            fx, fy = base.forcing(X.ravel(), Y.ravel(),
                                  np.full(X.size, float(t)))
            total += (phys.T / time_slices) * cell * float(
                np.sum(np.square(fx) + np.square(fy)))
        return float(np.sqrt(total))
    fn = base.u0 if perturb == "u0" else base.B0
    gx, gy = fn(X.ravel(), Y.ravel())
    return float(np.sqrt(cell * np.sum(np.square(gx) + np.square(gy))))


def stability_study(base_config, deltas, perturb: str = "f",
                    resolution: int = 48, time_slices: int = 17,
                    out_dir=None) -> StabilityStudy:
    """Train paired models with perturbed data and measure how far they drift.

    All runs share the network seed and the per-step batch seeds, so the
    only difference between them is the data perturbation.  The distance is
    the L^4-in-time L^2-in-space norm of the velocity difference plus that
    of the magnetic-field difference, between each perturbed model and the
    unperturbed one.
    """
    from ..training import problem_data_for, train

    phys = base_config.physics()
    base_data = problem_data_for(base_config)
    unit = _data_norm(base_data, perturb, phys, resolution, time_slices)

    baseline = train(copy.deepcopy(base_config),
                     out_dir=None if out_dir is None else f"{out_dir}/delta0",
                     data=base_data).final_params

    study = StabilityStudy(perturb=perturb)
    for delta in deltas:
        run_out = None if out_dir is None else f"{out_dir}/delta{delta}"
        model = train(copy.deepcopy(base_config), out_dir=run_out,
                      data=_scaled_data(base_data, perturb, delta)
                      ).final_params
        du, dB = l4l2_distance(model, baseline, phys,
                               resolution=resolution, time_slices=time_slices)
        study.rows.append(StabilityRow(delta=float(delta),
                                       data_diff=float(delta) * unit,
                                       dist_u=du, dist_B=dB))
    return study


def dump_stability_csv(path, study: StabilityStudy) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta", "data_diff", "dist_u", "dist_B",
                         "model_diff"])
        for r in sorted(study.rows, key=lambda r: r.delta):
            writer.writerow([repr(r.delta), repr(r.data_diff),
                             repr(r.dist_u), repr(r.dist_B),
                             repr(r.model_diff)])
