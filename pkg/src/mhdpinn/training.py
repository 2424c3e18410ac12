"""Optimizers, training loop, checkpointing and metric logging."""
from __future__ import annotations

import base64
import copy
import csv
import time
from dataclasses import dataclass, field, fields as dc_fields, asdict
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .loss import (COMPONENT_NAMES, LossBreakdown, LossWeights,
                   NonFiniteLossError, ProblemData, loss_eval, loss_grad)
from .network import NetworkParams, init_params, load_checkpoint, save_checkpoint
from .physics import PhysicsParams
from .sampling import CollocationBatch, sample_batch


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n: int, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(np.zeros(n), np.zeros(n), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, theta: np.ndarray,
              grad: np.ndarray) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected adaptive-moment update; returns new (state, theta)."""
    if theta.shape != grad.shape or state.m.shape != theta.shape:
        raise ValueError("parameter/gradient/accumulator shapes disagree")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient passed to adam_step")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    theta = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.lr, state.beta1, state.beta2,
                          state.eps)
    return new_state, theta


def lbfgs_minimize(fun_grad, x0: np.ndarray, maxiter: int = 100,
                   gtol: float = 1e-12) -> np.ndarray:
    """L-BFGS with a monotone acceptance rule.

    ``fun_grad(x) -> (f, g)``.  If the line search fails or the result is
    not an improvement, the input point is returned unchanged.
    """
    f0, _ = fun_grad(x0)
    res = minimize(fun_grad, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "gtol": gtol, "ftol": 0.0})
    if not np.isfinite(res.fun) or res.fun > f0:
        import warnings
        warnings.warn("L-BFGS made no progress; returning input parameters")
        return x0.copy()
    return res.x


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    # physics
    nu: float = 1.0
    mu: float = 1.0
    S: float = 1.0
    T: float = 1.0
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    # network
    layer_sizes: tuple = (3, 32, 32, 5)
    activation: str = "tanh"
    split: bool = False
    net_seed: int = 0
    # loss weights a1..a9
    loss_weights: tuple = (1, 1, 1, 1, 1, 1, 1, 1, 0)
    # sampling
    m: int = 1024
    n: int = 128
    k: int = 128
    strategy: str = "uniform"
    sample_seed: int = 0
    resample: bool = True
    # optimizer
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 1e3
    iters: int = 1000
    lbfgs_iters: int = 0
    # logging
    checkpoint_every: int = 0      # 0: only final/best
    eval_every: int = 100
    deterministic: bool = True
    log_errors: bool = False
    error_resolution: int = 48
    error_time_slices: int = 17
    # problem data
    problem: str = "mms"
    forcing_scale: float = 1.0
    # compute precision of the network forward/backward pass; parameters,
    # optimizer state and checkpoints stay float64 either way
    dtype: str = "float64"

    def physics(self) -> PhysicsParams:
        return PhysicsParams(self.nu, self.mu, self.S, self.T,
                             tuple(self.domain))

    def weights(self) -> LossWeights:
        return LossWeights(*self.loss_weights)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("domain", "layer_sizes", "loss_weights"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dc_fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("domain", "layer_sizes", "loss_weights"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def step_seed(base_seed: int, step: int) -> int:
    """Per-step sampler seed; makes fresh-batch runs resumable."""
    return int(np.random.SeedSequence((base_seed, step)).generate_state(1)[0])


def problem_data_for(config: RunConfig) -> ProblemData:
    if config.problem == "mms":
        from .verification.mms import mms_default
        return mms_default(config.physics()).problem_data(
            forcing_scale=config.forcing_scale)
    if config.problem == "zero":
        zero2 = lambda *args: (np.zeros_like(args[0]), np.zeros_like(args[0]))
        return ProblemData(forcing=zero2, u0=zero2, B0=zero2)
    raise ValueError(f"unknown problem {config.problem!r}")


METRIC_COLUMNS = ["step", "wall_time_s", *COMPONENT_NAMES, "total",
                  "grad_norm", "clipped", "err_u", "err_B"]


@dataclass
class TrainResult:
    params: NetworkParams          # best-loss parameters
    final_params: NetworkParams
    best_loss: float
    metrics: list
    checkpoints: list = field(default_factory=list)


def _encode_vec(x: np.ndarray) -> str:
    return base64.b64encode(x.astype("<f8").tobytes()).decode("ascii")


def _decode_vec(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f8").astype(float)


def _opt_extra(state: AdamState, step: int) -> dict:
    return {"step": step, "adam": {"m": _encode_vec(state.m),
                                   "v": _encode_vec(state.v),
                                   "step": state.step}}


def load_resume(path) -> tuple[NetworkParams, AdamState | None, int]:
    """Load a checkpoint written by train(): params, opt state, step."""
    params, extra = load_checkpoint(path)
    if "adam" not in extra:
        return params, None, int(extra.get("step", 0))
    a = extra["adam"]
    state = AdamState(_decode_vec(a["m"]), _decode_vec(a["v"]),
                      int(a["step"]))
    return params, state, int(extra["step"])


def _batch_for(config: RunConfig, step: int) -> CollocationBatch:
    seed = (step_seed(config.sample_seed, step) if config.resample
            else config.sample_seed)
    return sample_batch(config.domain, config.T, config.m, config.n,
                        config.k, seed=seed, strategy=config.strategy)


def train(config: RunConfig, out_dir=None, start_params=None,
          start_state=None, start_step: int = 0,
          data: ProblemData | None = None) -> TrainResult:
    """Run the minimization loop; returns the best-loss parameters.

    Emits ``metrics.csv`` and checkpoint files into ``out_dir`` when given.
    On a non-finite loss the last good parameters are checkpointed and the
    error is re-raised.  ``data`` overrides the problem data resolved from
    the config, which keeps everything else (seeds, batches, network
    initialization) identical across perturbed runs.
    """
    phys = config.physics()
    w = config.weights()
    if data is None:
        data = problem_data_for(config)
    if np.dtype(config.dtype) not in (np.float32, np.float64):
        raise ValueError(f"unsupported compute dtype {config.dtype!r}")
    params = start_params if start_params is not None else init_params(
        config.layer_sizes, config.activation, config.net_seed, config.split)
    if params.dtype != np.dtype(config.dtype):
        params = params.astype(config.dtype)
    theta = params.flatten()
    state = start_state if start_state is not None else AdamState.fresh(
        theta.size, config.lr, config.beta1, config.beta2, config.eps)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    metrics: list[dict] = []
    checkpoints: list[Path] = []
    best_loss, best_params = np.inf, copy.deepcopy(params)
    t_start = time.perf_counter()

    reference = None
    if config.log_errors:
        from .verification.mms import mms_default
        from .verification.norms import error_norms
        reference = mms_default(phys)

    def record(step: int, bd: LossBreakdown, grad_norm: float, clipped: int):
        nonlocal best_loss, best_params
        row = {"step": step,
               "wall_time_s": 0.0 if config.deterministic
               else time.perf_counter() - t_start}
        for name, val in zip(COMPONENT_NAMES, bd.components()):
            row[name] = val
        row["total"] = bd.total
        row["grad_norm"] = grad_norm
        row["clipped"] = clipped
        if reference is not None:
            from .verification.norms import error_norms
            rep = error_norms(params, reference, phys,
                              resolution=config.error_resolution,
                              time_slices=config.error_time_slices)
            row["err_u"], row["err_B"] = rep.rel_sup_u, rep.rel_sup_B
        else:
            row["err_u"] = row["err_B"] = ""
        metrics.append(row)
        if bd.total < best_loss:
            best_loss = bd.total
            best_params = copy.deepcopy(params)

    def checkpoint(step: int, tag: str | None = None):
        if out is None:
            return
        name = tag or f"ckpt_{step:06d}.json"
        path = out / name
        save_checkpoint(params, path, extra=_opt_extra(state, step))
        checkpoints.append(path)

    theta_prev = theta.copy()
    try:
        for step in range(start_step, config.iters):
            batch = _batch_for(config, step)
            bd, g = loss_grad(params, phys, batch, w, data)
            gnorm = float(np.linalg.norm(g))
            clipped = 0
            if config.grad_clip > 0 and gnorm > config.grad_clip:
                g = g * (config.grad_clip / gnorm)
                clipped = 1
            if step % max(config.eval_every, 1) == 0:
                record(step, bd, gnorm, clipped)
            if config.checkpoint_every and step % config.checkpoint_every == 0:
                checkpoint(step)
            theta_prev = theta
            state, theta = adam_step(state, theta, g)
            params.set_flat(theta)
    except NonFiniteLossError:
        params.set_flat(theta_prev)   # last parameters with a finite loss
        checkpoint(step, tag="ckpt_lastgood.json")
        raise

    # final evaluation row on a fresh batch
    batch = _batch_for(config, config.iters)
    bd = loss_eval(params, phys, batch, w, data)
    record(config.iters, bd, float("nan"), 0)
    checkpoint(config.iters)

    if config.lbfgs_iters > 0:
        frozen = _batch_for(config, config.iters)
        params = lbfgs_refine(params, phys, frozen, w, data,
                              maxiter=config.lbfgs_iters)
        bd = loss_eval(params, phys, frozen, w, data)
        record(config.iters, bd, float("nan"), 0)
        theta = params.flatten()
        checkpoint(config.iters, tag="ckpt_refined.json")

    if out is not None:
        write_metrics_csv(out / "metrics.csv", metrics)
    return TrainResult(params=best_params, final_params=params,
                       best_loss=best_loss, metrics=metrics,
                       checkpoints=checkpoints)


def lbfgs_refine(params: NetworkParams, phys: PhysicsParams,
                 batch: CollocationBatch, w: LossWeights, data: ProblemData,
                 maxiter: int = 100) -> NetworkParams:
    """Second-phase refinement on a frozen batch; never worsens the loss."""
    work = copy.deepcopy(params)

    def fun_grad(theta):
        work.set_flat(theta)
        bd, g = loss_grad(work, phys, batch, w, data)
        return bd.total, g

    x = lbfgs_minimize(fun_grad, params.flatten(), maxiter=maxiter)
    out = copy.deepcopy(params)
    out.set_flat(x)
    return out


def write_metrics_csv(path, metrics: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(METRIC_COLUMNS)
        for row in metrics:
            wr.writerow([row["step"]] +
                        [repr(row[c]) if isinstance(row[c], float) else row[c]
                         for c in METRIC_COLUMNS[1:]])
