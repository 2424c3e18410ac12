"""MLP ansatz mapping (x, y, t) to (u, B, p), evaluated in jet arithmetic.

The default is one shared trunk with 5 outputs (u_x, u_y, B_x, B_y, p);
``split=True`` instead builds three heads with the same hidden sizes, one
for u, one for B and one for p, and concatenates their outputs.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tape as tp
from .jets import DERIV_TABLES, Jet2, N_SLOTS

CHECKPOINT_FORMAT = "mhdpinn-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class FieldSample:
    """The five field jets at one batch of space-time points.

    ``ux .. p`` are jet-like objects (:class:`Jet2` or taped views); the
    forcing and the optional magnetic source are plain arrays and are zero
    unless a problem attaches them.
    """

    ux: object
    uy: object
    Bx: object
    By: object
    p: object
    fx: np.ndarray | float = 0.0
    fy: np.ndarray | float = 0.0
    sBx: np.ndarray | float = 0.0
    sBy: np.ndarray | float = 0.0


@dataclass
class LayerStack:
    sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class NetworkParams:
    """Weights/biases of the ansatz plus its architecture description."""

    layer_sizes: list[int]
    activation: str = "tanh"
    split: bool = False
    stacks: list[LayerStack] = field(default_factory=list)

    def n_params(self) -> int:
        return sum(W.size + b.size
                   for s in self.stacks for W, b in zip(s.weights, s.biases))

    @property
    def dtype(self) -> np.dtype:
        return self.stacks[0].weights[0].dtype

    def astype(self, dtype) -> "NetworkParams":
        """Copy of the parameters with all arrays in the given float dtype."""
        dtype = np.dtype(dtype)
        if dtype not in (np.float32, np.float64):
            raise ValueError(f"unsupported parameter dtype {dtype}")
        stacks = [LayerStack(list(s.sizes),
                             [W.astype(dtype) for W in s.weights],
                             [b.astype(dtype) for b in s.biases])
                  for s in self.stacks]
        return NetworkParams(list(self.layer_sizes), self.activation,
                             self.split, stacks)

    def flatten(self) -> np.ndarray:
        parts = []
        for s in self.stacks:
            for W, b in zip(s.weights, s.biases):
                parts.append(W.ravel())
                parts.append(b.ravel())
        return np.concatenate(parts).astype(float, copy=False)

    def set_flat(self, theta: np.ndarray) -> None:
        if theta.size != self.n_params():
            raise ValueError(
                f"flat vector has {theta.size} entries, "
                f"network expects {self.n_params()}")
        dtype = self.dtype
        off = 0
        for s in self.stacks:
            for i, (W, b) in enumerate(zip(s.weights, s.biases)):
                s.weights[i] = theta[off:off + W.size].reshape(
                    W.shape).astype(dtype)
                off += W.size
                s.biases[i] = theta[off:off + b.size].astype(dtype)
                off += b.size


def _stack_sizes(layer_sizes: list[int], split: bool) -> list[list[int]]:
    hidden = layer_sizes[1:-1]
    if not split:
        return [layer_sizes]
    return [[3, *hidden, 2], [3, *hidden, 2], [3, *hidden, 1]]


def init_params(layer_sizes, activation: str = "tanh", seed: int = 0,
                split: bool = False, dtype="float64") -> NetworkParams:
    """Scaled-uniform init: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0.

    ``dtype`` selects the compute precision; the draw itself always happens
    in float64 so float32 parameters are the rounded float64 ones.
    """
    layer_sizes = [int(n) for n in layer_sizes]
    if len(layer_sizes) < 2 or any(n < 1 for n in layer_sizes):
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    if layer_sizes[0] != 3 or layer_sizes[-1] != 5:
        raise ValueError(
            f"network must map 3 inputs to 5 outputs, got {layer_sizes}")
    if activation not in DERIV_TABLES:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    stacks = []
    for sizes in _stack_sizes(layer_sizes, split):
        Ws, bs = [], []
        for lin, lout in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(lin)
            Ws.append(rng.uniform(-bound, bound, size=(lout, lin)))
            bs.append(np.zeros(lout))
        stacks.append(LayerStack(sizes, Ws, bs))
    params = NetworkParams(layer_sizes, activation, split, stacks)
    if np.dtype(dtype) != np.float64:
        params = params.astype(dtype)
    return params


# ---------------------------------------------------------------------------
# forward passes (shared slot math for the jet paths)

def _seed_stack(x, y, t, dtype=np.float64, n_slots: int = N_SLOTS) -> np.ndarray:
    """Input jets as a stacked array.

    ``n_slots`` is 7 for full second-order jets or 3 for value plus first
    spatial derivatives only (enough for boundary and initial terms, and
    cheaper to push through the network).
    """
    if n_slots not in (3, N_SLOTS):
        raise ValueError(f"unsupported jet slot count {n_slots}")
    x, y, t = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (x, y, t))
    m = np.broadcast_shapes(x.shape, y.shape, t.shape)[0]
    X = np.zeros((n_slots, m, 3), dtype=dtype)
    X[0, :, 0], X[0, :, 1], X[0, :, 2] = x, y, t
    X[1, :, 0] = 1.0
    X[2, :, 1] = 1.0
    if n_slots == N_SLOTS:
        X[3, :, 2] = 1.0
    return X


def _affine_slots(H: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    s, m, lin = H.shape
    out = (H.reshape(s * m, lin) @ W.T).reshape(s, m, W.shape[0])
    out[0] += b
    return out


def _act_slots(H: np.ndarray, activation: str) -> np.ndarray:
    v, f1, f2 = DERIV_TABLES[activation](H[0])
    out = np.empty_like(H)
    out[0] = v
    if H.shape[0] == N_SLOTS:
        out[1:4] = f1 * H[1:4]
        out[4] = f2 * H[1] * H[1] + f1 * H[4]
        out[5] = f2 * H[1] * H[2] + f1 * H[5]
        out[6] = f2 * H[2] * H[2] + f1 * H[6]
    else:
        out[1:] = f1 * H[1:]
    return out


def _forward_stacked(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    outs = []
    for stack in params.stacks:
        H = X
        last = len(stack.weights) - 1
        for i, (W, b) in enumerate(zip(stack.weights, stack.biases)):
            H = _affine_slots(H, W, b)
            if i < last:
                H = _act_slots(H, params.activation)
        outs.append(H)
    return outs[0] if len(outs) == 1 else np.concatenate(outs, axis=-1)


def forward_jet(params: NetworkParams, x, y, t,
                n_slots: int = N_SLOTS) -> FieldSample:
    """Evaluate the network with full second-order jets at (x, y, t).

    With ``n_slots=3`` only the value and the first spatial derivatives are
    propagated; the remaining jet slots of the result are zero and must not
    be consumed.
    """
    Y = _forward_stacked(params, _seed_stack(x, y, t, params.dtype, n_slots))
    jets = [Jet2(*(Y[s, :, i] for s in range(n_slots))) for i in range(5)]
    return FieldSample(*jets)


def _region_slices(coords_list):
    """Concatenate per-region coordinates; returns merged arrays + slices."""
    xs, ys, ts, slices = [], [], [], []
    lo = 0
    for x, y, t in coords_list:
        x, y, t = np.broadcast_arrays(*(np.atleast_1d(np.asarray(a, float))
                                        for a in (x, y, t)))
        xs.append(x)
        ys.append(y)
        ts.append(t)
        slices.append(slice(lo, lo + x.size))
        lo += x.size
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ts), slices


def _slot_groups(coords_list, slots_list):
    """Group region indices by requested jet slot count."""
    if slots_list is None:
        slots_list = [N_SLOTS] * len(coords_list)
    groups = []
    for n_slots in sorted(set(slots_list), reverse=True):
        groups.append((n_slots,
                       [i for i, s in enumerate(slots_list) if s == n_slots]))
    return groups


def forward_jet_regions(params: NetworkParams, coords_list,
                        slots_list=None) -> list[FieldSample]:
    """Jet forward passes over several point sets, split back per set.

    Point sets requesting the same slot count share one forward pass;
    ``slots_list`` (entries 3 or 7, default all 7) says how many jet slots
    each set needs.
    """
    out = [None] * len(coords_list)
    for n_slots, idx in _slot_groups(coords_list, slots_list):
        x, y, t, slices = _region_slices([coords_list[i] for i in idx])
        merged = forward_jet(params, x, y, t, n_slots)
        jets = (merged.ux, merged.uy, merged.Bx, merged.By, merged.p)
        for i, sl in zip(idx, slices):
            out[i] = FieldSample(*(j.restrict(sl) for j in jets))
    return out


def forward_values(params: NetworkParams, x, y, t) -> np.ndarray:
    """Plain forward pass; returns an array of shape (batch, 5)."""
    x, y, t = (np.atleast_1d(np.asarray(a, dtype=params.dtype))
               for a in (x, y, t))
    X = np.stack(np.broadcast_arrays(x, y, t), axis=-1)
    outs = []
    for stack in params.stacks:
        H = X
        last = len(stack.weights) - 1
        for i, (W, b) in enumerate(zip(stack.weights, stack.biases)):
            H = H @ W.T + b
            if i < last:
                H = DERIV_TABLES[params.activation](H)[0]
        outs.append(H)
    return outs[0] if len(outs) == 1 else np.concatenate(outs, axis=-1)


def make_param_nodes(tape: tp.Tape, params: NetworkParams) -> list[tp.ParamNode]:
    """Register all parameter arrays on a tape, in flatten() order."""
    nodes = []
    for s in params.stacks:
        for W, b in zip(s.weights, s.biases):
            nodes.append(tape.param(W))
            nodes.append(tape.param(b))
    return nodes


def _taped_output(tape: tp.Tape, params: NetworkParams,
                  param_nodes: list[tp.ParamNode], x, y, t,
                  n_slots: int = N_SLOTS) -> tp.JetNode:
    X = tape.jet_input(_seed_stack(x, y, t, params.dtype, n_slots))
    outs = []
    node_iter = iter(param_nodes)
    for stack in params.stacks:
        H = X
        last = len(stack.weights) - 1
        for i in range(len(stack.weights)):
            H = tp.affine(H, next(node_iter), next(node_iter))
            if i < last:
                H = tp.activation(H, params.activation)
        outs.append(H)
    return outs[0] if len(outs) == 1 else tp.jet_concat(outs)


def forward_taped(tape: tp.Tape, params: NetworkParams,
                  param_nodes: list[tp.ParamNode], x, y, t) -> FieldSample:
    """Jet forward pass recorded on a tape; fields are lazy slot views."""
    Y = _taped_output(tape, params, param_nodes, x, y, t)
    return FieldSample(*(tp.JetView(Y, i) for i in range(5)))


def forward_taped_regions(tape: tp.Tape, params: NetworkParams,
                          param_nodes: list[tp.ParamNode], coords_list,
                          slots_list=None) -> list[FieldSample]:
    """Taped forward passes over several point sets, split back per set.

    Same grouping as :func:`forward_jet_regions`; all groups record onto
    the one tape, so parameter gradients accumulate across them.
    """
    out = [None] * len(coords_list)
    for n_slots, idx in _slot_groups(coords_list, slots_list):
        x, y, t, slices = _region_slices([coords_list[i] for i in idx])
        Y = _taped_output(tape, params, param_nodes, x, y, t, n_slots)
        for i, sl in zip(idx, slices):
            out[i] = FieldSample(*(tp.JetView(Y, i2, sl) for i2 in range(5)))
    return out


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(params: NetworkParams, path, extra: dict | None = None):
    """Single JSON document; parameters as little-endian float64, base64."""
    flat = params.flatten().astype("<f8")
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_sizes": params.layer_sizes,
        "activation": params.activation,
        "split": params.split,
        "params": base64.b64encode(flat.tobytes()).decode("ascii"),
    }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[NetworkParams, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version "
                         f"{doc.get('version')}")
    params = init_params(doc["layer_sizes"], doc["activation"],
                         split=doc["split"])
    flat = np.frombuffer(base64.b64decode(doc["params"]), dtype="<f8")
    params.set_flat(flat.astype(float))
    return params, doc.get("extra", {})
