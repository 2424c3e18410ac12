"""Reverse-mode tape over batched jet payloads.

The forward pass of the network is recorded as a sequence of operations on
stacked jet arrays of shape ``(slots, batch, width)`` with 7 slots (order as
in :mod:`mhdpinn.jets`) or, for point sets that only need values and first
spatial derivatives, 3 slots.  Scalar quantities derived from jet slots (residuals,
penalty terms) live on the same tape as plain value nodes.  One reverse
sweep then yields exact parameter gradients of any recorded scalar,
including scalars that contain second input derivatives.

Every vjp returns a freshly allocated array so adjoint accumulation can
mutate in place.  A tape is single-writer; replaying the same inputs gives
bit-identical outputs.
"""
from __future__ import annotations

import numpy as np

from .jets import DERIV_TABLES, N_SLOTS


class Node:
    __slots__ = ("payload", "parents", "vjps", "accs", "idx", "tape")

    def __init__(self, tape: "Tape", payload, parents=(), vjps=(), accs=None):
        self.tape = tape
        self.payload = payload
        self.parents = parents
        self.vjps = vjps
        # optional in-place accumulators (parallel to vjps): acc(g, buf)
        # adds the contribution directly into the parent's adjoint buffer
        self.accs = accs
        tape._append(self)


class ParamNode(Node):
    """Leaf node holding one parameter array (a weight matrix or bias)."""


class JetNode(Node):
    """Node whose payload stacks the 7 jet slots along axis 0."""


class ValueNode(Node):
    """Plain (batched) scalar node; supports arithmetic with nodes/consts."""

    __array_ufunc__ = None  # force `ndarray op node` through reflected ops

    def __add__(self, other):
        if isinstance(other, ValueNode):
            return ValueNode(self.tape, self.payload + other.payload,
                             (self, other),
                             (lambda g: g.copy(), lambda g: g.copy()))
        return ValueNode(self.tape, self.payload + other, (self,),
                         (lambda g: g.copy(),))

    __radd__ = __add__

    def __neg__(self):
        return ValueNode(self.tape, -self.payload, (self,), (lambda g: -g,))

    def __sub__(self, other):
        if isinstance(other, ValueNode):
            return ValueNode(self.tape, self.payload - other.payload,
                             (self, other),
                             (lambda g: g.copy(), lambda g: -g))
        return ValueNode(self.tape, self.payload - other, (self,),
                         (lambda g: g.copy(),))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, ValueNode):
            a, b = self.payload, other.payload
            return ValueNode(self.tape, a * b, (self, other),
                             (lambda g: g * b, lambda g: g * a))
        return ValueNode(self.tape, self.payload * other, (self,),
                         (lambda g: g * other,))

    __rmul__ = __mul__

    def square(self):
        a = self.payload
        return ValueNode(self.tape, a * a, (self,), (lambda g: 2.0 * g * a,))

    def sum(self):
        shape = np.shape(self.payload)
        return ValueNode(self.tape, np.asarray(np.sum(self.payload)), (self,),
                         (lambda g: np.full(shape, float(g)),))


class _ArrayPool:
    """Free list of large scratch arrays, keyed by shape and dtype.

    Re-touching freshly mapped pages is expensive on some hosts, so the
    big jet payload buffers are recycled between tapes instead of being
    returned to the allocator.
    """

    MAX_PER_KEY = 32

    def __init__(self):
        self._free: dict = {}

    def take(self, shape, dtype) -> np.ndarray:
        lst = self._free.get((shape, np.dtype(dtype)))
        if lst:
            return lst.pop()
        return np.empty(shape, dtype)

    def give(self, arr: np.ndarray) -> None:
        lst = self._free.setdefault((arr.shape, arr.dtype), [])
        if len(lst) < self.MAX_PER_KEY:
            lst.append(arr)


_POOL = _ArrayPool()


class Tape:
    def __init__(self):
        self._nodes: list[Node] = []
        self._owned: list[np.ndarray] = []

    def _append(self, node: Node):
        node.idx = len(self._nodes)
        self._nodes.append(node)

    def __len__(self):
        return len(self._nodes)

    def alloc(self, shape, dtype) -> np.ndarray:
        """Uninitialized scratch array, recycled when the tape is released."""
        a = _POOL.take(tuple(shape), dtype)
        self._owned.append(a)
        return a

    def zeros_like(self, ref: np.ndarray) -> np.ndarray:
        a = self.alloc(ref.shape, ref.dtype)
        a.fill(0.0)
        return a

    def release(self) -> None:
        """Return scratch buffers to the pool; the tape must not be used
        afterwards (node payloads may alias recycled memory)."""
        self._nodes.clear()
        for a in self._owned:
            _POOL.give(a)
        self._owned.clear()

    def param(self, array: np.ndarray) -> ParamNode:
        a = np.asarray(array)
        if a.dtype not in (np.float32, np.float64):
            a = a.astype(float)
        return ParamNode(self, a)

    def jet_input(self, stacked: np.ndarray) -> JetNode:
        stacked = np.asarray(stacked)
        if stacked.dtype not in (np.float32, np.float64):
            stacked = stacked.astype(float)
        if stacked.shape[0] not in (3, N_SLOTS):
            raise ValueError("jet payload must stack 3 or 7 slots on axis 0")
        return JetNode(self, stacked)

    def backward(self, root: Node) -> list:
        """One reverse sweep from ``root``; returns adjoints indexed by node."""
        adj: list = [None] * len(self._nodes)
        adj[root.idx] = np.ones_like(root.payload, dtype=float)
        for i in range(root.idx, -1, -1):
            g = adj[i]
            if g is None:
                continue
            node = self._nodes[i]
            for j, (parent, vjp) in enumerate(zip(node.parents, node.vjps)):
                acc = node.accs[j] if node.accs is not None else None
                if acc is not None:
                    if adj[parent.idx] is None:
                        adj[parent.idx] = self.zeros_like(parent.payload)
                    acc(g, adj[parent.idx])
                elif adj[parent.idx] is None:
                    adj[parent.idx] = vjp(g)
                else:
                    adj[parent.idx] += vjp(g)
        return adj

    def gradient(self, root: Node, params: list[ParamNode]) -> np.ndarray:
        """Flat d(root)/d(params) in float64; unused parameters get 0."""
        adj = self.backward(root)
        parts = []
        for p in params:
            g = adj[p.idx]
            parts.append(np.zeros(p.payload.size) if g is None else g.ravel())
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts).astype(float, copy=False)


def affine(x: JetNode, W: ParamNode, b: ParamNode) -> JetNode:
    """Per-slot linear map; the bias enters the value slot only."""
    xp, Wp, bp = x.payload, W.payload, b.payload
    s, m, lin = xp.shape
    lout = Wp.shape[0]
    out = x.tape.alloc((s, m, lout), np.result_type(xp, Wp))
    np.matmul(xp.reshape(s * m, lin), Wp.T, out=out.reshape(s * m, lout))
    out[0] += bp

    def vjp_x(g):
        dx = x.tape.alloc((s, m, lin), np.result_type(g, Wp))
        np.matmul(g.reshape(s * m, lout), Wp, out=dx.reshape(s * m, lin))
        return dx

    def vjp_W(g):
        return g.reshape(s * m, lout).T @ xp.reshape(s * m, lin)

    def vjp_b(g):
        return g[0].sum(axis=0)

    return JetNode(x.tape, out, (x, W, b), (vjp_x, vjp_W, vjp_b))


def _activation_first_order(x: JetNode, table) -> JetNode:
    """Activation for jets that carry only the value and first derivatives."""
    tape = x.tape
    xp = x.payload
    mw = xp[0].shape
    if table is DERIV_TABLES["tanh"]:
        bufs = [tape.alloc(mw, xp.dtype) for _ in range(3)]
        v, f1, f2 = table(xp[0], order=2, out=bufs)
    else:
        v, f1, f2 = table(xp[0], order=2)
    out = tape.alloc(xp.shape, xp.dtype)
    out[0] = v
    np.multiply(xp[1:], f1, out=out[1:])

    def vjp(g):
        # d(out)/d(xp[0]) picks up f'' through every first-order slot.
        dx = tape.alloc(xp.shape, xp.dtype)
        t = tape.alloc(mw, xp.dtype)
        np.einsum("imw,imw->mw", g[1:], xp[1:], out=t)
        t *= f2
        np.multiply(g[0], f1, out=dx[0])
        dx[0] += t
        np.multiply(g[1:], f1, out=dx[1:])
        return dx

    return JetNode(x.tape, out, (x,), (vjp,))


def activation(x: JetNode, name: str) -> JetNode:
    """Elementwise twice-differentiable activation, propagated through jets."""
    table = DERIV_TABLES[name]
    tape = x.tape
    xp = x.payload
    mw = xp[0].shape
    if xp.shape[0] != 7:
        return _activation_first_order(x, table)
    if name == "tanh":
        bufs = [tape.alloc(mw, xp.dtype) for _ in range(4)]
        v, f1, f2, f3 = table(xp[0], order=3, out=bufs)
    else:
        v, f1, f2, f3 = table(xp[0], order=3)
    out = tape.alloc(xp.shape, xp.dtype)
    out[0] = v
    np.multiply(xp[1:4], f1, out=out[1:4])
    tmp = tape.alloc(mw, xp.dtype)
    for (a, b), k in (((1, 1), 4), ((1, 2), 5), ((2, 2), 6)):
        np.multiply(xp[a], xp[b], out=tmp)    # out[k] = f2 xa xb + f1 xab
        tmp *= f2
        np.multiply(xp[k], f1, out=out[k])
        out[k] += tmp

    def vjp(g):
        # d(out)/d(xp[0]) couples every slot: f' changes with the value.
        # The coefficient of g[i] for i >= 1 is f2 * xp[i]; the coefficients
        # of the second-order slots add the f3 * xa * xb parts.
        dx = tape.alloc(xp.shape, xp.dtype)
        t = tape.alloc(mw, xp.dtype)
        t2 = tape.alloc(mw, xp.dtype)
        np.einsum("imw,imw->mw", g[1:7], xp[1:7], out=t)
        t *= f2
        np.multiply(g[0], f1, out=dx[0])
        dx[0] += t
        np.multiply(g[4], xp[1], out=t)       # f3 (g4 x1^2 + g5 x1x2 + g6 x2^2)
        np.multiply(g[5], xp[2], out=t2)
        t += t2
        t *= xp[1]
        np.multiply(g[6], xp[2], out=t2)
        t2 *= xp[2]
        t += t2
        t *= f3
        dx[0] += t
        np.multiply(g[1:7], f1, out=dx[1:7])
        np.multiply(g[4], xp[1], out=t)       # dx1 += f2 (2 g4 x1 + g5 x2)
        t *= 2.0
        np.multiply(g[5], xp[2], out=t2)
        t += t2
        t *= f2
        dx[1] += t
        np.multiply(g[6], xp[2], out=t)       # dx2 += f2 (g5 x1 + 2 g6 x2)
        t *= 2.0
        np.multiply(g[5], xp[1], out=t2)
        t += t2
        t *= f2
        dx[2] += t
        return dx

    return JetNode(x.tape, out, (x,), (vjp,))


def jet_add(a: JetNode, b: JetNode) -> JetNode:
    return JetNode(a.tape, a.payload + b.payload, (a, b),
                   (lambda g: g.copy(), lambda g: g.copy()))


def jet_scale(a: JetNode, c: float) -> JetNode:
    return JetNode(a.tape, a.payload * c, (a,), (lambda g: g * c,))


def jet_mul(a: JetNode, b: JetNode) -> JetNode:
    """Jet product rule on stacked payloads (shared batch shape)."""
    ap, bp = a.payload, b.payload
    out = np.empty_like(ap)
    out[0] = ap[0] * bp[0]
    out[1:4] = ap[1:4] * bp[0] + ap[0] * bp[1:4]
    out[4] = ap[4] * bp[0] + 2.0 * ap[1] * bp[1] + ap[0] * bp[4]
    out[5] = ap[5] * bp[0] + ap[1] * bp[2] + ap[2] * bp[1] + ap[0] * bp[5]
    out[6] = ap[6] * bp[0] + 2.0 * ap[2] * bp[2] + ap[0] * bp[6]

    def make_vjp(xp, yp):
        def vjp(g):
            d = np.empty_like(xp)
            d[0] = (g * yp).sum(axis=0)
            d[1] = g[1] * yp[0] + 2.0 * g[4] * yp[1] + g[5] * yp[2]
            d[2] = g[2] * yp[0] + g[5] * yp[1] + 2.0 * g[6] * yp[2]
            d[3] = g[3] * yp[0]
            d[4:7] = g[4:7] * yp[0]
            return d
        return vjp

    return JetNode(a.tape, out, (a, b), (make_vjp(ap, bp), make_vjp(bp, ap)))


def jet_concat(parts: list[JetNode]) -> JetNode:
    """Concatenate jets along the feature (last) axis."""
    payload = np.concatenate([p.payload for p in parts], axis=-1)
    offsets = np.cumsum([0] + [p.payload.shape[-1] for p in parts])

    def make_vjp(i):
        lo, hi = offsets[i], offsets[i + 1]
        return lambda g: g[..., lo:hi].copy()

    return JetNode(parts[0].tape, payload, tuple(parts),
                   tuple(make_vjp(i) for i in range(len(parts))))


def pick(x: JetNode, slot: int, col: int, rows: slice = slice(None)) -> ValueNode:
    """Read one jet slot of one output column (optionally a row range)."""
    xp = x.payload

    def vjp(g):
        d = np.zeros_like(xp)
        d[slot, rows, col] = g
        return d

    def acc(g, buf):
        buf[slot, rows, col] += g

    return ValueNode(x.tape, xp[slot, rows, col].copy(), (x,), (vjp,), (acc,))


class JetView:
    """Slot accessors over one output column of a taped jet node.

    Exposes the same ``val/dx/.../dyy`` attributes as :class:`Jet2`, so the
    residual formulas in :mod:`mhdpinn.physics` work unchanged on the tape.
    An optional row range restricts the view to a sub-batch (used when one
    forward pass serves several point sets).  Pick nodes are created lazily
    and cached.
    """

    def __init__(self, node: JetNode, col: int, rows: slice = slice(None)):
        self._node = node
        self._col = col
        self._rows = rows
        self._cache: dict[int, ValueNode] = {}

    def _slot(self, i: int) -> ValueNode:
        if i not in self._cache:
            self._cache[i] = pick(self._node, i, self._col, self._rows)
        return self._cache[i]

    val = property(lambda self: self._slot(0))
    dx = property(lambda self: self._slot(1))
    dy = property(lambda self: self._slot(2))
    dt = property(lambda self: self._slot(3))
    dxx = property(lambda self: self._slot(4))
    dxy = property(lambda self: self._slot(5))
    dyy = property(lambda self: self._slot(6))
