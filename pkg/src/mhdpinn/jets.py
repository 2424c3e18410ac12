"""Second-order jets in the space-time inputs (x, y, t).

A jet carries a value together with the input derivatives that the MHD
residual operators consume: first derivatives in x, y, t and the spatial
second derivatives xx, xy, yy.  Second derivatives in time and mixed
space-time derivatives are never needed, so they are not stored.

All slots may be scalars or numpy arrays of a common batch shape; the
arithmetic is vectorized and pure.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

SLOTS = ("val", "dx", "dy", "dt", "dxx", "dxy", "dyy")
N_SLOTS = len(SLOTS)


class JetDomainError(ArithmeticError):
    """Raised when an elementary operation leaves its domain (e.g. x/0)."""


@dataclass(frozen=True)
class Jet2:
    """Value plus first space-time and second spatial derivatives."""

    val: np.ndarray | float
    dx: np.ndarray | float = 0.0
    dy: np.ndarray | float = 0.0
    dt: np.ndarray | float = 0.0
    dxx: np.ndarray | float = 0.0
    dxy: np.ndarray | float = 0.0
    dyy: np.ndarray | float = 0.0

    # keep numpy from hijacking `ndarray op Jet2` into elementwise object math
    __array_ufunc__ = None

    def slots(self) -> tuple:
        return (self.val, self.dx, self.dy, self.dt, self.dxx, self.dxy, self.dyy)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(*(a + b for a, b in zip(self.slots(), other.slots())))
        return Jet2(self.val + other, self.dx, self.dy, self.dt,
                    self.dxx, self.dxy, self.dyy)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(*(-a for a in self.slots()))

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return Jet2(*(a - b for a, b in zip(self.slots(), other.slots())))
        return Jet2(self.val - other, self.dx, self.dy, self.dt,
                    self.dxx, self.dxy, self.dyy)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(*(a * other for a in self.slots()))
        a, b = self, other
        return Jet2(
            a.val * b.val,
            a.dx * b.val + a.val * b.dx,
            a.dy * b.val + a.val * b.dy,
            a.dt * b.val + a.val * b.dt,
            a.dxx * b.val + 2.0 * a.dx * b.dx + a.val * b.dxx,
            a.dxy * b.val + a.dx * b.dy + a.dy * b.dx + a.val * b.dxy,
            a.dyy * b.val + 2.0 * a.dy * b.dy + a.val * b.dyy,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / other)
        return self * jrecip(other)

    def __rtruediv__(self, other):
        return jrecip(self) * other

    def __pow__(self, n: float):
        return jpow(self, n)

    def restrict(self, rows) -> "Jet2":
        """Jet over a sub-batch: array slots are sliced, scalars pass through."""
        return Jet2(*(a[rows] if isinstance(a, np.ndarray) else a
                      for a in self.slots()))


def jet_const(c) -> Jet2:
    """Jet of a constant: all derivative slots are zero."""
    return Jet2(np.asarray(c, dtype=float))


def jet_seed(x, y, t) -> tuple[Jet2, Jet2, Jet2]:
    """Input jets for a space-time point (or batch of points)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    one = np.ones(np.broadcast_shapes(x.shape, y.shape, t.shape))
    zero = np.zeros_like(one)
    return (
        Jet2(x * np.ones_like(one), one, zero, zero, zero, zero, zero),
        Jet2(y * np.ones_like(one), zero, one, zero, zero, zero, zero),
        Jet2(t * np.ones_like(one), zero, zero, one, zero, zero, zero),
    )


def _unary(a: Jet2, f, f1, f2) -> Jet2:
    """Chain rule through a scalar function given f(v), f'(v), f''(v)."""
    return Jet2(
        f,
        f1 * a.dx,
        f1 * a.dy,
        f1 * a.dt,
        f2 * a.dx * a.dx + f1 * a.dxx,
        f2 * a.dx * a.dy + f1 * a.dxy,
        f2 * a.dy * a.dy + f1 * a.dyy,
    )


def tanh_derivs(x, order: int = 2, out=None):
    # in-place arithmetic: these run on large batches in the training loop;
    # ``out`` optionally supplies preallocated buffers, one per result
    buf = iter(out) if out is not None else None
    xf = x if out is not None else np.asarray(x, dtype=np.result_type(x, 0.5))
    take = (lambda: next(buf)) if buf is not None else (lambda: np.empty_like(xf))
    v = take()
    np.tanh(x, out=v)
    f1 = take()                  # f1 = 1 - v^2
    np.square(v, out=f1)
    np.subtract(1.0, f1, out=f1)
    f2 = take()                  # f2 = -2 v (1 - v^2)
    np.multiply(v, f1, out=f2)
    f2 *= -2.0
    if order < 3:
        return v, f1, f2
    f3 = take()                  # f3 = -2 (1 - v^2)(1 - 3 v^2)
    np.square(v, out=f3)
    f3 *= -3.0
    f3 += 1.0
    f3 *= f1
    f3 *= -2.0
    return v, f1, f2, f3


def sin_derivs(x, order: int = 2):
    s, c = np.sin(x), np.cos(x)
    return (s, c, -s) if order < 3 else (s, c, -s, -c)


def cos_derivs(x, order: int = 2):
    s, c = np.sin(x), np.cos(x)
    return (c, -s, -c) if order < 3 else (c, -s, -c, s)


def exp_derivs(x, order: int = 2):
    e = np.exp(x)
    return (e, e, e) if order < 3 else (e, e, e, e)


def identity_derivs(x, order: int = 2):
    one = np.ones_like(np.asarray(x, dtype=float))
    zero = np.zeros_like(one)
    return (x * one, one, zero) if order < 3 else (x * one, one, zero, zero)


DERIV_TABLES: dict[str, Callable] = {
    "tanh": tanh_derivs,
    "sin": sin_derivs,
    "cos": cos_derivs,
    "exp": exp_derivs,
    "identity": identity_derivs,
}


def jtanh(a: Jet2) -> Jet2:
    return _unary(a, *tanh_derivs(a.val))


def jsin(a: Jet2) -> Jet2:
    return _unary(a, *sin_derivs(a.val))


def jcos(a: Jet2) -> Jet2:
    return _unary(a, *cos_derivs(a.val))


def jexp(a: Jet2) -> Jet2:
    return _unary(a, *exp_derivs(a.val))


def jrecip(a: Jet2) -> Jet2:
    v = np.asarray(a.val, dtype=float)
    if np.any(v == 0.0):
        raise JetDomainError("division by zero in jet reciprocal")
    inv = 1.0 / v
    return _unary(a, inv, -inv * inv, 2.0 * inv * inv * inv)


def jpow(a: Jet2, n: float) -> Jet2:
    v = np.asarray(a.val, dtype=float)
    if n != int(n) and np.any(v < 0.0):
        raise JetDomainError("fractional power of a negative jet value")
    if n < 2 and np.any(v == 0.0) and n not in (0, 1):
        raise JetDomainError("power would differentiate through zero")
    f = v ** n
    f1 = n * v ** (n - 1) if n != 0 else np.zeros_like(v)
    f2 = n * (n - 1) * v ** (n - 2) if n not in (0, 1) else np.zeros_like(v)
    return _unary(a, f, f1, f2)


_BINARY = {"+": lambda a, b: a + b, "-": lambda a, b: a - b,
           "*": lambda a, b: a * b, "/": lambda a, b: a / b}
_UNARY = {"tanh": jtanh, "sin": jsin, "cos": jcos, "exp": jexp,
          "recip": jrecip}


def jet_apply(op: str, a: Jet2, b=None) -> Jet2:
    """Apply a named elementary operation to one or two jets.

    Binary ops: ``+ - * /``.  Unary ops: ``tanh sin cos exp recip``.
    Powers go through ``jpow(a, n)`` / the ``**`` operator.
    """
    if op in _BINARY:
        if b is None:
            raise ValueError(f"binary op {op!r} needs two operands")
        return _BINARY[op](a, b)
    if op in _UNARY:
        if b is not None:
            raise ValueError(f"unary op {op!r} takes one operand")
        return _UNARY[op](a)
    raise ValueError(f"unknown elementary op {op!r}")
