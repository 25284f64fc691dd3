"""Array-valued dual numbers for forward-mode derivatives.

A :class:`Dual` carries a value array and a tangent array of the same shape;
arithmetic follows ``(a + e a')(b + e b') = ab + e(a b' + a' b)``. The helper
functions below accept plain arrays or duals, so kernels written against them
run unchanged in both modes.
"""

from __future__ import annotations

import numpy as np


class Dual:
    __array_ufunc__ = None  # make ndarray (op) Dual defer to the reflected Dual method

    __slots__ = ("val", "tan")

    def __init__(self, val, tan=None):
        self.val = np.asarray(val, dtype=np.float64)
        if tan is None:
            self.tan = np.zeros_like(self.val)
        else:
            tan = np.asarray(tan, dtype=np.float64)
            if tan.shape != self.val.shape:
                tan = np.broadcast_to(tan, self.val.shape).copy()
            self.tan = tan

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"Dual(val={self.val!r}, tan={self.tan!r})"

    def __getitem__(self, key):
        return Dual(self.val[key], self.tan[key])

    def reshape(self, *shape):
        return Dual(self.val.reshape(*shape), self.tan.reshape(*shape))

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __add__(self, other):
        o_val, o_tan = split(other)
        return Dual(self.val + o_val, self.tan + o_tan)

    __radd__ = __add__

    def __sub__(self, other):
        o_val, o_tan = split(other)
        return Dual(self.val - o_val, self.tan - o_tan)

    def __rsub__(self, other):
        o_val, o_tan = split(other)
        return Dual(o_val - self.val, o_tan - self.tan)

    def __mul__(self, other):
        o_val, o_tan = split(other)
        return Dual(self.val * o_val, self.val * o_tan + self.tan * o_val)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o_val, o_tan = split(other)
        return Dual(self.val / o_val, (self.tan * o_val - self.val * o_tan) / (o_val * o_val))

    def __rtruediv__(self, other):
        o_val, o_tan = split(other)
        return Dual(o_val / self.val, (o_tan * self.val - o_val * self.tan) / (self.val * self.val))


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def split(x):
    """(value, tangent) of ``x``; plain inputs have a zero tangent."""
    if isinstance(x, Dual):
        return x.val, x.tan
    x = np.asarray(x, dtype=np.float64)
    return x, np.zeros_like(x)


def value(x) -> np.ndarray:
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=np.float64)


def tangent(x) -> np.ndarray:
    return x.tan if isinstance(x, Dual) else np.zeros_like(np.asarray(x, dtype=np.float64))


def _lift(x, val, dval_dx):
    """Wrap a unary result, propagating the tangent when ``x`` is dual."""
    if isinstance(x, Dual):
        return Dual(val, dval_dx * x.tan)
    return val


def exp(x):
    v = np.exp(value(x))
    return _lift(x, v, v)


def log(x):
    v = value(x)
    return _lift(x, np.log(v), 1.0 / v)


def sqrt(x):
    v = np.sqrt(value(x))
    if isinstance(x, Dual):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(v > 0, 0.5 / np.where(v > 0, v, 1.0), 0.0)
        return Dual(v, d * x.tan)
    return v


def sigmoid(x):
    v = value(x)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return _lift(x, out, out * (1.0 - out))


def maximum_const(x, floor: float):
    """``max(x, floor)`` with zero tangent where the floor is active."""
    v = value(x)
    active = v > floor
    return _lift(x, np.where(active, v, floor), active.astype(np.float64))


def sum(x, axis=None, keepdims=False):
    if isinstance(x, Dual):
        return Dual(x.val.sum(axis=axis, keepdims=keepdims), x.tan.sum(axis=axis, keepdims=keepdims))
    return np.sum(x, axis=axis, keepdims=keepdims)


def prod(x, axis):
    if not isinstance(x, Dual):
        return np.prod(x, axis=axis)
    moved = Dual(np.moveaxis(x.val, axis, 0), np.moveaxis(x.tan, axis, 0))
    if moved.shape[0] == 0:
        return Dual(np.ones(moved.shape[1:]))
    out = moved[0]
    for k in range(1, moved.shape[0]):
        out = out * moved[k]
    return out


def take_along_axis(x, idx, axis):
    if isinstance(x, Dual):
        return Dual(np.take_along_axis(x.val, idx, axis), np.take_along_axis(x.tan, idx, axis))
    return np.take_along_axis(x, idx, axis)


def take(x, idx, axis):
    if isinstance(x, Dual):
        return Dual(np.take(x.val, idx, axis=axis), np.take(x.tan, idx, axis=axis))
    return np.take(x, idx, axis=axis)


def stack(xs, axis=0):
    if any(isinstance(x, Dual) for x in xs):
        parts = [split(x) for x in xs]
        return Dual(np.stack([p[0] for p in parts], axis), np.stack([p[1] for p in parts], axis))
    return np.stack([np.asarray(x, dtype=np.float64) for x in xs], axis)


def concatenate(xs, axis=0):
    if any(isinstance(x, Dual) for x in xs):
        parts = [split(x) for x in xs]
        return Dual(np.concatenate([p[0] for p in parts], axis), np.concatenate([p[1] for p in parts], axis))
    return np.concatenate([np.asarray(x, dtype=np.float64) for x in xs], axis)


def broadcast_to(x, shape):
    if isinstance(x, Dual):
        return Dual(np.broadcast_to(x.val, shape), np.broadcast_to(x.tan, shape))
    return np.broadcast_to(x, shape)


def expand_dims(x, axis):
    if isinstance(x, Dual):
        return Dual(np.expand_dims(x.val, axis), np.expand_dims(x.tan, axis))
    return np.expand_dims(x, axis)


def moveaxis(x, src, dst):
    if isinstance(x, Dual):
        return Dual(np.moveaxis(x.val, src, dst), np.moveaxis(x.tan, src, dst))
    return np.moveaxis(x, src, dst)


def select_max(x, axis=None, keepdims=False):
    """Maximum whose tangent is taken from the (first) maximizing entry."""
    v = value(x)
    if axis is None:
        flat = int(np.argmax(v))
        m = v.reshape(-1)[flat]
        if isinstance(x, Dual):
            t = x.tan.reshape(-1)[flat]
            shape = (1,) * v.ndim if keepdims else ()
            return Dual(np.reshape(m, shape), np.reshape(t, shape))
        return np.reshape(m, (1,) * v.ndim) if keepdims else m
    arg = np.expand_dims(np.argmax(v, axis=axis), axis)
    out = take_along_axis(x, arg, axis)
    if not keepdims:
        out = out[(slice(None),) * (axis % v.ndim) + (0,)]
    return out


def where(cond, a, b):
    if isinstance(a, Dual) or isinstance(b, Dual):
        av, at = split(a)
        bv, bt = split(b)
        return Dual(np.where(cond, av, bv), np.where(cond, at, bt))
    return np.where(cond, a, b)


def set_columns(x, columns, fill: float):
    """Copy of a 2-D ``x`` with the given columns set to the constant ``fill``."""
    if isinstance(x, Dual):
        val, tan = x.val.copy(), x.tan.copy()
        val[:, columns] = fill
        tan[:, columns] = 0.0
        return Dual(val, tan)
    out = np.array(x, dtype=np.float64, copy=True)
    out[:, columns] = fill
    return out
