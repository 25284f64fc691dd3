"""Tensor primitives and smooth logical operators used by inference.

Every op accepts plain ``float64`` arrays or :class:`~softchain.dual.Dual`
arrays and returns the same kind.
"""

from __future__ import annotations

import numpy as np

from . import dual as D

NORMALIZATION_SCOPES = ("global", "row")


class KernelError(ValueError):
    pass


def gather1(X, Y):
    """``out[i, j, k, l] = X[i, Y[i, j, k, l], k, l]``."""
    Y = np.asarray(Y)
    G = X.shape[1]
    if Y.size and (Y.min() < 0 or Y.max() >= G):
        raise KernelError(f"gather index out of range [0, {G})")
    return D.take_along_axis(X, Y, axis=1)


def prod_d(X, axis: int):
    """Product along ``axis``; an empty axis yields 1."""
    return D.prod(X, axis)


def sum_d(X, axis: int):
    return D.sum(X, axis=axis)


def stack_d(xs, axis: int):
    return D.stack(list(xs), axis)


def expand(X, shape):
    """Broadcast ``X`` to ``shape`` (read-only view)."""
    try:
        return D.broadcast_to(X, tuple(shape))
    except ValueError as exc:
        raise KernelError(f"cannot expand {X.shape} to {tuple(shape)}") from exc


def elementwise_mul(X, Y):
    if D.value(X).shape != D.value(Y).shape:
        raise KernelError(f"shape mismatch {D.value(X).shape} vs {D.value(Y).shape}")
    return X * Y


def softmax_d(X, axis: int):
    m = D.value(X).max(axis=axis, keepdims=True)  # shift only, no tangent needed
    e = D.exp(X - m)
    return e / D.sum(e, axis=axis, keepdims=True)


def logsumexp_gamma(X, axis: int, gamma: float):
    """``gamma * log(sum(exp(X / gamma)))`` along ``axis`` via max subtraction."""
    m = D.value(X).max(axis=axis, keepdims=True)
    inner = D.sum(D.exp((X - m) / gamma), axis=axis)
    return np.squeeze(m, axis=axis) + gamma * D.log(inner)


def normalizer(raw, scope: str = "global"):
    """Rescaling factor: max of ``raw`` if it exceeds 1, else 1.

    ``scope="global"`` takes one max over the whole tensor; ``"row"`` takes
    one per index of axis 0.
    """
    if scope == "global":
        m = D.select_max(raw, axis=None, keepdims=True)
    elif scope == "row":
        flat = raw.reshape(raw.shape[0], -1)
        m = D.select_max(flat, axis=1, keepdims=True).reshape((raw.shape[0],) + (1,) * (raw.ndim - 1))
    else:
        raise KernelError(f"unknown normalization scope {scope!r}")
    return D.maximum_const(m, 1.0)


def softor(X, axis: int, gamma: float, scope: str = "global"):
    """Smooth logical *or* along ``axis``, normalized into [0, 1].

    A log-sum-exp with temperature ``gamma``, divided by its maximum
    whenever that maximum exceeds 1.
    """
    if not gamma > 0:
        raise KernelError("gamma must be positive")
    raw = logsumexp_gamma(X, axis, gamma)
    return raw / normalizer(raw, scope)


def softor_raw(X, axis: int, gamma: float):
    """Unnormalized log-sum-exp part of :func:`softor`."""
    if not gamma > 0:
        raise KernelError("gamma must be positive")
    return logsumexp_gamma(X, axis, gamma)


def prob_sum(X, axis: int):
    """Probabilistic-sum *or*, ``x + y - xy`` folded along ``axis``.

    Only a comparison baseline; inference always uses :func:`softor`.
    """
    moved = D.moveaxis(X, axis, 0)
    out = moved[0]
    for k in range(1, moved.shape[0]):
        out = out + moved[k] - out * moved[k]
    return out


def check_unit_interval(X, name: str = "tensor", atol: float = 1e-9) -> None:
    v = D.value(X)
    if v.size and (np.nanmin(v) < -atol or np.nanmax(v) > 1 + atol or np.isnan(v).any()):
        raise KernelError(f"{name} has entries outside [0, 1]")
