"""Second-order spatial jets.

A :class:`Jet2` carries a value together with its first and second derivative
along one active spatial coordinate.  To get a Laplacian we need one such jet
per coordinate; rather than running ``d`` separate sweeps we stack them along
an extra axis, so ``d1`` and ``d2`` hold one slice per coordinate while ``val``
is shared.  Slice ``k`` of the stacked jet is exactly the per-coordinate jet
with coordinate ``k`` active.

Components may be plain numpy arrays (pure evaluation, possibly batched over
parameter vectors) or :class:`~lprobe.jetdiff.tape.Var` nodes (when a
parameter gradient is wanted).  Shapes follow the convention

    val: (..., n, P)      d1, d2: (..., d, n, P)

with ``n`` features and ``P`` evaluation points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from lprobe.jetdiff.tape import elementwise


@dataclass(frozen=True)
class Jet2:
    val: Any
    d1: Any
    d2: Any

    @staticmethod
    def constant(value, dim: int) -> "Jet2":
        value = np.asarray(value, dtype=float)
        zeros = np.zeros(value.shape[:-2] + (dim,) + value.shape[-2:])
        return Jet2(value, zeros, zeros)

    @staticmethod
    def coordinates(x: np.ndarray) -> "Jet2":
        """Lift points ``x`` of shape (d, P) so that coordinate k is active in slice k."""
        d, p = x.shape
        d1 = np.broadcast_to(np.eye(d)[:, :, None], (d, d, p))
        return Jet2(x, d1, np.zeros((d, d, p)))

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.val + other.val, self.d1 + other.d1, self.d2 + other.d2)

    def __mul__(self, other: "Jet2") -> "Jet2":
        # (fg)'' = f''g + 2f'g' + fg''
        fv, gv = _lift(self.val), _lift(other.val)
        return Jet2(
            self.val * other.val,
            self.d1 * gv + fv * other.d1,
            self.d2 * gv + 2.0 * (self.d1 * other.d1) + fv * other.d2,
        )

    def scale(self, factor) -> "Jet2":
        return Jet2(self.val * factor, self.d1 * factor, self.d2 * factor)

    def laplacian(self):
        return self.d2.sum(axis=-3)


def _lift(v):
    """Insert the coordinate axis so a value broadcasts against d1/d2."""
    return v[..., None, :, :]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# Derivatives of order 0..3 for each supported activation.  Order k+1 is the
# reverse-mode partner of order k.

def _swish(order: int):
    def f(z):
        s = _sigmoid(z)
        if order == 0:
            return z * s
        q = s * (1.0 - s)
        if order == 1:
            return s + z * q
        a = 1.0 - 2.0 * s
        if order == 2:
            return q * (2.0 + z * a)
        return q * a * (2.0 + z * a) + q * (a - 2.0 * z * q)
    return f


def _sig(order: int):
    def f(z):
        s = _sigmoid(z)
        if order == 0:
            return s
        q = s * (1.0 - s)
        if order == 1:
            return q
        a = 1.0 - 2.0 * s
        if order == 2:
            return q * a
        return q * a * a - 2.0 * q * q
    return f


ACTIVATIONS = {"swish": _swish, "sigmoid": _sig}


def activation_derivative(name: str, order: int, z):
    """``order``-th derivative of the named activation at ``z`` (0 <= order <= 2)."""
    family = ACTIVATIONS[name]
    return elementwise(z, family(order), family(order + 1))


def activate(name: str, z: Jet2) -> Jet2:
    """Push a jet through an elementwise activation by the chain rule."""
    if name not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}")
    a0 = activation_derivative(name, 0, z.val)
    a1 = activation_derivative(name, 1, z.val)
    a2 = activation_derivative(name, 2, z.val)
    a1l, a2l = _lift(a1), _lift(a2)
    return Jet2(a0, a1l * z.d1, a2l * (z.d1 * z.d1) + a1l * z.d2)


def swish(z: Jet2) -> Jet2:
    return activate("swish", z)
