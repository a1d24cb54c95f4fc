"""Reverse-mode differentiation over numpy arrays.

A :class:`Tape` records every elementary operation applied to :class:`Var`
objects in creation order.  Because nodes are only ever appended, creation
order is a topological order, and the reverse sweep simply walks the node list
backwards.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (undo numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Append-only record of operations.

    Each entry is ``(parents, backward)`` where ``backward`` maps the adjoint of
    the node to a tuple of adjoint contributions, one per parent.
    """

    def __init__(self) -> None:
        self.nodes: list[tuple[tuple[int, ...], Callable | None]] = []
        self.values: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def variable(self, value) -> "Var":
        return self._push(np.asarray(value, dtype=float), (), None)

    def _push(self, value, parents, backward) -> "Var":
        self.nodes.append((parents, backward))
        self.values.append(value)
        return Var(self, len(self.nodes) - 1, value)

    def replay(self) -> list[np.ndarray]:
        """Recorded node values, in recording order."""
        return list(self.values)

    def backward(self, output: "Var", seed=None) -> list[np.ndarray | None]:
        """Reverse sweep from ``output``; returns per-node adjoints."""
        if output.tape is not self:
            raise ValueError("output does not belong to this tape")
        adj: list[np.ndarray | None] = [None] * len(self.nodes)
        adj[output.idx] = (
            np.ones_like(output.value) if seed is None else np.asarray(seed, dtype=float)
        )
        for i in range(output.idx, -1, -1):
            g = adj[i]
            if g is None:
                continue
            parents, fn = self.nodes[i]
            if fn is None:
                continue
            for p, gp in zip(parents, fn(g)):
                if gp is None:
                    continue
                adj[p] = gp if adj[p] is None else adj[p] + gp
        return adj


class Var:
    """Array-valued node on a :class:`Tape`."""

    __slots__ = ("tape", "idx", "value")
    __array_ufunc__ = None

    def __init__(self, tape: Tape, idx: int, value: np.ndarray) -> None:
        self.tape = tape
        self.idx = idx
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self) -> str:
        return f"Var(idx={self.idx}, shape={self.value.shape})"

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Var):
            sa, sb = self.shape, other.shape
            return self.tape._push(
                self.value + other.value,
                (self.idx, other.idx),
                lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
            )
        sa = self.shape
        return self.tape._push(
            self.value + other, (self.idx,), lambda g: (_unbroadcast(g, sa),)
        )

    __radd__ = __add__

    def __neg__(self):
        return self.tape._push(-self.value, (self.idx,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Var):
            a, b = self.value, other.value
            return self.tape._push(
                a * b,
                (self.idx, other.idx),
                lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
            )
        a = self.value
        c = np.asarray(other)
        return self.tape._push(
            a * c, (self.idx,), lambda g: (_unbroadcast(g * c, a.shape),)
        )

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Var):
            a, b = self.value, other.value
            return self.tape._push(
                a @ b,
                (self.idx, other.idx),
                lambda g: (
                    _unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape),
                    _unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape),
                ),
            )
        a, b = self.value, np.asarray(other)
        return self.tape._push(
            a @ b,
            (self.idx,),
            lambda g: (_unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape),),
        )

    def __rmatmul__(self, other):
        a, b = np.asarray(other), self.value
        return self.tape._push(
            a @ b,
            (self.idx,),
            lambda g: (_unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape),),
        )

    # -- structural -------------------------------------------------------

    def __getitem__(self, index):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            if _is_advanced(index):
                np.add.at(out, index, g)
            else:
                out[index] += g
            return (out,)

        return self.tape._push(self.value[index], (self.idx,), back)

    def reshape(self, *shape):
        old = self.shape
        return self.tape._push(
            self.value.reshape(*shape), (self.idx,), lambda g: (g.reshape(old),)
        )

    def sum(self, axis=None):
        old = self.shape

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, old).copy(),)

        return self.tape._push(self.value.sum(axis=axis), (self.idx,), back)


def _is_advanced(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def elementwise(x, f: Callable, df: Callable):
    """Apply ``f`` elementwise; ``df`` gives its derivative for the reverse sweep."""
    if not isinstance(x, Var):
        return f(x)
    v = x.value
    return x.tape._push(f(v), (x.idx,), lambda g: (g * df(v),))


def grad(fn: Callable[[Var], Var], theta: Sequence[float]) -> tuple[float, np.ndarray]:
    """Value and gradient of a scalar function built from tape operations."""
    tape = Tape()
    x = tape.variable(theta)
    out = fn(x)
    if not isinstance(out, Var) or out.tape is not tape or len(tape) <= 1:
        raise ValueError("loss function recorded no operations on the tape")
    if out.value.size != 1:
        raise ValueError(f"loss must be scalar, got shape {out.value.shape}")
    adj = tape.backward(out)
    g = adj[x.idx]
    if g is None:
        g = np.zeros_like(x.value)
    return float(out.value), g
