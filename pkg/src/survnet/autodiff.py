"""Minimal reverse-mode automatic differentiation over dense float64 matrices.

Every value is a 2-D array (scalars are 1x1). Operations performed inside an
active :class:`Tape` on nodes that require gradients are recorded; outside a
tape they just compute values. Leaf parameters accumulate gradients across
backward passes until :func:`zero_grad` is called.

    w = Node.parameter([[2.0]])
    with Tape() as tape:
        y = (w * w).sum()
    tape.backward(y)
    w.grad  # [[4.0]]

Broadcasting is limited to scalar-times-matrix in :func:`mul`; every other
shape mismatch raises :class:`ShapeMismatch`.
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, NonScalarOutput, ShapeMismatch

_ids = itertools.count()
_local = threading.local()


def _as_matrix(value) -> np.ndarray:
    a = np.array(value, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ShapeMismatch(f"expected at most 2 dimensions, got {a.ndim}")
    return a


class Node:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad", "id", "__weakref__")

    def __init__(self, value, parents: tuple = (), backward_fn: Callable | None = None,
                 requires_grad: bool = False):
        self.value = _as_matrix(value)
        self.grad = np.zeros_like(self.value)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.id = next(_ids)

    @classmethod
    def parameter(cls, value) -> "Node":
        return cls(value, requires_grad=True)

    @classmethod
    def constant(cls, value) -> "Node":
        return cls(value)

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return self.backward_fn is None

    def item(self) -> float:
        if self.value.size != 1:
            raise NonScalarOutput(f"node of shape {self.shape} is not a scalar")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Node(id={self.id}, shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def sum(self):
        return sum_(self)

    def mean(self):
        return mean(self)


class Tape:
    """Records nodes created while it is the active tape of this thread."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, output: Node) -> None:
        backward(self, output)


def _stack() -> list[Tape]:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def _lift(x, like: Node | None = None) -> Node:
    if isinstance(x, Node):
        return x
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0 and like is not None:
        a = np.full(like.shape, float(a))
    return Node.constant(a)


def _record(value, parents: Sequence[Node], backward_fn: Callable) -> Node:
    tape = active_tape()
    if tape is None or not any(p.requires_grad for p in parents):
        return Node(value)
    node = Node(value, tuple(parents), backward_fn, requires_grad=True)
    tape.nodes.append(node)
    return node


def _same_shape(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- primitives -------------------------------------------------------------

def add(a, b) -> Node:
    a, b = _lift(a, b if isinstance(b, Node) else None), _lift(b, a if isinstance(a, Node) else None)
    _same_shape(a, b, "add")
    return _record(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b) -> Node:
    a, b = _lift(a, b if isinstance(b, Node) else None), _lift(b, a if isinstance(a, Node) else None)
    _same_shape(a, b, "sub")
    return _record(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a, b) -> Node:
    """Elementwise product; either operand may be a 1x1 scalar."""
    a, b = _lift(a), _lift(b)
    if a.shape == b.shape:
        return _record(a.value * b.value, (a, b), lambda g: (g * b.value, g * a.value))
    if a.shape == (1, 1):
        return _record(a.value * b.value, (a, b),
                       lambda g: (np.sum(g * b.value).reshape(1, 1), g * a.value))
    if b.shape == (1, 1):
        return _record(a.value * b.value, (a, b),
                       lambda g: (g * b.value, np.sum(g * a.value).reshape(1, 1)))
    raise ShapeMismatch(f"mul: shapes {a.shape} and {b.shape} are incompatible")


def neg(a: Node) -> Node:
    return _record(-a.value, (a,), lambda g: (-g,))


def matmul(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape} do not chain")
    return _record(a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


def exp(a: Node) -> Node:
    out = np.exp(a.value)
    return _record(out, (a,), lambda g: (g * out,))


def log(a: Node) -> Node:
    if np.any(a.value <= 0):
        raise DomainError("log of a non-positive value")
    return _record(np.log(a.value), (a,), lambda g: (g / a.value,))


def sum_(a: Node) -> Node:
    return _record(np.sum(a.value).reshape(1, 1), (a,),
                   lambda g: (np.full(a.shape, g[0, 0]),))


def mean(a: Node) -> Node:
    size = a.value.size
    return _record(np.mean(a.value).reshape(1, 1), (a,),
                   lambda g: (np.full(a.shape, g[0, 0] / size),))


def relu(a: Node) -> Node:
    """max(x, 0); the derivative at exactly 0 is taken to be 0."""
    active = a.value > 0
    return _record(np.where(active, a.value, 0.0), (a,), lambda g: (g * active,))


def gather(a: Node, rows) -> Node:
    """Select (possibly repeated) rows."""
    idx = np.asarray(rows, dtype=np.intp).ravel()

    def back(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return (out,)

    return _record(a.value[idx], (a,), back)


def concat(nodes: Sequence[Node]) -> Node:
    """Stack nodes vertically (they must share a column count)."""
    nodes = [_lift(n) for n in nodes]
    cols = {n.shape[1] for n in nodes}
    if len(cols) != 1:
        raise ShapeMismatch(f"concat: column counts {sorted(cols)} differ")
    bounds = np.cumsum([0] + [n.shape[0] for n in nodes])

    def back(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(nodes)))

    return _record(np.vstack([n.value for n in nodes]), tuple(nodes), back)


def logsumexp(a: Node, mask=None) -> Node:
    """Log of summed exponentials of a column vector over masked subsets.

    ``mask`` is a boolean n-vector (result 1x1) or a D x n matrix whose rows
    select D subsets (result D x 1). Each subset is shifted by its own max,
    so large inputs do not overflow.
    """
    if a.shape[1] != 1:
        raise ShapeMismatch(f"logsumexp expects a column vector, got {a.shape}")
    x = a.value[:, 0]
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    single = m.ndim == 1
    m = np.atleast_2d(m)
    if m.shape[1] != x.size:
        raise ShapeMismatch(f"mask of shape {m.shape} does not match {x.size} entries")
    if not m.any(axis=1).all():
        raise DomainError("logsumexp over an empty subset")
    masked = np.where(m, x[None, :], -np.inf)
    top = masked.max(axis=1, keepdims=True)
    shifted = np.exp(masked - top)
    total = shifted.sum(axis=1, keepdims=True)
    out = top + np.log(total)

    def back(g):
        weights = shifted / total
        return ((weights * g).sum(axis=0).reshape(-1, 1),)

    return _record(out if not single else out.reshape(1, 1), (a,), back)


# -- backward ---------------------------------------------------------------

def backward(tape: Tape, output: Node) -> None:
    """Accumulate d(output)/d(leaf) into the ``grad`` of every leaf reached.

    Adjoints of recorded intermediate nodes are recomputed from zero on each
    call; leaf adjoints add up across calls.
    """
    if output.shape != (1, 1):
        raise NonScalarOutput(f"backward needs a scalar output, got shape {output.shape}")
    if output.is_leaf:
        if output.requires_grad:
            output.grad += 1.0
        return
    for node in tape.nodes:
        node.grad = np.zeros_like(node.value)
    output.grad = np.ones((1, 1))
    for node in reversed(tape.nodes):
        if node.id > output.id or not node.grad.any():
            continue
        for parent, g in zip(node.parents, node.backward_fn(node.grad)):
            if parent.requires_grad:
                parent.grad = parent.grad + g


def zero_grad(nodes: Iterable[Node]) -> None:
    for node in nodes:
        node.grad = np.zeros_like(node.value)


def grad(fn: Callable[..., Node], *values) -> list[np.ndarray]:
    """Gradients of the scalar ``fn(*params)`` with respect to each input."""
    params = [Node.parameter(v) for v in values]
    with Tape() as tape:
        out = fn(*params)
    tape.backward(out)
    return [p.grad for p in params]
