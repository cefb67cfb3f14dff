"""Reverse-mode differentiation on a recorded tape.

Every node carries a numpy value (a 0-d array for scalars) and the
vector-Jacobian products needed to push gradients back to its parents.
Nodes are appended to the tape in creation order, which is a topological
order, so ``backward`` is a single reverse sweep.

All functions in this module accept plain numbers/arrays as well as
:class:`Var`. When no operand is a ``Var`` they return an ``ndarray`` and
record nothing, so physics code written against these functions runs at
numpy speed outside of a tape.

    with Tape() as tape:
        x = tape.var(2.0)
        y = tape.var(3.0)
        z = x * y
    grads = tape.backward(z)
    grads[x]  # -> 3.0
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, DomainError

LN10 = math.log(10.0)


class Var:
    __slots__ = ("tape", "value", "op", "parents", "vjps", "index", "grad")
    __array_ufunc__ = None  # make ndarray <op> Var dispatch to Var

    def __init__(self, tape, value, op="leaf", parents=(), vjps=()):
        self.tape = tape
        self.value = value
        self.op = op
        self.parents = parents
        self.vjps = vjps
        self.grad = None
        self.index = tape._push(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(op={self.op}, shape={self.shape})"

    def __len__(self):
        return len(self.value)

    # arithmetic
    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, k):
        return power(self, k)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)


class Gradients(dict):
    """Mapping leaf Var -> gradient array (same shape as the leaf)."""

    def __getitem__(self, key):
        return dict.__getitem__(self, id(key))

    def __contains__(self, key):
        return dict.__contains__(self, id(key))


class Tape:
    """Ordered node storage for one forward/backward pass.

    A tape is single-threaded. Independent tapes share no state.
    """

    def __init__(self):
        self.nodes: list[Var] = []
        self.leaves: list[Var] = []
        self.root: Var | None = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def _push(self, node):
        self.nodes.append(node)
        return len(self.nodes) - 1

    def var(self, value) -> Var:
        v = Var(self, np.array(value, dtype=float))
        self.leaves.append(v)
        return v

    def __len__(self):
        return len(self.nodes)

    def backward(self, root: Var) -> Gradients:
        """Gradient of scalar ``root`` w.r.t. every leaf on this tape.

        Gradients are reset on every call, so repeated calls return the same
        result.
        """
        if not isinstance(root, Var) or root.tape is not self:
            raise ContractViolation("backward: root is not a node of this tape")
        if root.value.size != 1:
            raise ContractViolation(f"backward: root must be scalar, got shape {root.shape}")
        self.root = root
        for n in self.nodes:
            n.grad = None
        root.grad = np.ones_like(root.value)
        for node in reversed(self.nodes[: root.index + 1]):
            g = node.grad
            if g is None or not node.parents:
                continue
            for parent, vjp in zip(node.parents, node.vjps):
                if not isinstance(parent, Var):
                    continue
                contrib = _unbroadcast(vjp(g), parent.value.shape)
                parent.grad = contrib if parent.grad is None else parent.grad + contrib
        out = Gradients()
        for leaf in self.leaves:
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.value)
            dict.__setitem__(out, id(leaf), leaf.grad)
        return out


def value(x):
    """Numeric value of a Var or array-like."""
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _unbroadcast(g, shape):
    g = np.asarray(g, dtype=float)
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _tape_of(args):
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


def _node(op, out, parents, vjps):
    tape = _tape_of(parents)
    if tape is None:
        return out
    return Var(tape, out, op, tuple(parents), tuple(vjps))


# elementwise binary ops

def add(a, b):
    return _node("add", value(a) + value(b), (a, b), (lambda g: g, lambda g: g))


def sub(a, b):
    return _node("sub", value(a) - value(b), (a, b), (lambda g: g, lambda g: -g))


def mul(a, b):
    av, bv = value(a), value(b)
    return _node("mul", av * bv, (a, b), (lambda g: g * bv, lambda g: g * av))


def div(a, b):
    av, bv = value(a), value(b)
    if np.any(bv == 0):
        raise DomainError("div", "zero denominator")
    out = av / bv
    return _node("div", out, (a, b), (lambda g: g / bv, lambda g: -g * out / bv))


def power(a, k: float):
    """``a ** k`` for a constant exponent."""
    av = value(a)
    return _node("pow", av**k, (a,), (lambda g: g * k * av ** (k - 1),))


# elementwise unary ops

def exp(a):
    out = np.exp(value(a))
    return _node("exp", out, (a,), (lambda g: g * out,))


def log(a):
    av = value(a)
    if np.any(av <= 0):
        raise DomainError("ln", "argument must be > 0")
    return _node("ln", np.log(av), (a,), (lambda g: g / av,))


def pow10(a):
    out = 10.0 ** value(a)
    return _node("pow10", out, (a,), (lambda g: g * out * LN10,))


def log10(a):
    av = value(a)
    if np.any(av <= 0):
        raise DomainError("log10", "argument must be > 0")
    return _node("log10", np.log10(av), (a,), (lambda g: g / (av * LN10),))


def tanh(a):
    out = np.tanh(value(a))
    return _node("tanh", out, (a,), (lambda g: g * (1.0 - out * out),))


def sigmoid(a):
    av = value(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * av))
    return _node("sigmoid", out, (a,), (lambda g: g * out * (1.0 - out),))


def asinh(a):
    av = value(a)
    return _node("asinh", np.arcsinh(av), (a,), (lambda g: g / np.sqrt(1.0 + av * av),))


def maximum(a, c: float):
    """Elementwise ``max(a, c)`` with a constant ``c``; subgradient 0 at ties."""
    av = value(a)
    mask = av > c
    return _node("max", np.where(mask, av, c), (a,), (lambda g: g * mask,))


# reductions and linear algebra

def sum_(a, axis=None, keepdims=False):
    av = value(a)
    out = av.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, av.shape)

    return _node("sum", out, (a,), (vjp,))


def mean(a, axis=None, keepdims=False):
    av = value(a)
    n = av.size if axis is None else av.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def dot(a, b):
    """Inner product over the last axis (fused to keep node counts low)."""
    av, bv = value(a), value(b)
    out = np.sum(av * bv, axis=-1)
    return _node("dot", out, (a, b),
                 (lambda g: np.expand_dims(g, -1) * bv, lambda g: np.expand_dims(g, -1) * av))


def matmul(a, b):
    av, bv = value(a), value(b)
    out = av @ bv

    def vjp_a(g):
        if bv.ndim == 1:
            return np.multiply.outer(g, bv)
        return g @ np.swapaxes(bv, -1, -2)

    def vjp_b(g):
        if av.ndim == 1:
            return np.multiply.outer(av, g)
        if bv.ndim == 1:
            return np.tensordot(g, av, axes=(tuple(range(g.ndim)), tuple(range(av.ndim - 1))))
        return np.swapaxes(av, -1, -2) @ g

    return _node("matmul", out, (a, b), (vjp_a, vjp_b))


def getitem(a, idx):
    av = value(a)

    def vjp(g):
        full = np.zeros_like(av)
        np.add.at(full, idx, g)
        return full

    return _node("getitem", av[idx], (a,), (vjp,))


def stack(items: Sequence, axis=-1):
    vals = [value(x) for x in items]
    out = np.stack(vals, axis=axis)

    def make(i):
        return lambda g: np.take(g, i, axis=axis)

    return _node("stack", out, tuple(items), tuple(make(i) for i in range(len(items))))


def stop_gradient(a):
    return value(a).copy()


# gradient checking

def grad(f: Callable, x) -> tuple[float, np.ndarray]:
    """Value and reverse-mode gradient of scalar ``f`` at ``x``."""
    tape = Tape()
    xv = tape.var(np.asarray(x, dtype=float))
    y = f(xv)
    if not isinstance(y, Var):
        return float(np.asarray(y)), np.zeros_like(xv.value)
    g = tape.backward(y)
    return float(y.value), g[xv]


def gradcheck(f: Callable, x, tol=1e-6, step=1e-5):
    """Compare reverse-mode gradient of ``f`` with central differences.

    Relative error per component is ``|g - g_fd| / max(1, |g|, |g_fd|)``
    and the finite-difference step is ``step * max(1, |x_i|)``.
    Returns ``(passed, worst_index, worst_error)``.
    """
    x = np.array(x, dtype=float)
    _, g = grad(f, x)
    g = g.reshape(x.shape)
    fd = np.zeros_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        h = step * max(1.0, abs(flat[i]))
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        try:
            fp = float(np.asarray(value(f(xp.reshape(x.shape)))))
            fm = float(np.asarray(value(f(xm.reshape(x.shape)))))
        except DomainError:
            # the stencil left the domain: report as a failed component
            fp, fm = np.inf, 0.0
        fd.reshape(-1)[i] = (fp - fm) / (2 * h)
    with np.errstate(invalid="ignore"):
        err = np.abs(g - fd) / np.maximum(1.0, np.maximum(np.abs(g), np.abs(fd)))
    err = np.where(np.isfinite(err), err, np.inf)
    worst = int(np.argmax(err)) if err.size else 0
    worst_err = float(err.reshape(-1)[worst]) if err.size else 0.0
    return worst_err < tol, worst, worst_err
