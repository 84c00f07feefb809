"""A small reverse-mode differentiation tape over numpy arrays.

Every op appends one backward closure to the tape it was recorded on; the
backward sweep replays them in reverse creation order, which is a valid
topological order because a node can only consume nodes created before it.
A tape built with ``enabled=False`` records nothing, so the same model code
doubles as a cheap inference path.
"""
from __future__ import annotations

import numpy as np


class Var:
    __slots__ = ("value", "grad", "tape", "requires_grad")
    # make numpy defer to our reflected operators (ndarray + Var -> Var)
    __array_ufunc__ = None

    def __init__(self, value, tape: "Tape", requires_grad: bool = False):
        self.value = value
        self.grad = None
        self.tape = tape
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def gradient(self) -> np.ndarray:
        """Accumulated gradient; exactly zero for a leaf the output never touched."""
        return self.grad if self.grad is not None else np.zeros_like(self.value)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self.tape), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __repr__(self):
        return f"Var(shape={np.shape(self.value)}, requires_grad={self.requires_grad})"


class Tape:
    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._backward = []

    def var(self, value) -> Var:
        """A leaf whose gradient is wanted."""
        return Var(np.asarray(value, dtype=float), self, requires_grad=self.enabled)

    def const(self, value) -> Var:
        return Var(np.asarray(value, dtype=float), self, requires_grad=False)

    def backward(self, out: Var, seed=None) -> None:
        if not self.enabled:
            raise RuntimeError("backward() on a disabled tape")
        out.grad = np.ones_like(out.value) if seed is None else np.asarray(seed, dtype=float)
        for fn in reversed(self._backward):
            fn()
        self._backward.clear()

    def __len__(self):
        return len(self._backward)


def _wrap(x, tape: Tape) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=float), tape)


def _accum(v: Var, g) -> None:
    if not v.requires_grad:
        return
    if v.grad is None:
        v.grad = np.array(g, dtype=float, copy=True)
    else:
        v.grad = v.grad + g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _node(value, tape: Tape, parents, backward) -> Var:
    needs = tape.enabled and any(p.requires_grad for p in parents)
    out = Var(value, tape, requires_grad=needs)
    if needs:
        def fn():
            if out.grad is not None:
                backward(out.grad)
        tape._backward.append(fn)
    return out


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("at least one operand must be a Var")


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _wrap(a, tape), _wrap(b, tape)

    def bw(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))
    return _node(a.value + b.value, tape, (a, b), bw)


def sub(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _wrap(a, tape), _wrap(b, tape)

    def bw(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(-g, b.value.shape))
    return _node(a.value - b.value, tape, (a, b), bw)


def mul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = _wrap(a, tape), _wrap(b, tape)

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.value, a.value.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.value, b.value.shape))
    return _node(a.value * b.value, tape, (a, b), bw)


def scale(a: Var, c: float) -> Var:
    return _node(a.value * c, a.tape, (a,), lambda g: _accum(a, g * c))


def matmul(a, b) -> Var:
    """Matrix product over the last two axes; leading axes must agree exactly."""
    tape = _tape_of(a, b)
    a, b = _wrap(a, tape), _wrap(b, tape)
    av, bv = a.value, b.value

    def bw(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(bv, -1, -2) if bv.ndim > 1 else np.multiply.outer(g, bv)
            _accum(a, _unbroadcast(ga, av.shape))
        if b.requires_grad:
            if bv.ndim == 1:
                gb = np.swapaxes(av, -1, -2) @ g if av.ndim > 1 else av * g
            else:
                gb = np.swapaxes(av, -1, -2) @ g
            _accum(b, _unbroadcast(gb, bv.shape))
    return _node(av @ bv, tape, (a, b), bw)


# ------------------------------------------------------------- elementwise

def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return _node(y, a.tape, (a,), lambda g: _accum(a, g * (1.0 - y * y)))


def sigmoid(a: Var) -> Var:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _node(y, a.tape, (a,), lambda g: _accum(a, g * y * (1.0 - y)))


def exp(a: Var) -> Var:
    y = np.exp(a.value)
    return _node(y, a.tape, (a,), lambda g: _accum(a, g * y))


def log(a: Var) -> Var:
    x = a.value
    return _node(np.log(x), a.tape, (a,), lambda g: _accum(a, g / x))


# ------------------------------------------------------------------ shapes

def concat(xs, axis: int = -1) -> Var:
    tape = _tape_of(*xs)
    xs = [_wrap(x, tape) for x in xs]
    sizes = [x.value.shape[axis] for x in xs]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            if x.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                _accum(x, g[tuple(sl)])
    return _node(np.concatenate([x.value for x in xs], axis=axis), tape, xs, bw)


def broadcast_rows(v: Var, n: int) -> Var:
    """Tile a vector of width d into an (n, d) matrix."""
    return _node(np.broadcast_to(v.value, (n,) + v.value.shape).copy(), v.tape, (v,),
                 lambda g: _accum(v, g.sum(axis=0)))


def reshape(a: Var, shape) -> Var:
    old = a.value.shape
    return _node(a.value.reshape(shape), a.tape, (a,), lambda g: _accum(a, g.reshape(old)))


def transpose(a: Var, axes) -> Var:
    inv = np.argsort(axes)
    return _node(np.transpose(a.value, axes), a.tape, (a,),
                 lambda g: _accum(a, np.transpose(g, inv)))


def getitem(a: Var, idx) -> Var:
    shape = a.value.shape

    def bw(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        _accum(a, full)
    return _node(a.value[idx], a.tape, (a,), bw)


def take_rows(a: Var, rows) -> Var:
    rows = np.asarray(rows, dtype=int)
    return getitem(a, rows)


def pick(a: Var, rows, cols) -> Var:
    """Gather a[rows[i], cols[i]] into a vector."""
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    return getitem(a, (rows, cols))


def where_rows(mask, a: Var, b: Var) -> Var:
    """Row i from ``a`` where mask[i] else from ``b``; unselected rows are copied bit-exactly."""
    mask = np.asarray(mask, dtype=bool)
    m = mask[:, None]
    out = np.where(m, a.value, b.value)

    def bw(g):
        if a.requires_grad:
            _accum(a, np.where(m, g, 0.0))
        if b.requires_grad:
            _accum(b, np.where(m, 0.0, g))
    return _node(out, a.tape, (a, b), bw)


# -------------------------------------------------------------- reductions

def sum(a: Var, axis=None) -> Var:  # noqa: A001 - mirrors numpy
    shape = a.value.shape

    def bw(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, shape))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g, axis), shape))
    return _node(np.sum(a.value, axis=axis), a.tape, (a,), bw)


def softmax(a: Var, mask=None) -> Var:
    """Softmax along the last axis; ``mask`` False entries get probability exactly 0."""
    x = a.value
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    x = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(x)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        _accum(a, y * (g - (g * y).sum(axis=-1, keepdims=True)))
    return _node(y, a.tape, (a,), bw)


def log_softmax(a: Var, mask=None) -> Var:
    """Log-softmax along the last axis; masked entries are -inf and receive no gradient."""
    x = a.value
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    mx = np.max(x, axis=-1, keepdims=True)
    z = x - mx
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    p = np.exp(y)

    def bw(g):
        gg = np.where(np.isfinite(y), g, 0.0)
        _accum(a, gg - p * gg.sum(axis=-1, keepdims=True))
    return _node(y, a.tape, (a,), bw)


def layer_norm(a: Var, gain: Var, bias: Var, eps: float = 1e-5) -> Var:
    x = a.value
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xh = xc * inv
    out = xh * gain.value + bias.value
    n = x.shape[-1]

    def bw(g):
        if gain.requires_grad:
            _accum(gain, _unbroadcast(g * xh, gain.value.shape))
        if bias.requires_grad:
            _accum(bias, _unbroadcast(g, bias.value.shape))
        if a.requires_grad:
            gx = g * gain.value
            _accum(a, inv / n * (n * gx - gx.sum(axis=-1, keepdims=True)
                                  - xh * (gx * xh).sum(axis=-1, keepdims=True)))
    return _node(out, a.tape, (a, gain, bias), bw)
