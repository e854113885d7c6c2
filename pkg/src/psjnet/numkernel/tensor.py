"""Define-by-run reverse-mode autodiff over dense float64 arrays.

A :class:`Tape` records every primitive applied to tensors that (transitively)
depend on a registered parameter.  Nodes are appended in creation order, so
walking the list backwards is a valid reverse topological order.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import RankError, ShapeError
from . import _backend

__all__ = [
    "Tape",
    "Tensor",
    "backward",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "softmax",
    "log_softmax",
    "concat",
    "stack",
    "sum",
    "mean",
    "max",
    "getitem",
    "reshape",
    "transpose",
    "gru_sequence",
    "gated_split_scan",
    "forward_primitive",
]


class Tensor:
    __slots__ = ("data", "grad", "tape", "parents", "backward_fn", "requires_grad", "op", "name")

    def __init__(self, data, tape, requires_grad=False, op="leaf", name=None):
        self.data = data
        self.tape = tape
        self.requires_grad = requires_grad
        self.op = op
        self.name = name
        self.grad = None
        self.parents = ()
        self.backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        label = self.name or self.op
        return f"Tensor({label}, shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return transpose(self)


class Tape:
    """Ordered record of primitive applications plus a named parameter registry.

    With ``record=False`` nothing is recorded and no closures are built, which
    is what evaluation and finite-difference probes want.
    """

    def __init__(self, record=True):
        self.record = record
        self.nodes = []
        self.params = {}

    def param(self, name, value):
        arr = np.asarray(value, dtype=np.float64)
        t = Tensor(arr, self, requires_grad=self.record, op="param", name=name)
        self.params[name] = t
        return t

    def const(self, value):
        if isinstance(value, Tensor):
            return value
        return Tensor(np.asarray(value, dtype=np.float64), self)

    def zeros(self, shape):
        return Tensor(np.zeros(shape), self)

    def backward(self, loss):
        return backward(self, loss)

    def release(self):
        """Drop the recorded graph so activations are freed without waiting
        for the cycle collector (tensors point back at their tape)."""
        for node in self.nodes:
            node.parents = ()
            node.backward_fn = None
            node.grad = None
        self.nodes.clear()
        self.params.clear()


def backward(tape, loss):
    """Populate ``.grad`` on every node reachable from ``loss``.

    Returns ``{param name: gradient}``; registered parameters that do not
    influence the loss get zero arrays.
    """
    if loss.data.size != 1 or loss.data.ndim > 1:
        raise RankError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    for node in tape.nodes:
        node.grad = None
    for p in tape.params.values():
        p.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        g = node.grad
        if g is None:
            continue
        grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = pg
            else:
                parent.grad = parent.grad + pg
    return {
        name: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for name, p in tape.params.items()
    }


# --------------------------------------------------------------------------
# helpers


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Tensor):
            return x.tape
    raise TypeError("at least one operand must be a Tensor")


def _lift(tape, x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64), tape)


def _emit(data, parents, backward_fn, op):
    tape = parents[0].tape
    needs = tape.record and any(p.requires_grad for p in parents)
    out = Tensor(data, tape, requires_grad=needs, op=op)
    if needs:
        out.parents = parents
        out.backward_fn = backward_fn
        tape.nodes.append(out)
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    nd = g.ndim - len(shape)
    if nd > 0:
        g = g.sum(axis=tuple(range(nd)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# --------------------------------------------------------------------------
# elementwise


def _binary(op, fn, a, b):
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    try:
        out = fn(a.data, b.data)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None
    return a, b, out


def add(a, b):
    a, b, out = _binary("add", np.add, a, b)
    sa, sb = a.data.shape, b.data.shape
    return _emit(out, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b):
    a, b, out = _binary("sub", np.subtract, a, b)
    sa, sb = a.data.shape, b.data.shape
    return _emit(out, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b):
    a, b, out = _binary("mul", np.multiply, a, b)
    ad, bd = a.data, b.data

    def bw(g):
        return (
            _unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return _emit(out, (a, b), bw, "mul")


def div(a, b):
    a, b, out = _binary("div", np.divide, a, b)
    ad, bd = a.data, b.data

    def bw(g):
        return (
            _unbroadcast(g / bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None,
        )

    return _emit(out, (a, b), bw, "div")


def neg(a):
    return _emit(-a.data, (a,), lambda g: (-g,), "neg")


def sigmoid(a):
    s = expit(a.data)
    return _emit(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(a):
    t = np.tanh(a.data)
    return _emit(t, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def exp(a):
    e = np.exp(a.data)
    return _emit(e, (a,), lambda g: (g * e,), "exp")


def log(a):
    x = a.data
    return _emit(np.log(x), (a,), lambda g: (g / x,), "log")


# --------------------------------------------------------------------------
# linear algebra


BLOCK = 64


def _pad_to(x, axis, size):
    n = x.shape[axis]
    if n == size:
        return x
    shape = list(x.shape)
    shape[axis] = size
    out = np.zeros(shape)
    index = [slice(None)] * x.ndim
    index[axis] = slice(0, n)
    out[tuple(index)] = x
    return out


def blocked_matmul(a, b, tile_contraction=False):
    """``np.matmul`` evaluated as a sequence of fixed-shape BLAS calls.

    Rows are cut into zero-padded ``BLOCK``-row tiles, so every BLAS call has
    the same row count and an output row never depends on how many other
    rows the operand happens to carry (BLAS kernels pick different blocking
    for different sizes).  With ``tile_contraction`` the inner axis is tiled
    the same way and partial products are accumulated left to right, which
    makes trailing zero terms exact no-ops; use it when the contraction runs
    over a padded, data-dependent axis.
    """
    vec_a, vec_b = a.ndim == 1, b.ndim == 1
    A = a[None, :] if vec_a else a
    Bm = b[:, None] if vec_b else b
    batch = np.broadcast_shapes(A.shape[:-2], Bm.shape[:-2])
    M, K = A.shape[-2:]
    N = Bm.shape[-1]
    if Bm.ndim == 2:
        # plain weight matrix: all leading dims of A become rows
        rows = A.reshape(int(np.prod(A.shape[:-1])), K)
        out = _tiled(rows, Bm, tile_contraction).reshape(A.shape[:-1] + (N,))
    else:
        out = _tiled(A, Bm, tile_contraction)
        if out.shape[:-2] != batch:
            out = np.broadcast_to(out, batch + (M, N)).copy()
    if vec_a:
        out = out[..., 0, :]
    if vec_b:
        out = out[..., 0]
    return out


def _tiled(A, Bm, tile_contraction):
    M, K = A.shape[-2:]
    N = Bm.shape[-1]
    batch = np.broadcast_shapes(A.shape[:-2], Bm.shape[:-2])
    out = np.zeros(batch + (M, N))
    if K == 0:
        return out
    step = BLOCK if tile_contraction else K
    for k0 in range(0, K, step):
        a_k = A[..., k0 : k0 + step]
        b_k = Bm[..., k0 : k0 + step, :]
        if tile_contraction:
            a_k = _pad_to(a_k, -1, BLOCK)
            b_k = _pad_to(b_k, -2, BLOCK)
        for r0 in range(0, M, BLOCK):
            r1 = min(r0 + BLOCK, M)
            part = np.matmul(_pad_to(a_k[..., r0:r1, :], -2, BLOCK), b_k)
            out[..., r0:r1, :] += part[..., : r1 - r0, :]
    return out


def matmul(a, b, tile_contraction=False):
    tape = _tape_of(a, b)
    a, b = _lift(tape, a), _lift(tape, b)
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0:
        raise ShapeError(f"matmul: scalar operand, shapes {ad.shape} and {bd.shape}")
    k_a = ad.shape[-1]
    k_b = bd.shape[0] if bd.ndim == 1 else bd.shape[-2]
    if k_a != k_b:
        raise ShapeError(f"matmul: inner dimensions differ, shapes {ad.shape} and {bd.shape}")
    try:
        out = blocked_matmul(ad, bd, tile_contraction)
    except ValueError:
        raise ShapeError(f"matmul: batch dimensions differ, shapes {ad.shape} and {bd.shape}") from None

    def bw(g):
        a2 = ad[None, :] if ad.ndim == 1 else ad
        b2 = bd[:, None] if bd.ndim == 1 else bd
        g2 = g
        if ad.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if bd.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        ga = gb = None
        if a.requires_grad:
            ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
            if ad.ndim == 1:
                ga = ga[..., 0, :]
            ga = _unbroadcast(ga, ad.shape)
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
            if bd.ndim == 1:
                gb = gb[..., 0]
            gb = _unbroadcast(gb, bd.shape)
        return ga, gb

    return _emit(out, (a, b), bw, "matmul")


# --------------------------------------------------------------------------
# normalisers


def _ordered_sum(x, axis):
    # strictly left-to-right accumulation: trailing exact zeros (masked
    # entries) leave the result bit-identical, unlike pairwise summation
    return np.take(np.cumsum(x, axis=axis), [-1], axis=axis)


def softmax(a, axis=-1):
    """Softmax along ``axis`` with max subtraction.

    The normaliser is summed in index order, so padding with ``-inf``-like
    masked logits does not change the unmasked probabilities by even one ulp.
    """
    x = a.data
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    s = e / _ordered_sum(e, axis)

    def bw(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _emit(s, (a,), bw, "softmax")


def log_softmax(a, axis=-1):
    x = a.data
    shifted = x - x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _emit(out, (a,), bw, "log_softmax")


# --------------------------------------------------------------------------
# structural


def concat(tensors, axis=-1):
    tape = _tape_of(*tensors)
    tensors = tuple(_lift(tape, t) for t in tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.data.shape for t in tensors]
        raise ShapeError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
    bounds = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _emit(out, tensors, bw, "concat")


def stack(tensors, axis=0):
    tape = _tape_of(*tensors)
    tensors = tuple(_lift(tape, t) for t in tensors)
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.data.shape for t in tensors]
        raise ShapeError(f"stack: incompatible shapes {shapes}") from None

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _emit(out, tensors, bw, "stack")


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    shape = a.data.shape
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _emit(np.asarray(out), (a,), bw, "sum")


def mean(a, axis=None, keepdims=False):
    shape = a.data.shape
    n = a.data.size if axis is None else np.prod([shape[i] for i in np.atleast_1d(axis)])
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, shape).copy(),)

    return _emit(np.asarray(out), (a,), bw, "mean")


def max(a, axis=-1, keepdims=False):  # noqa: A001 - mirrors numpy
    """Maximum along one axis; the gradient goes to the first maximiser."""
    x = a.data
    idx = np.expand_dims(x.argmax(axis=axis), axis)
    out = np.take_along_axis(x, idx, axis=axis)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        z = np.zeros_like(x)
        np.put_along_axis(z, idx, g, axis=axis)
        return (z,)

    return _emit(out, (a,), bw, "max")


def _is_basic(key):
    if not isinstance(key, tuple):
        key = (key,)
    return all(k is None or k is Ellipsis or isinstance(k, (int, np.integer, slice)) for k in key)


def getitem(a, key):
    x = a.data
    try:
        out = x[key]
    except IndexError as exc:
        raise ShapeError(f"slice: {exc} for shape {x.shape}") from None
    basic = _is_basic(key)

    def bw(g):
        z = np.zeros_like(x)
        if basic:
            z[key] = g
        else:
            np.add.at(z, key, g)
        return (z,)

    if basic:
        out = np.array(out, dtype=np.float64)
    return _emit(out, (a,), bw, "slice")


def reshape(a, shape):
    src = a.data.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {src} into {shape}") from None
    return _emit(out, (a,), lambda g: (g.reshape(src),), "reshape")


def transpose(a, axes=None):
    out = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)
    return _emit(out, (a,), lambda g: (np.transpose(g, inv),), "transpose")


# --------------------------------------------------------------------------
# fused recurrent kernel


def gru_sequence(x, h0, w_z, w_r, w_h):
    """Run a bias-free GRU over a time-major batch.

    ``x`` is (T, B, n); ``h0`` is (B, d) or None for zeros; each weight is
    (d, n + d) and acts on the column ``[x_t; h_{t-1}]``.  Returns the stacked
    states (T, B, d).  Forward and backward go through the active kernel
    backend (compiled when available).
    """
    tape = _tape_of(x, w_z)
    T, B, n = x.data.shape
    d = w_z.data.shape[0]
    for w in (w_z, w_r, w_h):
        if w.data.shape != (d, n + d):
            raise ShapeError(f"gru: weight shape {w.data.shape} does not match input {x.data.shape} and hidden {d}")
    if h0 is None:
        h0 = Tensor(np.zeros((B, d)), tape)
    elif h0.data.shape != (B, d):
        raise ShapeError(f"gru: initial state shape {h0.data.shape}, expected {(B, d)}")
    kern = _backend.active()
    H, cache = kern.gru_forward(x.data, h0.data, w_z.data, w_r.data, w_h.data)

    def bw(g):
        return kern.gru_backward(np.ascontiguousarray(g), cache)

    return _emit(H, (x, h0, w_z, w_r, w_h), bw, "gru")


def gated_split_scan(base_f, base_h, role_f, role_h, u_f, u_h, normalized):
    """Fused recurrence of the role-gated split over a source sequence.

    ``base_f``/``base_h`` (L, B, d) hold the recurrence-free gate and candidate
    pre-activations, ``role_f``/``role_h`` (K, d) the role-embedding terms and
    ``u_f``/``u_h`` (d, d) the recurrent weights applied to the previous
    output.  With ``normalized=False`` each role mixes its candidate with the
    shared previous output and the roles are averaged, giving (L, B, d).
    With ``normalized=True`` each role keeps its own previous output, a
    role-free inheritance gate joins the role gates and all K + 1 gates are
    divided by their element-wise sum, giving (K, L, B, d).
    """
    from ..errors import NormalizationError

    L, B, d = base_f.data.shape
    if base_h.data.shape != (L, B, d) or role_f.data.shape[1:] != (d,) or role_h.data.shape != role_f.data.shape:
        raise ShapeError(f"split scan: inconsistent shapes {base_f.shape}, {base_h.shape}, {role_f.shape}, {role_h.shape}")
    if role_f.data.shape[0] < 1:
        raise ShapeError("split scan: need at least one role")
    kern = _backend.active()
    args = [np.ascontiguousarray(t.data) for t in (base_f, base_h, role_f, role_h, u_f, u_h)]
    if normalized:
        out, cache = kern.split_forward(*args)
        if out is None:
            raise NormalizationError("all gates vanish at some coordinate")
        backward_kernel = kern.split_backward
    else:
        out, cache = kern.sbj_forward(*args)
        backward_kernel = kern.sbj_backward

    def bw(g):
        return backward_kernel(np.ascontiguousarray(g), cache)

    return _emit(out, (base_f, base_h, role_f, role_h, u_f, u_h), bw, "split_scan")


_PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "elementwise-mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "softmax": softmax,
    "concat": lambda *xs, axis=-1: concat(xs, axis=axis),
    "mean": mean,
    "max": max,
    "max-over-axis": max,
    "slice": getitem,
}


def forward_primitive(op, *inputs, **kwargs):
    """Apply a primitive by name (``matmul``, ``softmax``, ``slice`` ...)."""
    try:
        fn = _PRIMITIVES[op]
    except KeyError:
        raise ValueError(f"unknown primitive {op!r}") from None
    return fn(*inputs, **kwargs)
