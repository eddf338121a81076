"""Dense tensors with reverse-mode automatic differentiation.

Values are numpy arrays, float32 by default (training mode) and float64
under ``precision(64)`` (verification mode).  Backward walks a
deterministic topological order, so repeated runs accumulate gradients
bitwise identically.  Every operator with a custom backward registers its
name in ``OP_REGISTRY``; the verification suite refuses ops without a
gradcheck entry.

Elementwise ops broadcast only over leading extents: shapes must be equal,
or one must be a trailing suffix of the other (scalars included).
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .kernels import scatter_add_rows


class ShapeError(ValueError):
    """Operand shapes do not conform."""


_DEFAULT_DTYPE = np.dtype(np.float32)
_GRAD_ENABLED = True

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


def default_dtype():
    return _DEFAULT_DTYPE


def set_default_dtype(dtype):
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in _FLOAT_DTYPES:
        raise ValueError(f"default dtype must be float32 or float64, got {dt}")
    _DEFAULT_DTYPE = dt


@contextmanager
def precision(bits):
    """Temporarily select the working precision: 64 for verification, 32 for training."""
    if bits not in (32, 64):
        raise ValueError(f"precision must be 32 or 64, got {bits}")
    global _DEFAULT_DTYPE
    prev = _DEFAULT_DTYPE
    _DEFAULT_DTYPE = np.dtype(np.float64 if bits == 64 else np.float32)
    try:
        yield
    finally:
        _DEFAULT_DTYPE = prev


def grad_enabled():
    return _GRAD_ENABLED


@contextmanager
def no_grad():
    """Disable graph recording (inference / benchmarking fast path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


# name -> one-line contract; the gradcheck suite must cover every entry
OP_REGISTRY: dict[str, str] = {}


def _register(name, doc):
    OP_REGISTRY[name] = doc


class Tensor:
    """A numpy array plus an optional gradient and a backward rule."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(np.dtype(dtype), copy=False)
        elif arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(_DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.data.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {self.shape}")
        topo = _toposort(self)
        if self.grad is None:
            self.grad = np.ones_like(self.data)
        else:
            self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # arithmetic sugar; scalars and arrays lift to constant tensors
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_lift(other, self.dtype), self)

    def __sub__(self, other):
        return add(self, neg(_lift(other, self.dtype)))

    def __rsub__(self, other):
        return add(_lift(other, self.dtype), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_lift(other, self.dtype), self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not a primitive; use pow")
        return scale(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


def _lift(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else _DEFAULT_DTYPE))


def _toposort(root):
    # iterative DFS, children visited in parent-tuple order: deterministic
    topo = []
    visited = set()
    stack = [(root, 0)]
    while stack:
        node, child_idx = stack.pop()
        if child_idx == 0:
            if id(node) in visited:
                continue
            visited.add(id(node))
        if child_idx < len(node._parents):
            stack.append((node, child_idx + 1))
            child = node._parents[child_idx]
            if id(child) not in visited:
                stack.append((child, 0))
        else:
            topo.append(node)
    return topo


def _from_op(data, parents, backward):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.requires_grad = track
    if track:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    assert g.shape == t.data.shape, f"gradient shape {g.shape} != tensor shape {t.data.shape}"
    if t.grad is None:
        t.grad = np.array(g)
    else:
        t.grad = t.grad + g


def _suffix_broadcastable(sa, sb):
    if sa == sb:
        return True
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    return big[len(big) - len(small):] == small


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    return g.reshape(shape)


def _check_elementwise(a, b, opname):
    if not _suffix_broadcastable(a.shape, b.shape):
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not conform")


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

_register("add", "elementwise sum, leading-extent broadcast")


def add(a, b):
    a, b = _lift(a), _lift(b, a.dtype)
    _check_elementwise(a, b, "add")
    out = _from_op(a.data + b.data, (a, b), None)

    def backward():
        g = out.grad
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


_register("mul", "elementwise product, leading-extent broadcast")


def mul(a, b):
    a, b = _lift(a), _lift(b, a.dtype)
    _check_elementwise(a, b, "mul")
    out = _from_op(a.data * b.data, (a, b), None)

    def backward():
        g = out.grad
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


_register("neg", "elementwise negation")


def neg(a):
    a = _lift(a)
    out = _from_op(-a.data, (a,), None)

    def backward():
        _accum(a, -out.grad)

    out._backward = backward if out.requires_grad else None
    return out


_register("scale", "multiply by a python constant")


def scale(a, c):
    a = _lift(a)
    c = float(c)
    out = _from_op(a.data * c, (a,), None)

    def backward():
        _accum(a, out.grad * c)

    out._backward = backward if out.requires_grad else None
    return out


_register("pow", "elementwise power with constant exponent")


def powi(a, exponent):
    a = _lift(a)
    exponent = float(exponent)
    # np.power on float exponents is slow; special-case the two hot ones
    if exponent == 2.0:
        out = _from_op(a.data * a.data, (a,), None)

        def backward():
            _accum(a, out.grad * (2.0 * a.data))

    elif exponent == -0.5:
        rsqrt = 1.0 / np.sqrt(a.data)
        out = _from_op(rsqrt, (a,), None)

        def backward():
            _accum(a, out.grad * (-0.5 * rsqrt / a.data))

    else:
        out = _from_op(a.data ** exponent, (a,), None)

        def backward():
            _accum(a, out.grad * exponent * a.data ** (exponent - 1.0))

    out._backward = backward if out.requires_grad else None
    return out


_register("matmul", "2-D matrix product")


def matmul(a, b):
    a, b = _lift(a), _lift(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    out = _from_op(a.data @ b.data, (a, b), None)

    def backward():
        g = out.grad
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    out._backward = backward if out.requires_grad else None
    return out


_register("transpose", "2-D transpose")


def transpose(a):
    a = _lift(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a 2-D operand, got {a.shape}")
    out = _from_op(a.data.T, (a,), None)

    def backward():
        _accum(a, out.grad.T)

    out._backward = backward if out.requires_grad else None
    return out


_register("reshape", "view with a new shape")


def reshape(a, shape):
    a = _lift(a)
    shape = tuple(shape)
    out = _from_op(a.data.reshape(shape), (a,), None)

    def backward():
        _accum(a, out.grad.reshape(a.shape))

    out._backward = backward if out.requires_grad else None
    return out


_register("sigmoid", "elementwise logistic function")


def sigmoid(a):
    a = _lift(a)
    x = a.data
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = _from_op(s, (a,), None)

    def backward():
        _accum(a, out.grad * s * (1.0 - s))

    out._backward = backward if out.requires_grad else None
    return out


_register("gelu", "gaussian error linear unit (tanh form)")

_GELU_C = float(np.sqrt(2.0 / np.pi))


def gelu(a):
    a = _lift(a)
    x = a.data
    x2 = x * x
    t = np.tanh(_GELU_C * (x + 0.044715 * (x2 * x)))
    out = _from_op(0.5 * x * (1.0 + t), (a,), None)

    def backward():
        dinner = _GELU_C * (1.0 + 0.134145 * x2)
        local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
        _accum(a, out.grad * local)

    out._backward = backward if out.requires_grad else None
    return out


_register("softmax_lastdim", "softmax over the last axis")


def softmax_lastdim(a):
    a = _lift(a)
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = _from_op(s, (a,), None)

    def backward():
        g = out.grad
        _accum(a, s * (g - (g * s).sum(axis=-1, keepdims=True)))

    out._backward = backward if out.requires_grad else None
    return out


_register("reduce_sum", "sum over all elements or one axis")


def reduce_sum(a, axis=None):
    a = _lift(a)
    if axis is None:
        out = _from_op(np.asarray(a.data.sum()), (a,), None)

        def backward():
            _accum(a, np.broadcast_to(out.grad, a.shape).copy()
                   if a.shape else np.asarray(out.grad))

    else:
        out = _from_op(a.data.sum(axis=axis), (a,), None)

        def backward():
            _accum(a, np.broadcast_to(np.expand_dims(out.grad, axis), a.shape).copy())

    out._backward = backward if out.requires_grad else None
    return out


def mean(a, axis=None):
    a = _lift(a)
    count = a.size if axis is None else a.shape[axis]
    return scale(reduce_sum(a, axis=axis), 1.0 / count)


_register("gather_rows", "select rows by index; backward scatter-adds")


def gather_rows(a, idx):
    a = _lift(a)
    idx = np.ascontiguousarray(idx, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError(f"gather_rows expects a flat index list, got shape {idx.shape}")
    n = a.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"gather_rows: index out of range for {n} rows")
    out = _from_op(a.data[idx], (a,), None)

    def backward():
        g = np.ascontiguousarray(out.grad)
        acc = np.zeros(a.shape, dtype=a.dtype)
        if a.ndim == 1:
            scatter_add_rows(acc.reshape(n, 1), idx, g.reshape(-1, 1))
        else:
            scatter_add_rows(acc, idx, g)
        _accum(a, acc)

    out._backward = backward if out.requires_grad else None
    return out


_register("concat_rows", "stack matrices along axis 0")


def concat_rows(tensors):
    tensors = [_lift(t) for t in tensors]
    out = _from_op(np.concatenate([t.data for t in tensors], axis=0), tuple(tensors), None)

    def backward():
        g = out.grad
        offset = 0
        for t in tensors:
            rows = t.shape[0]
            _accum(t, g[offset:offset + rows])
            offset += rows

    out._backward = backward if out.requires_grad else None
    return out


_register("concat_cols", "stack matrices along axis 1")


def concat_cols(tensors):
    tensors = [_lift(t) for t in tensors]
    out = _from_op(np.concatenate([t.data for t in tensors], axis=1), tuple(tensors), None)

    def backward():
        g = out.grad
        offset = 0
        for t in tensors:
            cols = t.shape[1]
            _accum(t, np.ascontiguousarray(g[:, offset:offset + cols]))
            offset += cols

    out._backward = backward if out.requires_grad else None
    return out


_register("slice_cols", "contiguous column slice of a matrix")


def slice_cols(a, start, stop):
    a = _lift(a)
    if a.ndim != 2:
        raise ShapeError(f"slice_cols expects a 2-D operand, got {a.shape}")
    out = _from_op(np.ascontiguousarray(a.data[:, start:stop]), (a,), None)

    def backward():
        g = np.zeros_like(a.data)
        g[:, start:stop] = out.grad
        _accum(a, g)

    out._backward = backward if out.requires_grad else None
    return out


_register("outer_difference", "a[m] - b[v] for every pair (m, v)")


def outer_difference(a, b):
    a, b = _lift(a), _lift(b)
    if a.ndim != 1 or b.ndim != 1:
        raise ShapeError(f"outer_difference expects vectors, got {a.shape} and {b.shape}")
    out = _from_op(a.data[:, None] - b.data[None, :], (a, b), None)

    def backward():
        g = out.grad
        _accum(a, g.sum(axis=1))
        _accum(b, -g.sum(axis=0))

    out._backward = backward if out.requires_grad else None
    return out


_register("scale_rows", "scale each row of a matrix by a per-row factor")


def scale_rows(a, s):
    a, s = _lift(a), _lift(s)
    if a.ndim != 2 or s.ndim != 1 or s.shape[0] != a.shape[0]:
        raise ShapeError(f"scale_rows: shapes {a.shape} and {s.shape} do not conform")
    out = _from_op(a.data * s.data[:, None], (a, s), None)

    def backward():
        g = out.grad
        _accum(a, g * s.data[:, None])
        _accum(s, (g * a.data).sum(axis=1))

    out._backward = backward if out.requires_grad else None
    return out


_register("straight_through", "hard forward value, identity backward into the soft surrogate")


def straight_through(hard, soft):
    """Forward emits ``hard`` (a constant array); backward treats the op as the
    identity on ``soft``, so gradients are exactly those of the soft surrogate.
    The forward/backward disagreement is the point, and it is explicit here."""
    soft = _lift(soft)
    hard = np.asarray(hard, dtype=soft.dtype)
    if hard.shape != soft.shape:
        raise ShapeError(f"straight_through: shapes {hard.shape} and {soft.shape} differ")
    out = _from_op(hard, (soft,), None)

    def backward():
        _accum(soft, out.grad)

    out._backward = backward if out.requires_grad else None
    return out


_register("cross_entropy_logits", "negative log-softmax probability of the true class")


def cross_entropy_logits(logits, label):
    logits = _lift(logits)
    if logits.ndim != 1:
        raise ShapeError(f"cross_entropy_logits expects a logit vector, got {logits.shape}")
    label = int(label)
    x = logits.data
    m = x.max()
    lse = m + np.log(np.exp(x - m).sum())
    out = _from_op(np.asarray(lse - x[label]), (logits,), None)

    def backward():
        p = np.exp(x - lse)
        p[label] -= 1.0
        _accum(logits, out.grad * p)

    out._backward = backward if out.requires_grad else None
    return out


_register("smooth_l1", "mean Huber-style loss against a constant target")


def smooth_l1(pred, target, beta=1.0):
    pred = _lift(pred)
    target = np.asarray(target, dtype=pred.dtype)
    if target.shape != pred.shape:
        raise ShapeError(f"smooth_l1: shapes {pred.shape} and {target.shape} differ")
    beta = float(beta)
    r = pred.data - target
    absr = np.abs(r)
    vals = np.where(absr < beta, 0.5 * r * r / beta, absr - 0.5 * beta)
    count = max(pred.size, 1)
    out = _from_op(np.asarray(vals.sum() / count), (pred,), None)

    def backward():
        local = np.clip(r / beta, -1.0, 1.0)
        _accum(pred, out.grad * local / count)

    out._backward = backward if out.requires_grad else None
    return out
