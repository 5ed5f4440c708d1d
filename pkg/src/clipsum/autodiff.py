"""Minimal define-by-run reverse-mode autodiff over dense float64 arrays.

Every operation returns a new :class:`Tensor`. When any input requires a
gradient the result remembers its inputs and a closure that maps the output
gradient to input gradients. Node ids increase monotonically, so sorting the
reachable nodes by id gives a valid topological order for the backward pass.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Sequence

import numpy as np

_ids = itertools.count()


class ShapeError(ValueError):
    """Raised when operand shapes are invalid for an operation."""

    def __init__(self, kind: str, *shapes):
        self.kind = kind
        self.shapes = shapes
        joined = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{kind}: incompatible shapes {joined}")


class Tensor:
    """A float64 array that can take part in gradient computation."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_ids)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.kind = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __len__(self):
        return len(self.data)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        if np.isscalar(other):
            return scalar_mul(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return scalar_mul(self, 1.0 / other)
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(as_tensor(other), self)

    def __getitem__(self, index):
        return take(self, index)


class Parameter(Tensor):
    """Trainable tensor carrying its gradient accumulator and Adam moments."""

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data, kind, parents, backward_fn) -> Tensor:
    out = Tensor(out_data)
    out.kind = kind
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(kind, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(kind, a.shape, b.shape) from None


# ---------------------------------------------------------------------------
# elementwise and linear ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(a.data + b.data, "add", (a, b), backward)


def neg(a) -> Tensor:
    return scalar_mul(a, -1.0)


def sub(a, b) -> Tensor:
    return add(a, neg(as_tensor(b)))


def mul(a, b) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record(a.data * b.data, "mul", (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    out = a.data / b.data

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * out / b.data, b.shape),
        )

    return _record(out, "div", (a, b), backward)


def scalar_mul(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _record(a.data * c, "scalar-mul", (a,), lambda g: (g * c,))


def exp(a) -> Tensor:
    """Elementwise exponential.

    Inputs are used as given; callers that need overflow protection should
    shift by the maximum first (``softmax`` and ``logsumexp`` do this).
    """
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record(out, "exp", (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _record(np.log(a.data), "log", (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _record(out, "sqrt", (a,), lambda g: (g * 0.5 / out,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    # np.maximum propagates NaN, so a poisoned input still surfaces as a non-finite loss
    return _record(np.maximum(a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _record(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0 or a.ndim > 2 or b.ndim > 2:
        raise ShapeError("matmul", a.shape, b.shape)
    if a.shape[-1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    out = a.data @ b.data

    def backward(g):
        A = a.data if a.ndim == 2 else a.data[None, :]
        B = b.data if b.ndim == 2 else b.data[:, None]
        G = g.reshape(A.shape[0], B.shape[1])
        ga = (G @ B.T).reshape(a.shape)
        gb = (A.T @ G).reshape(b.shape)
        return ga, gb

    return _record(out, "matmul", (a, b), backward)


def inner(a, b) -> Tensor:
    """Sum of the elementwise product of two same-shaped tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError("inner-product", a.shape, b.shape)
    out = np.array(np.sum(a.data * b.data))
    return _record(out, "inner-product", (a, b), lambda g: (g * b.data, g * a.data))


# ---------------------------------------------------------------------------
# reductions


def _expand(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)
    return _record(
        out, "sum", (a,), lambda g: (_expand(g, a.shape, axis, keepdims).copy(),)
    )


def mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    out = np.mean(a.data, axis=axis, keepdims=keepdims)
    return _record(
        out, "mean", (a,), lambda g: (_expand(g, a.shape, axis, keepdims) / count,)
    )


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    if a.ndim == 0 or a.shape[axis] == 0:
        raise ShapeError("softmax-over-axis", a.shape)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _record(out, "softmax-over-axis", (a,), backward)


def logsumexp(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    if a.size == 0:
        raise ShapeError("logsumexp", a.shape)
    m = np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out_keep = m + np.log(s)
    out = out_keep if axis is None else np.squeeze(out_keep, axis=axis)
    if axis is None:
        out = out.reshape(())
    weights = e / s

    def backward(g):
        g = np.asarray(g)
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (g * weights,)

    return _record(out, "logsumexp", (a,), backward)


# ---------------------------------------------------------------------------
# structural ops


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(np.atleast_1d(shape))) from None
    return _record(out, "reshape", (a,), lambda g: (g.reshape(a.shape),))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.T, "transpose", (a,), lambda g: (g.T,))


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[t.shape for t in tensors]) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _record(out, "concat", tuple(tensors), backward)


def slice_window(a, start: int, length: int, axis: int = -1) -> Tensor:
    """Contiguous slice ``[start, start + length)`` along ``axis``."""
    a = as_tensor(a)
    ax = axis % a.ndim
    if start < 0 or length < 0 or start + length > a.shape[ax]:
        raise ShapeError("slice-window", a.shape, (start, length))
    index = [slice(None)] * a.ndim
    index[ax] = slice(start, start + length)
    index = tuple(index)

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _record(a.data[index], "slice-window", (a,), backward)


def take(a, index) -> Tensor:
    """Basic or fancy indexing; repeated indices accumulate in backward."""
    a = as_tensor(a)
    try:
        out = a.data[index]
    except IndexError:
        raise ShapeError("take", a.shape, np.shape(index)) from None

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _record(np.array(out), "take", (a,), backward)


# ---------------------------------------------------------------------------
# backward pass and optimizer


def _topo(root: Tensor) -> list[Tensor]:
    seen = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if node.node_id in seen or not node.requires_grad:
            continue
        seen[node.node_id] = node
        stack.extend(node._parents)
    return sorted(seen.values(), key=lambda n: n.node_id, reverse=True)


def backward(root: Tensor, accumulate: bool = False) -> dict[int, np.ndarray]:
    """Propagate d(root)/d(leaf) into every reachable leaf that requires grad.

    Leaf ``grad`` attributes are reset first unless ``accumulate`` is set.
    Returns a mapping from leaf ``node_id`` to its gradient.
    """
    if root.size != 1:
        raise ShapeError("backward", root.shape)
    order = _topo(root)
    leaves = [n for n in order if n._backward is None]
    if not accumulate:
        for leaf in leaves:
            leaf.grad = np.zeros_like(leaf.data)
    grads = {root.node_id: np.ones_like(root.data)}
    for node in order:
        g = grads.pop(node.node_id, None)
        if g is None:
            continue
        if node._backward is None:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad = node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.node_id in grads:
                grads[parent.node_id] = grads[parent.node_id] + pg
            else:
                grads[parent.node_id] = np.asarray(pg, dtype=np.float64)
    return {leaf.node_id: leaf.grad for leaf in leaves}


def adam_step(
    params: Iterable[Parameter],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update applied in place."""
    for p in params:
        if p.grad.shape != p.data.shape:
            raise ShapeError("adam_step", p.data.shape, p.grad.shape)
        p.step += 1
        p.m = beta1 * p.m + (1.0 - beta1) * p.grad
        p.v = beta2 * p.v + (1.0 - beta2) * p.grad**2
        m_hat = p.m / (1.0 - beta1**p.step)
        v_hat = p.v / (1.0 - beta2**p.step)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


def numerical_gradient(fn: Callable[[], float], x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``fn`` with respect to the array ``x``.

    ``x`` is perturbed in place and restored afterwards.
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn()
        flat[i] = orig - step
        down = fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / denom))


def check_gradients(build: Callable[[], Tensor], params: Sequence[Tensor], step: float = 1e-5) -> float:
    """Compare backprop against central differences for ``params``.

    ``build`` must recompute the scalar output from the current parameter
    values. Returns the worst relative error over all parameter entries.
    """
    out = build()
    backward(out)
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        numeric = numerical_gradient(lambda: build().item(), p.data, step)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def is_finite(t: Tensor) -> bool:
    return bool(np.all(np.isfinite(t.data)))


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))
