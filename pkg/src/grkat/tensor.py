"""Dense row-major tensors with reverse-mode automatic differentiation.

The tape is the implicit graph of recorded primitives: every op that
touches a gradient-requiring tensor stores its parents and an adjoint
closure, and ``backward`` replays those closures in reverse topological
order.  Only the op set the transformer needs is provided; reference
precision is float64.

Tensors are treated as immutable after construction.  A single graph is
single-threaded; independent graphs can live on independent threads.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .errors import ConfigError, ShapeError

_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, dtype=np.float64, name=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    # operator sugar
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, _as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out: Tensor, parents, backward_fn):
    if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = any(p.requires_grad for p in parents) or any(
            p._parents for p in parents
        )
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if not (t.requires_grad or t._parents):
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad = t.grad + g


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient over axes that were broadcast in the forward op."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor):
    """Populate gradients of every recorded tensor reachable from loss."""
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _record(out, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)

    def bwd(g):
        _accumulate(a, -g)

    return _record(out, (a,), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, neg(b))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _record(out, (a, b), bwd)


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s)

    def bwd(g):
        _accumulate(a, g * s)

    return _record(out, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ShapeError(
            f"matmul inner dims differ: {a.data.shape} x {b.data.shape}"
        )
    out = Tensor(np.matmul(a.data, b.data))

    def bwd(g):
        bt = np.swapaxes(b.data, -1, -2) if b.data.ndim > 1 else b.data[None, :]
        at = np.swapaxes(a.data, -1, -2) if a.data.ndim > 1 else a.data[None, :]
        ga = np.matmul(g, bt) if b.data.ndim > 1 else np.outer(g, b.data)
        gb = np.matmul(at, g)
        _accumulate(a, _unbroadcast(ga, a.data.shape))
        _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _record(out, (a, b), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))

    def bwd(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _record(out, (a,), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    out = Tensor(np.transpose(a.data, axes))
    inverse = np.argsort(axes)

    def bwd(g):
        _accumulate(a, np.transpose(g, inverse))

    return _record(out, (a,), bwd)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out = Tensor(a.data[index])

    def bwd(g):
        full = np.zeros_like(a.data)
        full[index] = g
        _accumulate(a, full)

    return _record(out, (a,), bwd)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims))
    count = a.data.size if axis is None else a.data.shape[axis]

    def bwd(g):
        if axis is None:
            _accumulate(a, np.full_like(a.data, g / count))
        else:
            g_exp = g if keepdims else np.expand_dims(g, axis)
            _accumulate(a, np.broadcast_to(g_exp, a.data.shape) / count)

    return _record(out, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))

    def bwd(g):
        _accumulate(a, g * (a.data > 0))

    return _record(out, (a,), bwd)


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    out = Tensor(x * cdf)

    def bwd(g):
        pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        _accumulate(a, g * (cdf + x * pdf))

    return _record(out, (a,), bwd)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)

    def bwd(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        _accumulate(a, s * (g - dot))

    return _record(out, (a,), bwd)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if eps <= 0:
        raise ConfigError("layer_norm eps must be positive")
    d = x.data.shape[-1]
    if gamma.data.shape != (d,) or beta.data.shape != (d,):
        raise ShapeError("layer_norm affine parameters must have shape (D,)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = Tensor(xhat * gamma.data + beta.data)

    def bwd(g):
        lead = tuple(range(g.ndim - 1))
        _accumulate(beta, g.sum(axis=lead))
        _accumulate(gamma, (g * xhat).sum(axis=lead))
        dxhat = g * gamma.data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        _accumulate(x, dx)

    return _record(out, (x, gamma, beta), bwd)


def softmax_attention(q: Tensor, k: Tensor, v: Tensor, heads: int) -> Tensor:
    """Multi-head scaled dot-product attention over [..., T, d] inputs."""
    d = q.data.shape[-1]
    if d % heads != 0:
        raise ConfigError(f"model width {d} not divisible by {heads} heads")
    d_head = d // heads
    squeeze = q.data.ndim == 2
    if squeeze:
        q, k, v = (reshape(t, (1,) + t.data.shape) for t in (q, k, v))
    batch, tokens, _ = q.data.shape

    def split(t):
        return transpose(reshape(t, (batch, tokens, heads, d_head)), (0, 2, 1, 3))

    qh, kh, vh = split(q), split(k), split(v)
    scores = scale(matmul(qh, transpose(kh, (0, 1, 3, 2))), 1.0 / math.sqrt(d_head))
    attn = softmax(scores, axis=-1)
    out = matmul(attn, vh)
    out = reshape(transpose(out, (0, 2, 1, 3)), (batch, tokens, d))
    if squeeze:
        out = reshape(out, (tokens, d))
    return out


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy; labels are integer class indices."""
    labels = np.asarray(labels)
    if logits.data.ndim != 2 or labels.shape != (logits.data.shape[0],):
        raise ShapeError("cross_entropy expects [B, C] logits and [B] labels")
    b = logits.data.shape[0]
    zmax = logits.data.max(axis=1, keepdims=True)
    z = logits.data - zmax
    lse = np.log(np.exp(z).sum(axis=1)) + zmax[:, 0]
    picked = logits.data[np.arange(b), labels]
    out = Tensor(np.mean(lse - picked))

    def bwd(g):
        probs = np.exp(z)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[np.arange(b), labels] -= 1.0
        _accumulate(logits, g * probs / b)

    return _record(out, (logits,), bwd)


def mse(pred: Tensor, target: np.ndarray) -> Tensor:
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ShapeError("mse operands must share a shape")
    diff = pred.data - target
    out = Tensor(np.mean(diff * diff))

    def bwd(g):
        _accumulate(pred, g * 2.0 * diff / diff.size)

    return _record(out, (pred,), bwd)
