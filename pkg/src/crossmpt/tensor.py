"""A small reverse-mode autodiff engine over numpy arrays.

Only the primitives the decoders need are provided. Each primitive computes
its forward value eagerly and records a closure mapping the output gradient
to gradients for its inputs. :meth:`Tensor.backward` walks the recorded
graph in reverse topological order and accumulates into leaf tensors.

Arrays keep their dtype: parameters stored as float32 train in float32,
float64 parameters give float64 gradients (used by :func:`grad_check`).
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, expit

__all__ = [
    "Tensor",
    "no_grad",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "swapaxes",
    "reshape",
    "index",
    "concat",
    "sum",
    "masked_softmax",
    "layer_norm",
    "gelu",
    "sigmoid",
    "bce_with_logits_sum",
    "embed_scale",
    "masked_softmax_attention",
    "grad_check",
    "GradCheckReport",
]

_grad_enabled = True

# python floats keep float32 arrays float32 under numpy's promotion rules
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Back-propagate from this scalar; leaf grads accumulate across calls."""
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar, got shape {self.shape}")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for p, gp in zip(node._parents, node._backward(g)):
                if gp is None or not p.requires_grad:
                    continue
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + gp
                else:
                    grads[id(p)] = gp

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)

    def __neg__(self):
        return scale(self, -1.0)


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise

def add(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    return _node(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(a, c: float) -> Tensor:
    a = _t(a)
    c = float(c)
    return _node(a.data * c, (a,), lambda g: (g * c,))


def embed_scale(values, table) -> Tensor:
    """Row-wise scaling: out[..., i, :] = values[..., i] * table[i, :]."""
    values, table = _t(values), _t(table)
    if values.shape[-1] != table.shape[0]:
        raise ValueError(f"embed_scale: {values.shape[-1]} values for {table.shape[0]} rows")
    v = values.data[..., None]
    out = v * table.data

    def back(g):
        gv = (g * table.data).sum(axis=-1)
        gt = _unbroadcast(g * v, table.shape)
        return gv, gt

    return _node(out, (values, table), back)


def gelu(x) -> Tensor:
    """Exact (erf) GELU."""
    x = _t(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI
    return _node(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


def sigmoid(x) -> Tensor:
    x = _t(x)
    s = expit(x.data)
    return _node(s, (x,), lambda g: (g * s * (1.0 - s),))


def bce_with_logits_sum(logits, target) -> Tensor:
    """sum_i softplus(l_i) - t_i l_i, i.e. BCE(sigmoid(l), t) summed."""
    logits = _t(logits)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=logits.dtype)
    if t.shape != logits.shape:
        raise ValueError(f"target shape {t.shape} != logits shape {logits.shape}")
    l = logits.data
    val = np.sum(np.maximum(l, 0) - l * t + np.log1p(np.exp(-np.abs(l))))
    return _node(np.asarray(val, dtype=l.dtype), (logits,),
                 lambda g: (g * (expit(l) - t),))


# ---------------------------------------------------------------------------
# shape and linear algebra

def matmul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def back(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                # weight shared across the batch: one flattened product
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _node(a.data @ b.data, (a, b), back)


def swapaxes(x, ax1: int, ax2: int) -> Tensor:
    x = _t(x)
    return _node(np.swapaxes(x.data, ax1, ax2), (x,), lambda g: (np.swapaxes(g, ax1, ax2),))


def reshape(x, shape) -> Tensor:
    x = _t(x)
    return _node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def index(x, key) -> Tensor:
    """Basic (slice/int) indexing; gradient scatters back into zeros."""
    x = _t(x)

    def back(g):
        full = np.zeros_like(x.data)
        full[key] = g
        return (full,)

    return _node(x.data[key], (x,), back)


def concat(xs, axis: int) -> Tensor:
    xs = [_t(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]
    return _node(np.concatenate([x.data for x in xs], axis=axis), xs,
                 lambda g: tuple(np.split(g, cuts, axis=axis)))


def sum(x, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    x = _t(x)
    out = np.sum(x.data, axis=axis)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _node(np.asarray(out), (x,), back)


# ---------------------------------------------------------------------------
# normalisation / attention

def masked_softmax(x, additive_mask) -> Tensor:
    """Softmax over the last axis of ``x + additive_mask``.

    Blocked entries (-inf) get probability exactly 0. A row with every entry
    blocked has no valid target and raises ValueError.
    """
    x = _t(x)
    mask = np.asarray(additive_mask).astype(x.dtype, copy=False)
    if np.isneginf(mask).all(axis=-1).any():
        raise ValueError("attention mask has a fully masked row")
    z = x.data + mask
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _node(p, (x,), back)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then apply the learned gain and bias."""
    x, gain, bias = _t(x), _t(gain), _t(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def back(g):
        gh = g * gain.data
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return _node(out, (x, gain, bias), back)


def masked_softmax_attention(Q, K, V, mask, heads: int):
    """Multi-head scaled dot-product attention under an additive mask.

    ``Q`` is (..., r, d); ``K`` and ``V`` are (..., c, d); ``mask`` is an
    AttentionMask or additive array of shape (r, c). Each head uses the
    scale 1/sqrt(d / heads). Returns ``(out, scores)`` with ``out`` of shape
    (..., r, d) and ``scores`` of shape (..., heads, r, c).
    """
    Q, K, V = _t(Q), _t(K), _t(V)
    d = Q.shape[-1]
    if d % heads:
        raise ValueError(f"embedding dim {d} not divisible by {heads} heads")
    if K.shape[-1] != d or V.shape[-1] != d or K.shape[-2] != V.shape[-2]:
        raise ValueError(f"attention shapes disagree: Q{Q.shape} K{K.shape} V{V.shape}")
    additive = mask.additive if hasattr(mask, "additive") else np.asarray(mask)
    r, c = Q.shape[-2], K.shape[-2]
    if additive.shape != (r, c):
        raise ValueError(f"mask shape {additive.shape} does not match ({r}, {c})")
    dh = d // heads

    def split(t, rows):
        t = reshape(t, t.shape[:-2] + (rows, heads, dh))
        return swapaxes(t, -2, -3)

    q, k, v = split(Q, r), split(K, c), split(V, c)
    logits = scale(matmul(q, swapaxes(k, -1, -2)), 1.0 / math.sqrt(dh))
    scores = masked_softmax(logits, additive)
    out = swapaxes(matmul(scores, v), -2, -3)
    out = reshape(out, out.shape[:-2] + (d,))
    return out, scores


# ---------------------------------------------------------------------------
# finite-difference checking

@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    checked: int
    worst: list = field(default_factory=list)

    def __str__(self):
        head = f"grad_check {'PASS' if self.passed else 'FAIL'}: {self.checked} coords, max rel err {self.max_rel_error:.3e}"
        rows = [f"  {name}[{idx}] analytic={a:.6e} numeric={n:.6e} rel={e:.2e}"
                for name, idx, a, n, e in self.worst]
        return "\n".join([head] + rows)


def grad_check(f, params, epsilon: float = 1e-4, tolerance: float = 1e-4,
               coords: int = 32, rng=None, floor: float = 1e-6) -> GradCheckReport:
    """Compare backward() gradients with central differences.

    ``f`` is a zero-argument callable returning a scalar Tensor built from
    ``params`` (a dict name -> Tensor, or a list). Up to ``coords`` random
    coordinates per parameter are tested. The relative error is
    ``|a - n| / max(|a|, |n|, floor)``; ``floor`` keeps coordinates whose true
    gradient is ~0 from being judged on round-off alone.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if not isinstance(params, dict):
        params = {p.name or f"p{i}": p for i, p in enumerate(params)}
    for p in params.values():
        p.grad = None
    f().backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}

    results = []
    for name, p in params.items():
        flat = p.data.reshape(-1)
        if flat.size <= coords:
            idxs = np.arange(flat.size)
        else:
            idxs = np.sort(rng.choice(flat.size, size=coords, replace=False))
        for i in idxs:
            old = flat[i]
            flat[i] = old + epsilon
            fp = float(f().data)
            flat[i] = old - epsilon
            fm = float(f().data)
            flat[i] = old
            num = (fp - fm) / (2 * epsilon)
            ana = float(analytic[name].reshape(-1)[i])
            err = abs(ana - num) / max(abs(ana), abs(num), floor)
            results.append((name, int(i), ana, num, err))
    results.sort(key=lambda r: -r[4])
    worst = results[:5]
    max_err = results[0][4] if results else 0.0
    return GradCheckReport(passed=max_err <= tolerance, max_rel_error=max_err,
                           checked=len(results), worst=worst)
