"""Tiny reverse-mode differentiation over numpy arrays.

Only the operations the regression and classification networks need are
provided. Activations are laid out as (batch, time, channels).
"""
from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Propagate d(self)/d(node) to every node that requires a gradient."""
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        if grad is None:
            grad = np.ones_like(self.data)
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        # free interior gradients; leaves keep theirs
        for node in order:
            if node._parents:
                node.grad = None

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, req, tuple(parents) if req else (), backward if req else None)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))
    return _result(a.data + b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))
    return _result(a.data * b.data, (a, b), backward)


def total(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        a._accumulate(np.broadcast_to(g, a.shape))
    return _result(np.sum(a.data), (a,), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        x._accumulate(g * mask)
    return _result(np.maximum(x.data, 0), (x,), backward)


def dropout(x, rate: float, rng: np.random.Generator | None = None, mask=None) -> Tensor:
    """Inverted dropout: kept units are scaled by 1 / (1 - rate)."""
    x = as_tensor(x)
    if not 0 <= rate < 1:
        raise ValueError("dropout rate must be in [0, 1)")
    if rate == 0 and mask is None:
        return x
    if mask is None:
        keep = rng.random(x.shape, dtype=np.float32) >= rate
        mask = keep.astype(x.data.dtype) * x.data.dtype.type(1.0 / (1.0 - rate))

    def backward(g):
        x._accumulate(g * mask)
    return _result(x.data * mask, (x,), backward)


def conv1d_same(x, w, b=None, dilation: int = 1) -> Tensor:
    """Dilated 1-D convolution with zero 'same' padding.

    x: (B, T, Cin); w: (K, Cin, Cout) with K odd; b: (Cout,).
    Output tap k reads input sample t + (k - (K-1)/2) * dilation.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 3:
        raise ValueError(f"conv input must be (batch, time, channels), got {x.shape}")
    k, cin, cout = w.shape
    if k % 2 == 0:
        raise ValueError("kernel width must be odd")
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    if x.shape[2] != cin:
        raise ValueError(f"channel mismatch: input has {x.shape[2]}, kernel expects {cin}")
    bsz, t, _ = x.shape
    pad = (k - 1) // 2 * dilation
    xp = np.pad(x.data, ((0, 0), (pad, pad), (0, 0))) if pad else x.data
    if k == 1:
        cols = xp
    else:
        cols = np.concatenate([xp[:, i * dilation:i * dilation + t] for i in range(k)], axis=2)
    wmat = w.data.reshape(k * cin, cout)
    out = cols @ wmat
    parents = [x, w]
    if b is not None:
        b = as_tensor(b)
        out = out + b.data
        parents.append(b)

    def backward(g):
        if w.requires_grad:
            gw = cols.reshape(-1, k * cin).T @ g.reshape(-1, cout)
            w._accumulate(gw.reshape(w.shape))
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 1)))
        if x.requires_grad:
            gcols = g @ wmat.T
            if k == 1:
                x._accumulate(gcols)
                return
            gxp = np.zeros_like(xp)
            for i in range(k):
                gxp[:, i * dilation:i * dilation + t] += gcols[:, :, i * cin:(i + 1) * cin]
            x._accumulate(gxp[:, pad:pad + t])
    return _result(out, parents, backward)


def mse_loss(pred, target) -> Tensor:
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=pred.data.dtype)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.data.size == 0:
        raise ValueError("empty input")
    diff = pred.data - target
    n = diff.size

    def backward(g):
        pred._accumulate(g * 2.0 * diff / n)
    return _result(np.mean(diff * diff), (pred,), backward)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean over all timesteps of -log softmax at the true class.

    logits: (..., n_classes); labels: integer array shaped like logits[..., 0].
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.shape[:-1] != labels.shape:
        raise ValueError(f"shape mismatch {logits.shape} vs labels {labels.shape}")
    if labels.size == 0:
        raise ValueError("empty input")
    lsm = log_softmax(logits.data)
    flat = lsm.reshape(-1, lsm.shape[-1])
    lab = labels.reshape(-1)
    n = lab.size
    loss = -flat[np.arange(n), lab].mean()

    def backward(g):
        p = np.exp(flat)
        p[np.arange(n), lab] -= 1.0
        logits._accumulate((g * p / n).reshape(logits.shape))
    return _result(np.asarray(loss, dtype=logits.data.dtype), (logits,), backward)
