"""Forward/backward kernels. Arrays are float64; the leading axis is the batch.

Each ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
takes ``(grad_out, cache)``. Unbatched inputs (no leading batch axis) are
accepted by the conv/pool/dense kernels and produce unbatched outputs.
"""
from __future__ import annotations

import numpy as np

from ..errors import BatchTooSmall, ShapeMismatch


def _batched(x: np.ndarray, rank: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == rank - 1:
        return x[None], True
    if x.ndim != rank:
        raise ShapeMismatch(f"expected {rank - 1}-D or {rank}-D input, got shape {x.shape}")
    return x, False


# --- conv1d: valid padding, stride 1 -------------------------------------

def conv1d_forward(x, w, b):
    """x: (N, L, Cin), w: (K, Cin, F), b: (F,) -> (N, L-K+1, F).

    Computed as K shifted 2-D matmuls, out = b + sum_k x[:, k:k+Lout] @ w[k].
    """
    x, squeeze = _batched(x, 3)
    k, cin, f = w.shape
    if x.shape[2] != cin:
        raise ShapeMismatch(f"input has {x.shape[2]} channels, kernel expects {cin}")
    if b.shape != (f,):
        raise ShapeMismatch(f"bias shape {b.shape} != ({f},)")
    n, length, _ = x.shape
    if length < k:
        raise ShapeMismatch(f"input length {length} shorter than kernel {k}")
    lout = length - k + 1
    out = np.broadcast_to(b, (n * lout, f)).copy()
    for t in range(k):
        out += np.ascontiguousarray(x[:, t : t + lout, :]).reshape(n * lout, cin) @ w[t]
    out = out.reshape(n, lout, f)
    cache = (x, w, squeeze)
    return (out[0] if squeeze else out), cache


def conv1d_backward(grad_out, cache):
    x, w, squeeze = cache
    k, cin, f = w.shape
    n, length, _ = x.shape
    lout = length - k + 1
    g = grad_out[None] if squeeze else grad_out
    if g.shape != (n, lout, f):
        raise ShapeMismatch(f"grad shape {g.shape} does not match forward output {(n, lout, f)}")
    g2 = g.reshape(n * lout, f)
    grad_w = np.empty_like(w)
    grad_x = np.zeros_like(x)
    for t in range(k):
        xt = np.ascontiguousarray(x[:, t : t + lout, :]).reshape(n * lout, cin)
        grad_w[t] = xt.T @ g2
        grad_x[:, t : t + lout, :] += (g2 @ w[t].T).reshape(n, lout, cin)
    grad_b = g2.sum(axis=0)
    return (grad_x[0] if squeeze else grad_x), grad_w, grad_b


# --- max pooling: non-overlapping, stride == pool ------------------------

def maxpool1d_forward(x, pool: int = 2):
    x, squeeze = _batched(x, 3)
    n, length, c = x.shape
    if length < pool:
        raise ShapeMismatch(f"input length {length} shorter than pool {pool}")
    lout = length // pool
    win = x[:, : lout * pool, :].reshape(n, lout, pool, c)
    arg = win.argmax(axis=2)
    out = np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :]
    cache = (arg, x.shape, pool, squeeze)
    return (out[0] if squeeze else out), cache


def maxpool1d_backward(grad_out, cache):
    arg, xshape, pool, squeeze = cache
    g = grad_out[None] if squeeze else grad_out
    n, length, c = xshape
    lout = length // pool
    win = np.zeros((n, lout, pool, c))
    np.put_along_axis(win, arg[:, :, None, :], g[:, :, None, :], axis=2)
    grad_x = np.zeros(xshape)
    grad_x[:, : lout * pool, :] = win.reshape(n, lout * pool, c)
    return grad_x[0] if squeeze else grad_x


# --- global average pooling over the length axis -------------------------

def gap1d_forward(x):
    x, squeeze = _batched(x, 3)
    if x.shape[1] < 1:
        raise ShapeMismatch("empty length axis")
    out = x.mean(axis=1)
    return (out[0] if squeeze else out), (x.shape, squeeze)


def gap1d_backward(grad_out, cache):
    xshape, squeeze = cache
    g = grad_out[None] if squeeze else grad_out
    grad_x = np.broadcast_to(g[:, None, :] / xshape[1], xshape).copy()
    return grad_x[0] if squeeze else grad_x


# --- dense ----------------------------------------------------------------

def dense_forward(x, w, b):
    """x: (N, I), w: (I, U), b: (U,) -> (N, U)."""
    x, squeeze = _batched(x, 2)
    if x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeMismatch(f"dense: input {x.shape}, weights {w.shape}, bias {b.shape}")
    out = x @ w + b
    return (out[0] if squeeze else out), (x, w, squeeze)


def dense_backward(grad_out, cache):
    x, w, squeeze = cache
    g = grad_out[None] if squeeze else grad_out
    grad_x = g @ w.T
    return (grad_x[0] if squeeze else grad_x), x.T @ g, g.sum(axis=0)


# --- batch normalization over the batch axis ------------------------------

def batchnorm_forward(x, gamma, beta, state: dict, mode: str, momentum: float = 0.9, eps: float = 1e-5):
    """``state`` holds ``moving_mean``/``moving_var``; train mode updates it in place.

    Moving statistics follow ``moving = momentum * moving + (1 - momentum) * batch``
    with the biased batch variance.
    """
    x = np.asarray(x, dtype=np.float64)
    if mode == "train":
        if x.ndim != 2 or x.shape[0] < 2:
            raise BatchTooSmall(f"train-mode batchnorm needs a batch of at least 2, got shape {x.shape}")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        state["moving_mean"] = momentum * state["moving_mean"] + (1.0 - momentum) * mu
        state["moving_var"] = momentum * state["moving_var"] + (1.0 - momentum) * var
    elif mode == "infer":
        mu, var = state["moving_mean"], state["moving_var"]
    else:
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return gamma * xhat + beta, (xhat, inv, gamma, mode)


def batchnorm_backward(grad_out, cache):
    xhat, inv, gamma, mode = cache
    grad_gamma = (grad_out * xhat).sum(axis=0) if grad_out.ndim == 2 else grad_out * xhat
    grad_beta = grad_out.sum(axis=0) if grad_out.ndim == 2 else grad_out
    gxhat = grad_out * gamma
    if mode == "infer":
        return gxhat * inv, grad_gamma, grad_beta
    n = grad_out.shape[0]
    grad_x = inv / n * (n * gxhat - gxhat.sum(axis=0) - xhat * (gxhat * xhat).sum(axis=0))
    return grad_x, grad_gamma, grad_beta


# --- activations and loss -------------------------------------------------

def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(grad_out, x):
    return grad_out * (x > 0)


def sigmoid(x):
    """Logistic function, evaluated without overflow for any finite input."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid_backward(grad_out, y):
    return grad_out * y * (1.0 - y)


P_CLAMP = 1e-7


def bce_loss(p, y) -> float:
    """Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(p, dtype=np.float64), P_CLAMP, 1.0 - P_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def bce_with_logits(z, y) -> tuple[float, np.ndarray]:
    """Loss as :func:`bce_loss` on ``sigmoid(z)`` and its gradient w.r.t. ``z``.

    The gradient is ``(p - y) / N``; it ignores the clamp, which only matters
    once the logit is beyond about +-16.
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    p = sigmoid(z)
    return bce_loss(p, y), (p - y) / len(z)
