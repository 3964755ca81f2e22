"""Central finite-difference checks for the hand-written backward passes."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .functional import bce_with_logits
from .layers import MaxPool1D, ReLU


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """max |a - n| / max(|a|, |n|, floor), elementwise; NaN entries in ``numeric`` are skipped."""
    a, n = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    keep = ~np.isnan(n)
    a, n = a[keep], n[keep]
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


def activation_pattern(layers) -> bytes:
    """ReLU on/off masks and max-pool winners from the last forward pass."""
    parts = []
    for layer in layers:
        if isinstance(layer, ReLU):
            parts.append(np.packbits(layer._cache > 0).tobytes())
        elif isinstance(layer, MaxPool1D):
            parts.append(layer._cache[0].tobytes())
    return b"".join(parts)


def numeric_grad(f: Callable[[], float], arr: np.ndarray, h: float = 1e-5,
                 idx: Optional[np.ndarray] = None, pattern: Optional[Callable[[], bytes]] = None,
                 retries: int = 3) -> np.ndarray:
    """d f / d arr by central differences, perturbing ``arr`` in place.

    With ``idx`` (flat indices) only those entries are probed; the rest of
    the returned array is left at zero. With ``pattern`` (read after each
    ``f()``), a probe whose +h or -h side changes the pattern straddles a
    kink; it is retried with h / 10 up to ``retries`` times and left NaN if
    it still straddles.
    """
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in (range(flat.size) if idx is None else idx):
        old = flat[i]
        if pattern is not None:
            f()
            base = pattern()
        step = h
        for _ in range(retries + 1):
            flat[i] = old + step
            fp = f()
            smooth = pattern is None or pattern() == base
            flat[i] = old - step
            fm = f()
            smooth = smooth and (pattern is None or pattern() == base)
            flat[i] = old
            if smooth:
                gflat[i] = (fp - fm) / (2 * step)
                break
            step /= 10
        else:
            gflat[i] = np.nan
    return grad


def check_model(model, x: np.ndarray, y: np.ndarray, rng: np.random.Generator,
                per_array: int = 25, h: float = 1e-5) -> dict[str, float]:
    """Relative errors of backprop vs finite differences for loss(model(x), y).

    The model is run in training mode, so batch-norm uses batch statistics.
    Up to ``per_array`` random entries of every parameter array and of the
    input are probed; probes that straddle a ReLU or max-pool kink are
    re-probed with a smaller step (see ``numeric_grad``). Returns
    ``{array key: max relative error}``.
    """
    x = np.array(x, dtype=np.float64)

    def loss() -> float:
        return bce_with_logits(model.forward_logits(x, training=True), y)[0]

    def pattern() -> bytes:
        return activation_pattern(model.layers)

    model.zero_grad()
    _, g = bce_with_logits(model.forward_logits(x, training=True), y)
    gx = model.backward(g.reshape(-1, 1))
    analytic = {key: layer.grads[name].copy() for key, layer, name in model.named_params()}

    errors = {}
    for key, layer, name in model.named_params():
        arr = layer.params[name]
        idx = rng.choice(arr.size, size=min(per_array, arr.size), replace=False)
        num = numeric_grad(loss, arr, h, idx, pattern)
        errors[key] = rel_error(analytic[key].reshape(-1)[idx], num.reshape(-1)[idx])
    idx = rng.choice(x.size, size=min(per_array, x.size), replace=False)
    num = numeric_grad(loss, x, h, idx, pattern)
    errors["input"] = rel_error(gx.reshape(-1)[idx], num.reshape(-1)[idx])
    return errors


def check_layer(layer, x: np.ndarray, rng: np.random.Generator, training: bool = True,
                per_array: int = 25, h: float = 1e-5) -> dict[str, float]:
    """Finite-difference check of one built layer under a random linear loss.

    The loss is ``sum(layer(x) * r)`` for a fixed random ``r``, so the
    upstream gradient is ``r``. Kinked probes are handled as in
    ``check_model``. Returns ``{param name or "input": max rel error}``.
    """
    x = np.array(x, dtype=np.float64)
    state0 = {k: v.copy() for k, v in layer.state.items()}
    r = rng.normal(size=layer.forward(x, training=training).shape)

    def loss() -> float:
        # train-mode batch norm mutates its moving stats; reset so every probe sees the same layer
        for k, v in state0.items():
            layer.state[k] = v.copy()
        return float(np.sum(layer.forward(x, training=training) * r))

    def pattern() -> bytes:
        return activation_pattern([layer])

    loss()
    layer.zero_grad()
    gx = layer.backward(r)
    analytic = {name: g.copy() for name, g in layer.grads.items()}
    errors = {}
    for name, arr in layer.params.items():
        idx = rng.choice(arr.size, size=min(per_array, arr.size), replace=False)
        num = numeric_grad(loss, arr, h, idx, pattern)
        errors[name] = rel_error(analytic[name].reshape(-1)[idx], num.reshape(-1)[idx])
    idx = rng.choice(x.size, size=min(per_array, x.size), replace=False)
    num = numeric_grad(loss, x, h, idx, pattern)
    errors["input"] = rel_error(gx.reshape(-1)[idx], num.reshape(-1)[idx])
    return errors
