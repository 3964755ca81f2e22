"""Stateful layer wrappers around :mod:`lexiphish.nn.functional`."""
from __future__ import annotations

from typing import Optional

import numpy as np

from . import functional as F
from ..errors import ShapeMismatch


class Layer:
    kind: str = ""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.state: dict[str, np.ndarray] = {}
        self._cache = None

    def build(self, input_shape: tuple, rng: Optional[np.random.Generator]) -> tuple:
        """Allocate parameters for ``input_shape`` (no batch axis); return the output shape."""
        return input_shape

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grad(self) -> None:
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    @property
    def n_trainable(self) -> int:
        return sum(p.size for p in self.params.values())

    @property
    def n_non_trainable(self) -> int:
        return sum(s.size for s in self.state.values())

    def spec(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.spec().items() if k != "kind")
        return f"{type(self).__name__}({args})"


def he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, filters: int, kernel: int):
        super().__init__()
        if filters < 1 or kernel < 1:
            raise ValueError("filters and kernel must be positive")
        self.filters, self.kernel = filters, kernel

    def build(self, input_shape, rng):
        length, cin = input_shape
        if length < self.kernel:
            raise ShapeMismatch(f"conv1d: length {length} < kernel {self.kernel}")
        shape = (self.kernel, cin, self.filters)
        self.params = {
            "w": he_uniform(rng, shape, self.kernel * cin) if rng is not None else np.zeros(shape),
            "b": np.zeros(self.filters),
        }
        self.zero_grad()
        return (length - self.kernel + 1, self.filters)

    def forward(self, x, training=False):
        out, self._cache = F.conv1d_forward(x, self.params["w"], self.params["b"])
        return out

    def backward(self, grad):
        gx, self.grads["w"], self.grads["b"] = F.conv1d_backward(grad, self._cache)
        return gx

    def spec(self):
        return {"kind": self.kind, "filters": self.filters, "kernel": self.kernel}


class MaxPool1D(Layer):
    kind = "maxpool1d"

    def __init__(self, pool: int = 2):
        super().__init__()
        if pool < 1:
            raise ValueError("pool must be positive")
        self.pool = pool

    def build(self, input_shape, rng):
        length, c = input_shape
        return (length // self.pool, c)

    def forward(self, x, training=False):
        out, self._cache = F.maxpool1d_forward(x, self.pool)
        return out

    def backward(self, grad):
        return F.maxpool1d_backward(grad, self._cache)

    def spec(self):
        return {"kind": self.kind, "pool": self.pool}


class GlobalAveragePooling1D(Layer):
    kind = "gap1d"

    def build(self, input_shape, rng):
        return (input_shape[1],)

    def forward(self, x, training=False):
        out, self._cache = F.gap1d_forward(x)
        return out

    def backward(self, grad):
        return F.gap1d_backward(grad, self._cache)


class Dense(Layer):
    kind = "dense"

    def __init__(self, units: int):
        super().__init__()
        if units < 1:
            raise ValueError("units must be positive")
        self.units = units

    def build(self, input_shape, rng):
        (fan_in,) = input_shape
        shape = (fan_in, self.units)
        self.params = {
            "w": he_uniform(rng, shape, fan_in) if rng is not None else np.zeros(shape),
            "b": np.zeros(self.units),
        }
        self.zero_grad()
        return (self.units,)

    def forward(self, x, training=False):
        out, self._cache = F.dense_forward(x, self.params["w"], self.params["b"])
        return out

    def backward(self, grad):
        gx, self.grads["w"], self.grads["b"] = F.dense_backward(grad, self._cache)
        return gx

    def spec(self):
        return {"kind": self.kind, "units": self.units}


class BatchNormalization(Layer):
    kind = "batchnorm"

    def __init__(self, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        if not 0 < momentum < 1 or eps <= 0:
            raise ValueError("momentum must be in (0, 1) and eps positive")
        self.momentum, self.eps = momentum, eps

    def build(self, input_shape, rng):
        (c,) = input_shape
        self.params = {"gamma": np.ones(c), "beta": np.zeros(c)}
        self.state = {"moving_mean": np.zeros(c), "moving_var": np.ones(c)}
        self.zero_grad()
        return input_shape

    def forward(self, x, training=False):
        out, self._cache = F.batchnorm_forward(
            x, self.params["gamma"], self.params["beta"], self.state,
            "train" if training else "infer", self.momentum, self.eps,
        )
        return out

    def backward(self, grad):
        gx, self.grads["gamma"], self.grads["beta"] = F.batchnorm_backward(grad, self._cache)
        return gx

    def spec(self):
        return {"kind": self.kind, "momentum": self.momentum, "eps": self.eps}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False):
        self._cache = x
        return F.relu(x)

    def backward(self, grad):
        return F.relu_backward(grad, self._cache)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, training=False):
        self._cache = F.sigmoid(x)
        return self._cache

    def backward(self, grad):
        return F.sigmoid_backward(grad, self._cache)


LAYER_TYPES = {cls.kind: cls for cls in (Conv1D, MaxPool1D, GlobalAveragePooling1D, Dense, BatchNormalization, ReLU, Sigmoid)}


def layer_from_spec(spec: dict) -> Layer:
    spec = dict(spec)
    cls = LAYER_TYPES[spec.pop("kind")]
    return cls(**spec)
