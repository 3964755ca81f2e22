from __future__ import annotations

from typing import Iterator, Optional, Sequence

import numpy as np

from ..errors import NonFiniteError, ShapeMismatch
from .functional import sigmoid
from .layers import Layer, Sigmoid, layer_from_spec


class Sequential:
    """A stack of layers fed one input shape.

    A trailing :class:`Sigmoid` is part of the stack for inference and shape
    reporting, but :meth:`forward_logits` stops before it so training can fuse
    it with the cross-entropy loss.
    """

    def __init__(self, layers: Sequence[Layer], input_shape: tuple):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.shapes: list[tuple] = []

    def build(self, rng: Optional[np.random.Generator]) -> "Sequential":
        shape = self.input_shape
        self.shapes = []
        for layer in self.layers:
            shape = layer.build(shape, rng)
            self.shapes.append(tuple(shape))
        return self

    @property
    def _body(self) -> list[Layer]:
        if self.layers and isinstance(self.layers[-1], Sigmoid):
            return self.layers[:-1]
        return self.layers

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            if x.ndim >= 2 and x.size == len(x) * int(np.prod(self.input_shape)):
                x = x.reshape((len(x),) + self.input_shape)
            else:
                raise ShapeMismatch(f"input shape {x.shape[1:]} != model input {self.input_shape}")
        return x

    def forward_logits(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Batched forward pass up to (not including) a trailing sigmoid."""
        x = self._check_input(x)
        for i, layer in enumerate(self._body):
            x = layer.forward(x, training=training)
            if not np.isfinite(x).all():
                raise NonFiniteError(f"non-finite output from layer {i} ({layer.kind})")
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for i, layer in reversed(list(enumerate(self._body))):
            grad = layer.backward(grad)
            if not np.isfinite(grad).all():
                raise NonFiniteError(f"non-finite gradient at layer {i} ({layer.kind})")
        return grad

    def predict_proba(self, x: np.ndarray, chunk: int = 8192) -> np.ndarray:
        """Inference-mode probabilities, shape (N,)."""
        x = self._check_input(x)
        out = np.empty(len(x))
        for s in range(0, len(x), chunk):
            z = self.forward_logits(x[s : s + chunk], training=False)
            out[s : s + chunk] = sigmoid(z.reshape(len(z), -1)[:, 0])
        return out

    __call__ = predict_proba

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def named_params(self) -> Iterator[tuple[str, Layer, str]]:
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                yield f"{i}.{layer.kind}.{name}", layer, name

    def named_state(self) -> Iterator[tuple[str, Layer, str]]:
        for i, layer in enumerate(self.layers):
            for name in layer.state:
                yield f"{i}.{layer.kind}.{name}", layer, name

    @property
    def n_trainable(self) -> int:
        return sum(layer.n_trainable for layer in self.layers)

    @property
    def n_non_trainable(self) -> int:
        return sum(layer.n_non_trainable for layer in self.layers)

    @property
    def n_params(self) -> int:
        return self.n_trainable + self.n_non_trainable

    def shape_chain(self, skip_activations: bool = True) -> list[tuple]:
        chain = [self.input_shape]
        for layer, shape in zip(self.layers, self.shapes):
            if skip_activations and layer.kind in ("relu", "sigmoid"):
                continue
            chain.append(shape)
        return chain

    def summary(self) -> str:
        lines = [f"{'Layer (type)':<28}{'Output Shape':<18}{'Param':>8}"]
        for layer, shape in zip(self.layers, self.shapes):
            n = layer.n_trainable + layer.n_non_trainable
            lines.append(f"{type(layer).__name__:<28}{str((None,) + shape):<18}{n:>8}")
        lines.append(f"Total params: {self.n_params}")
        lines.append(f"Trainable params: {self.n_trainable}")
        lines.append(f"Non-trainable params: {self.n_non_trainable}")
        return "\n".join(lines)

    def copy(self) -> "Sequential":
        clone = Sequential([layer_from_spec(l.spec()) for l in self.layers], self.input_shape).build(None)
        clone.load_arrays(self.arrays())
        return clone

    def arrays(self) -> dict[str, np.ndarray]:
        """Every parameter and state array, keyed ``<index>.<kind>.<name>``."""
        out = {key: layer.params[name].copy() for key, layer, name in self.named_params()}
        out.update({key: layer.state[name].copy() for key, layer, name in self.named_state()})
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        expected = {k for k, _, _ in self.named_params()} | {k for k, _, _ in self.named_state()}
        if set(arrays) != expected:
            raise ShapeMismatch(f"array keys differ: missing {sorted(expected - set(arrays))}, "
                                f"unexpected {sorted(set(arrays) - expected)}")
        for key, layer, name in self.named_params():
            if arrays[key].shape != layer.params[name].shape:
                raise ShapeMismatch(f"{key}: shape {arrays[key].shape} != {layer.params[name].shape}")
            layer.params[name] = np.array(arrays[key], dtype=np.float64)
        for key, layer, name in self.named_state():
            if arrays[key].shape != layer.state[name].shape:
                raise ShapeMismatch(f"{key}: shape {arrays[key].shape} != {layer.state[name].shape}")
            layer.state[name] = np.array(arrays[key], dtype=np.float64)
        self.zero_grad()

    def layer_specs(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]

    @classmethod
    def from_specs(cls, specs: Sequence[dict], input_shape: tuple) -> "Sequential":
        return cls([layer_from_spec(s) for s in specs], input_shape).build(None)
