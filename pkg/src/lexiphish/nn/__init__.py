"""Minimal float64 tensor engine: hand-differentiated layers, Adam, BCE."""
from .functional import bce_loss, bce_with_logits, relu, sigmoid
from .layers import (
    BatchNormalization,
    Conv1D,
    Dense,
    GlobalAveragePooling1D,
    Layer,
    MaxPool1D,
    ReLU,
    Sigmoid,
)
from .optim import Adam, adam_step
from .sequential import Sequential

__all__ = [
    "Adam",
    "BatchNormalization",
    "Conv1D",
    "Dense",
    "GlobalAveragePooling1D",
    "Layer",
    "MaxPool1D",
    "ReLU",
    "Sequential",
    "Sigmoid",
    "adam_step",
    "bce_loss",
    "bce_with_logits",
    "relu",
    "sigmoid",
]
