"""Fully-connected feed-forward networks with explicit forward/backward passes.

Data flows column-per-sample: a batch of m points with d features is a d x m
matrix, and every layer maps (in_dim x m) -> (out_dim x m) via
``W @ x + b[:, None]`` followed by the layer's activation.  Backward returns
parameter gradients summed over the batch columns.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .mathops import NumericError

ACTIVATIONS = ("relu", "identity")

NET_FORMAT = "feedforward-net"
NET_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    """Shape and activation of one dense layer."""

    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")


class Layer:
    def __init__(self, weights: np.ndarray, bias: np.ndarray, activation: str):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.activation = activation
        if self.weights.ndim != 2:
            raise ValueError("layer weights must be 2-D (out_dim x in_dim)")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError("bias length must equal the layer's out_dim")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def spec(self) -> LayerSpec:
        return LayerSpec(self.in_dim, self.out_dim, self.activation)


class FeedForwardNet:
    """Ordered dense layers; consecutive dims must chain."""

    def __init__(self, layers: list[Layer]):
        if not layers:
            raise ValueError("a network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        self.layers = list(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def specs(self) -> list[LayerSpec]:
        return [layer.spec() for layer in self.layers]


@dataclass
class ForwardTrace:
    """Per-layer pre/post activations kept around for the backward pass."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    post_activations: list[np.ndarray]


@dataclass
class ParamGrads:
    """d(loss)/d(weights) and d(loss)/d(bias) per layer, batch-summed."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]


def init_net(specs: list[LayerSpec], rng: np.random.Generator) -> FeedForwardNet:
    """Glorot-uniform weights (scale sqrt(6/(in+out))), zero biases.

    Deterministic given the generator state: layers are drawn in order,
    each as one uniform block.
    """
    if not specs:
        raise ValueError("empty layer spec list")
    for prev, nxt in zip(specs, specs[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ValueError(f"layer specs do not chain: {prev.out_dim} -> {nxt.in_dim}")
    layers = []
    for spec in specs:
        scale = math.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        weights = rng.uniform(-scale, scale, size=(spec.out_dim, spec.in_dim))
        bias = np.zeros(spec.out_dim)
        layers.append(Layer(weights, bias, spec.activation))
    return FeedForwardNet(layers)


def forward(net: FeedForwardNet, inputs) -> tuple[np.ndarray, ForwardTrace]:
    """Run the net on a d x m batch; returns (outputs c x m, trace for backward)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"inputs must be 2-D (features x samples), got shape {x.shape}")
    if x.shape[0] != net.input_dim:
        raise ValueError(f"inputs have {x.shape[0]} rows, network expects {net.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs contain non-finite entries")
    pre, post = [], []
    a = x
    for layer in net.layers:
        z = layer.weights @ a + layer.bias[:, None]
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        pre.append(z)
        post.append(a)
    return a, ForwardTrace(x, pre, post)


def backward(net: FeedForwardNet, trace: ForwardTrace, output_grad) -> ParamGrads:
    """Chain-rule the gradient at the outputs back to every parameter.

    ``output_grad`` is d(loss)/d(outputs), shaped like the forward outputs.
    ReLU passes gradient where the pre-activation was > 0 and blocks it at
    <= 0.  Gradients accumulate (sum) over batch columns.
    """
    n_layers = len(net.layers)
    if len(trace.pre_activations) != n_layers or len(trace.post_activations) != n_layers:
        raise ValueError("trace depth does not match the network's layer count")
    if trace.inputs.shape[0] != net.input_dim:
        raise ValueError("trace inputs do not match the network's input dim")
    delta = np.asarray(output_grad, dtype=np.float64)
    if delta.shape != trace.post_activations[-1].shape:
        raise ValueError(
            f"output_grad shape {delta.shape} does not match outputs "
            f"{trace.post_activations[-1].shape}"
        )
    d_weights: list[np.ndarray] = [np.empty(0)] * n_layers
    d_biases: list[np.ndarray] = [np.empty(0)] * n_layers
    for k in range(n_layers - 1, -1, -1):
        layer = net.layers[k]
        if layer.activation == "relu":
            delta = delta * (trace.pre_activations[k] > 0)
        below = trace.post_activations[k - 1] if k > 0 else trace.inputs
        d_weights[k] = delta @ below.T
        d_biases[k] = delta.sum(axis=1)
        if k > 0:
            delta = layer.weights.T @ delta
    return ParamGrads(d_weights, d_biases)


def sgd_step(net: FeedForwardNet, grads: ParamGrads, lr: float) -> None:
    """In-place p <- p - lr * grad(p) for every parameter."""
    if lr <= 0:
        raise ValueError("learning rate must be > 0")
    if len(grads.d_weights) != len(net.layers) or len(grads.d_biases) != len(net.layers):
        raise ValueError("gradient count does not match the network's layer count")
    for layer, dw, db in zip(net.layers, grads.d_weights, grads.d_biases):
        if dw.shape != layer.weights.shape or db.shape != layer.bias.shape:
            raise ValueError("gradient shapes do not match layer parameters")
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise NumericError("non-finite parameter gradients; aborting update")
    for layer, dw, db in zip(net.layers, grads.d_weights, grads.d_biases):
        layer.weights -= lr * dw
        layer.bias -= lr * db


def net_to_dict(net: FeedForwardNet) -> dict:
    return {
        "format": NET_FORMAT,
        "version": NET_FORMAT_VERSION,
        "layers": [
            {
                "in_dim": layer.in_dim,
                "out_dim": layer.out_dim,
                "activation": layer.activation,
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in net.layers
        ],
    }


def net_from_dict(payload: dict) -> FeedForwardNet:
    if payload.get("format") != NET_FORMAT:
        raise ValueError(f"not a {NET_FORMAT} container: format={payload.get('format')!r}")
    if payload.get("version") != NET_FORMAT_VERSION:
        raise ValueError(f"unsupported {NET_FORMAT} version {payload.get('version')!r}")
    layers = []
    for entry in payload["layers"]:
        layer = Layer(
            np.array(entry["weights"], dtype=np.float64),
            np.array(entry["bias"], dtype=np.float64),
            entry["activation"],
        )
        if layer.in_dim != entry["in_dim"] or layer.out_dim != entry["out_dim"]:
            raise ValueError("declared layer dims do not match stored arrays")
        layers.append(layer)
    return FeedForwardNet(layers)


def save_net(net: FeedForwardNet, path: str | os.PathLike) -> None:
    """JSON checkpoint; float round-trip is exact (shortest-repr serialization)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(net_to_dict(net), fh)
        fh.write("\n")


def load_net(path: str | os.PathLike) -> FeedForwardNet:
    with open(path, "r", encoding="utf-8") as fh:
        return net_from_dict(json.load(fh))
