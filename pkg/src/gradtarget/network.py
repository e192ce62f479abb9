"""Feed-forward model, forward pass with cached traces, checkpoint I/O.

Layer indexing: layer 0 is the input. weights[k] maps layer k to layer
k+1 (shape sizes[k+1] x sizes[k]) and activations[k] is the activation
of layer k+1. There are no bias parameters.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError
from .mathcore import ActivationKind, activate, matvec

CHECKPOINT_MAGIC = b"GTPNET1\x00"

_ACT_TAG = {ActivationKind.SIGMOID: 0, ActivationKind.RELU: 1}
_TAG_ACT = {v: k for k, v in _ACT_TAG.items()}


@dataclass
class Network:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    activations: list[ActivationKind]

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ConfigError("a network needs at least an input and an output layer")
        if any(s <= 0 for s in self.layer_sizes):
            raise ConfigError(f"layer sizes must be positive: {self.layer_sizes}")
        if len(self.weights) != self.depth or len(self.activations) != self.depth:
            raise ConfigError("one weight matrix and one activation per non-input layer required")
        for k, w in enumerate(self.weights):
            expect = (self.layer_sizes[k + 1], self.layer_sizes[k])
            if w.shape != expect:
                raise ConfigError(f"weights[{k}] has shape {w.shape}, expected {expect}")

    @property
    def depth(self) -> int:
        """Number of weight layers L."""
        return len(self.layer_sizes) - 1


@dataclass
class ForwardTrace:
    """Cached activations y[0..L] (y[0] is the input) and pre-activations
    z[0..L] (z[0] is None; z[l] feeds layer l)."""
    y: list[np.ndarray]
    z: list[np.ndarray | None]


def default_activations(num_weight_layers: int, first_layer_relu: bool = True) -> list[ActivationKind]:
    """ReLU on the first hidden layer and sigmoid elsewhere (the all-sigmoid
    variant is used by analysis and unit tests)."""
    acts = [ActivationKind.SIGMOID] * num_weight_layers
    if first_layer_relu and num_weight_layers >= 2:
        acts[0] = ActivationKind.RELU
    return acts


def forward(net: Network, x: np.ndarray) -> ForwardTrace:
    if x.shape != (net.layer_sizes[0],):
        raise ConfigError(
            f"input length {x.shape} does not match input layer size {net.layer_sizes[0]}")
    y: list[np.ndarray] = [x]
    z: list[np.ndarray | None] = [None]
    for k in range(net.depth):
        zk = matvec(net.weights[k], y[-1])
        z.append(zk)
        y.append(activate(net.activations[k], zk))
    return ForwardTrace(y=y, z=z)


def predict_class(net: Network, x: np.ndarray) -> int:
    out = forward(net, x).y[-1]
    return int(np.argmax(out))  # argmax takes the lowest index on ties


def save_checkpoint(net: Network, path) -> None:
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(net.layer_sizes)))
        for s in net.layer_sizes:
            f.write(struct.pack("<Q", s))
        f.write(bytes(_ACT_TAG[a] for a in net.activations))
        for w in net.weights:
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_checkpoint(path) -> Network:
    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(n, what):
        nonlocal off
        if off + n > len(blob):
            raise DataFormatError(f"checkpoint truncated reading {what} at byte {off}")
        piece = blob[off:off + n]
        off += n
        return piece

    magic = take(len(CHECKPOINT_MAGIC), "magic")
    if magic != CHECKPOINT_MAGIC:
        raise DataFormatError(f"bad checkpoint magic {magic!r} at byte 0")
    (num_layers,) = struct.unpack("<Q", take(8, "layer count"))
    if num_layers < 2 or num_layers > 1_000_000:
        raise DataFormatError(f"implausible layer count {num_layers}")
    sizes = tuple(struct.unpack("<Q", take(8, "layer size"))[0] for _ in range(num_layers))
    if any(s == 0 for s in sizes):
        raise DataFormatError(f"zero layer size in checkpoint: {sizes}")
    tags = take(num_layers - 1, "activation tags")
    try:
        acts = [_TAG_ACT[t] for t in tags]
    except KeyError as exc:
        raise DataFormatError(f"unknown activation tag {exc} in checkpoint") from exc
    weights = []
    for k in range(num_layers - 1):
        rows, cols = sizes[k + 1], sizes[k]
        raw = take(rows * cols * 8, f"weights[{k}]")
        weights.append(np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy())
    if off != len(blob):
        raise DataFormatError(f"{len(blob) - off} trailing bytes after weights at byte {off}")
    return Network(layer_sizes=sizes, weights=weights, activations=acts)
