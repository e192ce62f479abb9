"""Uncertainty-maximizing weight initialization.

Weights are drawn from zero-mean normals whose variance keeps each
neuron maximally unsure at the start of training. For sigmoid layers
the uncertainty density U(y) = 6y(1-y) over (0,1) fixes the activation
moments to mean 1/2 and variance 1/20, which yields the closed-form
variances 48/(35*N) for the first weight layer (uniform input data
assumed) and 16/(11*N) for every other layer, N being the fan-in.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .network import Network, default_activations


@dataclass(frozen=True)
class UncertaintyProfile:
    mean: float
    variance: float


@dataclass(frozen=True)
class LayerInitSpec:
    fan_in: int
    input_mean: float
    input_variance: float
    deriv_at_mean: float
    target_variance: float

    def __post_init__(self):
        if self.fan_in < 1:
            raise ConfigError(f"fan_in must be >= 1, got {self.fan_in}")
        if self.deriv_at_mean == 0:
            raise ConfigError("deriv_at_mean of 0 would give infinite weight variance")
        if self.target_variance <= 0:
            raise ConfigError(f"target_variance must be positive, got {self.target_variance}")
        if self.input_variance < 0:
            raise ConfigError(f"input_variance must be >= 0, got {self.input_variance}")


def weight_variance(spec: LayerInitSpec):
    """Weight variance that achieves the requested activation variance.

    VAR(w) = VAR(y_out) / (N * f'(<z>)^2 * (<y_in> + VAR(y_in)))

    The input mean enters to the first power; that is the form whose
    closed-form constants are 48/35 and 16/11. Works with Fraction
    inputs for exact rational checks.
    """
    denom_moment = spec.input_mean + spec.input_variance
    if denom_moment <= 0:
        raise ConfigError(
            f"<y_in> + VAR(y_in) must be positive, got {denom_moment}")
    return spec.target_variance / (spec.fan_in * spec.deriv_at_mean ** 2 * denom_moment)


def sigmoid_uncertainty_moments() -> UncertaintyProfile:
    """Moments of the sigmoid uncertainty density 6y(1-y) on [0,1]."""
    return UncertaintyProfile(mean=0.5, variance=0.05)


def input_layer_variance(fan_in: int) -> Fraction:
    """48/(35*N): first weight layer, uniform-[0,1] input data assumed."""
    spec = LayerInitSpec(
        fan_in=fan_in,
        input_mean=Fraction(1, 2),
        input_variance=Fraction(1, 12),
        deriv_at_mean=Fraction(1, 4),
        target_variance=Fraction(1, 20),
    )
    return weight_variance(spec)


def hidden_layer_variance(fan_in: int) -> Fraction:
    """16/(11*N): layers fed by sigmoid activations at maximum uncertainty."""
    spec = LayerInitSpec(
        fan_in=fan_in,
        input_mean=Fraction(1, 2),
        input_variance=Fraction(1, 20),
        deriv_at_mean=Fraction(1, 4),
        target_variance=Fraction(1, 20),
    )
    return weight_variance(spec)


def layer_variances(layer_sizes) -> list[Fraction]:
    """Exact per-weight-layer variance for an architecture."""
    out = [input_layer_variance(layer_sizes[0])]
    for fan_in in layer_sizes[1:-1]:
        out.append(hidden_layer_variance(fan_in))
    return out


def initialize_network(layer_sizes, activations=None, rng=None) -> Network:
    """Build a Network with zero-mean normal weights at the derived variances.

    The first-layer constant is applied even when that layer is ReLU,
    matching how the training experiments combine the two.
    """
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if len(layer_sizes) < 2:
        raise ConfigError("need at least input and output layer sizes")
    if any(s <= 0 for s in layer_sizes):
        raise ConfigError(f"layer sizes must be positive: {layer_sizes}")
    if activations is None:
        activations = default_activations(len(layer_sizes) - 1)
    if rng is None:
        raise ConfigError("an explicit rng is required for reproducible initialization")
    variances = layer_variances(layer_sizes)
    weights = []
    for k, var in enumerate(variances):
        shape = (layer_sizes[k + 1], layer_sizes[k])
        weights.append(rng.normal(0.0, float(np.sqrt(float(var))), size=shape))
    return Network(layer_sizes=layer_sizes, weights=weights, activations=list(activations))
