"""Dense linear algebra, activation functions and seeded sampling.

Everything is float64. All randomness flows through an explicit
numpy Generator so runs are replayable; there is no global RNG state.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import ConfigError


class ActivationKind(Enum):
    SIGMOID = "sigmoid"
    RELU = "relu"


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; identical seed gives a bit-identical stream."""
    return np.random.default_rng(seed)


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product with explicit dimension validation."""
    if m.ndim != 2 or v.ndim != 1:
        raise ConfigError(f"matvec expects a matrix and a vector, got shapes {m.shape} and {v.shape}")
    if m.shape[1] != v.shape[0]:
        raise ConfigError(f"matvec dimension mismatch: matrix {m.shape} vs vector of length {v.shape[0]}")
    return m @ v


def sigmoid(z: np.ndarray) -> np.ndarray:
    # exp may overflow for very negative z; the result still saturates to 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def activate(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    if kind is ActivationKind.SIGMOID:
        return sigmoid(z)
    return np.maximum(z, 0.0)


def activate_deriv(kind: ActivationKind, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Derivative of the activation, given both pre-activation and output.

    The sigmoid derivative is computed from the cached output as y(1-y),
    which is exactly consistent with the forward value. The ReLU
    derivative at z == 0 is defined as 1.
    """
    if kind is ActivationKind.SIGMOID:
        return y * (1.0 - y)
    return np.where(z >= 0.0, 1.0, 0.0)


def sample_normal(rng: np.random.Generator, mean: float, variance: float, n: int) -> np.ndarray:
    """n independent draws from Normal(mean, variance)."""
    if variance <= 0.0:
        raise ConfigError(f"variance must be positive, got {variance}")
    return rng.normal(mean, np.sqrt(variance), size=n)
