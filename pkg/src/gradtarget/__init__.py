"""Gradient target propagation: training feed-forward networks by
propagating per-neuron targets computed from local-cost gradient flows,
with uncertainty-maximizing weight initialization."""

from .errors import (ConfigError, DataFormatError, DivergenceError,
                     GradTargetError, VerificationError)
from .mathcore import ActivationKind, make_rng
from .network import Network, ForwardTrace, forward, predict_class
from .initialization import initialize_network, weight_variance, LayerInitSpec
from .learning import (TargetSolverConfig, TrainConfig, local_cost,
                       solve_target, targetprop_step, backprop_step, train_epoch)
from .data import Dataset, load_idx, load_cifar10, split_train_test, one_hot
from .analysis import verify_decomposition, fd_gradient

__version__ = "0.1.0"

__all__ = [
    "ActivationKind", "ConfigError", "DataFormatError", "Dataset",
    "DivergenceError", "ForwardTrace", "GradTargetError", "LayerInitSpec",
    "Network", "TargetSolverConfig", "TrainConfig", "VerificationError",
    "backprop_step", "fd_gradient", "forward", "initialize_network",
    "load_cifar10", "load_idx", "local_cost", "make_rng", "one_hot",
    "predict_class", "solve_target", "split_train_test", "targetprop_step",
    "train_epoch", "verify_decomposition", "weight_variance",
]
