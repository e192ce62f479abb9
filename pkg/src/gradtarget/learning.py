"""Target propagation training: Euler target solver and weight updates.

Each non-input layer l carries a local quadratic cost
C_l = sum_i 0.5*(yhat_l[i] - y_l[i])^2 against a per-neuron target
yhat_l. The output-layer target is the one-hot label; hidden targets
are obtained by integrating the gradient flow of the next layer's
local cost with the explicit Euler method:

    y^t = y^{t-1} - tau * dC_{l+1}/dy_l

recomputing z_{l+1} and y_{l+1} from the current iterate at every
step while yhat_{l+1} stays frozen. Two target conventions are
supported (see TargetSolverConfig.displacement_targets): the final
Euler iterate y^T, or the accumulated displacement y^T - y^0. The
displacement form at T=1 is the one whose weight updates decompose
exactly into a backpropagation term plus Hebbian activity terms (see
the analysis module); the iterate form is the training default.

A plain backpropagation updater on the output cost is included as a
baseline. Mini-batch size is one: weight deltas are accumulated over
the backward sweep of a single example and applied afterwards.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError
from .mathcore import ActivationKind, activate, activate_deriv
from .network import Network, ForwardTrace, forward


@dataclass
class TargetSolverConfig:
    tau: float = 1.0
    steps: int = 1
    # optional per-layer overrides, keyed by 1-based layer index
    tau_per_layer: dict[int, float] = field(default_factory=dict)
    steps_per_layer: dict[int, int] = field(default_factory=dict)
    # False: target is the final Euler iterate y^T (anchored at the
    # current activation). True: target is the displacement y^T - y^0.
    displacement_targets: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")

    def tau_for(self, layer: int) -> float:
        return self.tau_per_layer.get(layer, self.tau)

    def steps_for(self, layer: int) -> int:
        return self.steps_per_layer.get(layer, self.steps)


@dataclass
class TrainConfig:
    eta: float = 0.01
    epochs: int = 1
    seed: int = 0
    updater: str = "targetprop"  # or "backprop"
    shuffle: bool = True
    eta_per_layer: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.eta < 0:
            # eta = 0 is allowed for no-op diagnostics runs
            raise ConfigError(f"eta must be non-negative, got {self.eta}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.updater not in ("targetprop", "backprop"):
            raise ConfigError(f"unknown updater {self.updater!r}")

    def eta_for(self, layer: int) -> float:
        return self.eta_per_layer.get(layer, self.eta)


def local_cost(y_hat: np.ndarray, y: np.ndarray) -> float:
    """Quadratic per-layer cost: sum_i 0.5*(yhat_i - y_i)^2."""
    d = y_hat - y
    return float(0.5 * np.dot(d, d))


def cost_gradient_wrt_input(w_next: np.ndarray, kind_next: ActivationKind,
                            y_hat_next: np.ndarray, y: np.ndarray) -> np.ndarray:
    """dC_{l+1}/dy_l at the point y (= y_l), with yhat_{l+1} frozen."""
    z_next = w_next @ y
    y_next = activate(kind_next, z_next)
    fp = activate_deriv(kind_next, z_next, y_next)
    return -(w_next.T @ ((y_hat_next - y_next) * fp))


def solve_target(y_start: np.ndarray, w_next: np.ndarray, kind_next: ActivationKind,
                 y_hat_next: np.ndarray, tau: float, steps: int,
                 displacement: bool = False, layer: int | None = None,
                 record: bool = False):
    """Euler-integrate the gradient flow of the next layer's local cost.

    Returns the target vector, or (target, history) when record=True;
    history holds the iterates and the local cost after every step.
    """
    y = y_start.astype(float, copy=True)
    iterates = [y.copy()] if record else None
    costs = []
    if record:
        z0 = w_next @ y
        costs.append(local_cost(y_hat_next, activate(kind_next, z0)))
    for t in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            grad = cost_gradient_wrt_input(w_next, kind_next, y_hat_next, y)
            y = y - tau * grad
        if not np.all(np.isfinite(y)):
            where = f"layer {layer}" if layer is not None else "unknown layer"
            raise DivergenceError(
                f"non-finite target iterate at {where}, Euler step {t} (tau={tau})",
                layer=layer, step=t)
        if record:
            iterates.append(y.copy())
            z = w_next @ y
            costs.append(local_cost(y_hat_next, activate(kind_next, z)))
    target = (y - y_start) if displacement else y
    if record:
        return target, {"iterates": iterates, "costs": costs}
    return target


def _layer_delta(eta: float, gap: np.ndarray, fp: np.ndarray, y_prev: np.ndarray) -> np.ndarray:
    """-eta * dC_l/dw_l = eta * (yhat_l - y_l) * f'(z_l) outer y_{l-1}."""
    return eta * np.outer(gap * fp, y_prev)


def targetprop_step(net: Network, x: np.ndarray, label_onehot: np.ndarray,
                    solver: TargetSolverConfig, train: TrainConfig,
                    trace: ForwardTrace | None = None):
    """One backward sweep of gradient target propagation for one example.

    Returns (deltas, targets, layer_costs). Deltas are not applied;
    targets[l] is the target of layer l (index 0 unused), layer_costs[l]
    is C_l at the trace activations.
    """
    if trace is None:
        trace = forward(net, x)
    L = net.depth
    targets: list[np.ndarray | None] = [None] * (L + 1)
    targets[L] = label_onehot
    deltas: list[np.ndarray | None] = [None] * L
    layer_costs: list[float | None] = [None] * (L + 1)
    for l in range(L, 0, -1):
        k = l - 1
        gap = targets[l] - trace.y[l]
        layer_costs[l] = float(0.5 * np.dot(gap, gap))
        fp = activate_deriv(net.activations[k], trace.z[l], trace.y[l])
        deltas[k] = _layer_delta(train.eta_for(l), gap, fp, trace.y[l - 1])
        if l > 1:
            targets[l - 1] = solve_target(
                trace.y[l - 1], net.weights[k], net.activations[k], targets[l],
                tau=solver.tau_for(l - 1), steps=solver.steps_for(l - 1),
                displacement=solver.displacement_targets, layer=l - 1)
    return deltas, targets, layer_costs


def backprop_step(net: Network, x: np.ndarray, label_onehot: np.ndarray,
                  train: TrainConfig, trace: ForwardTrace | None = None):
    """Chain-rule gradient of the output cost, scaled by -eta per layer."""
    if trace is None:
        trace = forward(net, x)
    L = net.depth
    deltas: list[np.ndarray | None] = [None] * L
    # delta holds -dC_L/dz_l
    fp = activate_deriv(net.activations[L - 1], trace.z[L], trace.y[L])
    delta = (label_onehot - trace.y[L]) * fp
    deltas[L - 1] = train.eta_for(L) * np.outer(delta, trace.y[L - 1])
    for l in range(L - 1, 0, -1):
        k = l - 1
        fp = activate_deriv(net.activations[k], trace.z[l], trace.y[l])
        delta = (net.weights[l].T @ delta) * fp
        deltas[k] = train.eta_for(l) * np.outer(delta, trace.y[l - 1])
    return deltas


def apply_deltas(net: Network, deltas) -> None:
    for w, d in zip(net.weights, deltas):
        w += d


def train_epoch(net: Network, dataset, solver: TargetSolverConfig,
                train: TrainConfig, rng: np.random.Generator) -> dict:
    """One pass over the dataset, updating weights after every example.

    Training accuracy is measured on the pre-update forward pass of
    each example. Returns a metrics dict for the epoch.
    """
    n = len(dataset)
    if n == 0:
        raise ConfigError("cannot train on an empty dataset")
    order = rng.permutation(n) if train.shuffle else np.arange(n)
    eye = np.eye(dataset.num_classes)
    correct = 0
    output_cost_sum = 0.0
    layer_cost_sums = np.zeros(net.depth + 1)
    t0 = time.perf_counter()
    for idx in order:
        x = dataset.features[idx]
        label = int(dataset.labels[idx])
        onehot = eye[label]
        with np.errstate(over="ignore", invalid="ignore"):
            trace = forward(net, x)
        if int(np.argmax(trace.y[-1])) == label:
            correct += 1
        with np.errstate(over="ignore", invalid="ignore"):
            if train.updater == "targetprop":
                deltas, _, costs = targetprop_step(net, x, onehot, solver, train, trace=trace)
                for l in range(1, net.depth + 1):
                    layer_cost_sums[l] += costs[l]
                output_cost_sum += costs[net.depth]
            else:
                deltas = backprop_step(net, x, onehot, train, trace=trace)
                output_cost_sum += local_cost(onehot, trace.y[-1])
            apply_deltas(net, deltas)
        for w in net.weights:
            if not np.all(np.isfinite(w)):
                raise DivergenceError(
                    f"non-finite weights after example {int(idx)}")
    wall = time.perf_counter() - t0
    metrics = {
        "train_accuracy": correct / n,
        "mean_output_cost": output_cost_sum / n,
        "wall_seconds": wall,
    }
    if train.updater == "targetprop":
        metrics["mean_layer_costs"] = [float(layer_cost_sums[l] / n)
                                       for l in range(1, net.depth + 1)]
    return metrics
