"""Machine checks of the learning rule's algebraic structure.

The single-step (T=1, tau=eta=1) target-propagation weight change for
layer l, with displacement targets, equals the exact gradient of a
potential: the output cost plus a quadratic activity term for every
layer between l and the output,

    dw_l = -d/dw_l ( C_L + sum_{i=l}^{L-1} 0.5*||y_i||^2 ).

The output-cost part is the backpropagation update; each activity
term chains down to a (non-linear) Hebbian contribution. This module
computes both sides independently and reports the worst disagreement,
and provides the central finite-difference oracle used to validate
every analytic gradient in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .initialization import initialize_network
from .learning import TargetSolverConfig, TrainConfig, targetprop_step
from .mathcore import ActivationKind, activate_deriv, make_rng
from .network import Network, ForwardTrace, forward, default_activations

DECOMPOSITION_TOL = 1e-10
FD_RELATIVE_TOL = 1e-6
FD_DEFAULT_STEP = 1e-5


@dataclass
class DecompositionReport:
    backprop_terms: list[np.ndarray]
    hebbian_terms: list[list[np.ndarray]]
    closed_form_deltas: list[np.ndarray]
    algorithm_deltas: list[np.ndarray]
    max_abs_diff: float

    @property
    def passed(self) -> bool:
        return self.max_abs_diff < DECOMPOSITION_TOL


def _fprime(net: Network, trace: ForwardTrace, l: int) -> np.ndarray:
    return activate_deriv(net.activations[l - 1], trace.z[l], trace.y[l])


def closed_form_delta(net: Network, trace: ForwardTrace, label_onehot: np.ndarray,
                      l: int) -> np.ndarray:
    """-d/dw_l of (C_L + sum_{i=l}^{L-1} 0.5*||y_i||^2) by exact chain rule."""
    L = net.depth
    h = label_onehot - trace.y[L]  # -dPotential/dy_L
    for i in range(L - 1, l - 1, -1):
        h = net.weights[i].T @ (h * _fprime(net, trace, i + 1)) - trace.y[i]
    return np.outer(h * _fprime(net, trace, l), trace.y[l - 1])


def backprop_delta(net: Network, trace: ForwardTrace, label_onehot: np.ndarray,
                   l: int) -> np.ndarray:
    """-dC_L/dw_l by exact chain rule (eta = 1)."""
    L = net.depth
    h = label_onehot - trace.y[L]
    for i in range(L - 1, l - 1, -1):
        h = net.weights[i].T @ (h * _fprime(net, trace, i + 1))
    return np.outer(h * _fprime(net, trace, l), trace.y[l - 1])


def hebbian_term(net: Network, trace: ForwardTrace, l: int) -> np.ndarray:
    """Entry (i,j) = y_l[i] * f'(z_l[i]) * y_{l-1}[j]: post- times
    pre-synaptic activity through the activation slope."""
    return np.outer(trace.y[l] * _fprime(net, trace, l), trace.y[l - 1])


def activity_potential_delta(net: Network, trace: ForwardTrace, l: int, i: int,
                             sign: float = 1.0) -> np.ndarray:
    """-d/dw_l of 0.5*||y_i||^2 chained through layers l..i (i >= l).

    For i == l this is minus the Hebbian term. sign=-1 corrupts the
    contribution for negative-control tests.
    """
    g = -trace.y[i] * sign
    for j in range(i, l, -1):
        g = net.weights[j - 1].T @ (g * _fprime(net, trace, j))
    return np.outer(g * _fprime(net, trace, l), trace.y[l - 1])


def verify_decomposition(net: Network, x: np.ndarray, label_onehot: np.ndarray,
                         mutate_hebbian_sign: bool = False) -> DecompositionReport:
    """Compare algorithm deltas (T=1, tau=eta=1, displacement targets)
    against the closed-form potential gradient, layer by layer."""
    trace = forward(net, x)
    solver = TargetSolverConfig(tau=1.0, steps=1, displacement_targets=True)
    train = TrainConfig(eta=1.0, epochs=1, seed=0)
    algo, _, _ = targetprop_step(net, x, label_onehot, solver, train, trace=trace)
    L = net.depth
    hebbian_sign = -1.0 if mutate_hebbian_sign else 1.0
    closed, bp_terms, heb_terms = [], [], []
    max_diff = 0.0
    for l in range(1, L + 1):
        bp = backprop_delta(net, trace, label_onehot, l)
        terms = [activity_potential_delta(net, trace, l, i, sign=hebbian_sign)
                 for i in range(l, L)]
        cf = bp + sum(terms) if terms else bp
        bp_terms.append(bp)
        heb_terms.append(terms)
        closed.append(cf)
        max_diff = max(max_diff, float(np.max(np.abs(algo[l - 1] - cf))))
    return DecompositionReport(
        backprop_terms=bp_terms, hebbian_terms=heb_terms,
        closed_form_deltas=closed, algorithm_deltas=algo,
        max_abs_diff=max_diff)


def fd_gradient(cost_fn, params: np.ndarray, h: float = FD_DEFAULT_STEP) -> np.ndarray:
    """Central finite differences of cost_fn over a flat parameter array."""
    p = params.astype(float).ravel()
    grad = np.empty_like(p)
    for i in range(p.size):
        plus = p.copy()
        minus = p.copy()
        plus[i] += h
        minus[i] -= h
        fp = cost_fn(plus.reshape(params.shape))
        fm = cost_fn(minus.reshape(params.shape))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError("non-finite cost during finite differencing")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(params.shape)


def random_network(rng: np.random.Generator, min_depth=2, max_depth=5,
                   max_width=8, relu_first=False) -> Network:
    """Small random net for verification sweeps."""
    depth = int(rng.integers(min_depth, max_depth + 1))
    sizes = [int(rng.integers(1, max_width + 1)) for _ in range(depth + 1)]
    acts = default_activations(depth, first_layer_relu=relu_first)
    return initialize_network(sizes, acts, rng)


def _relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(b))), 1e-8)
    return float(np.max(np.abs(a - b))) / scale


def run_decomposition_suite(seed: int = 0, num_nets: int = 100,
                            mutate_hebbian_sign: bool = False) -> list[dict]:
    """Decomposition identity over random nets; half ReLU-first."""
    rng = make_rng(seed)
    results = []
    for i in range(num_nets):
        net = random_network(rng, relu_first=(i % 2 == 1))
        x = rng.random(net.layer_sizes[0])
        label = np.zeros(net.layer_sizes[-1])
        label[int(rng.integers(net.layer_sizes[-1]))] = 1.0
        report = verify_decomposition(net, x, label,
                                      mutate_hebbian_sign=mutate_hebbian_sign)
        results.append({
            "index": i,
            "sizes": net.layer_sizes,
            "relu_first": i % 2 == 1,
            "max_abs_diff": report.max_abs_diff,
            "passed": report.passed,
        })
    return results


def run_gradient_check_suite(seed: int = 0, num_nets: int = 50,
                             h: float = FD_DEFAULT_STEP) -> list[dict]:
    """Analytic layer-cost gradients vs central finite differences.

    Checks dC_l/dw_l and dC_{l+1}/dy_l on small random nets. Inputs
    are redrawn until no ReLU pre-activation sits within 1e-3 of its
    kink, keeping the finite differences well defined.
    """
    rng = make_rng(seed)
    results = []
    for i in range(num_nets):
        relu_first = i % 2 == 1
        net = random_network(rng, min_depth=2, max_depth=4, max_width=6,
                             relu_first=relu_first)
        for _ in range(100):
            x = rng.random(net.layer_sizes[0])
            trace = forward(net, x)
            if not relu_first or np.min(np.abs(trace.z[1])) > 1e-3:
                break
        L = net.depth
        # random frozen targets for every layer, away from the activations
        targets = [None] + [rng.random(net.layer_sizes[l]) for l in range(1, L + 1)]
        worst = 0.0
        for l in range(1, L + 1):
            k = l - 1
            # dC_l/dw_l with y_{l-1} and yhat_l frozen
            gap = targets[l] - trace.y[l]
            analytic_w = -np.outer(gap * _fprime(net, trace, l), trace.y[l - 1])

            def cost_w(w, k=k, l=l):
                from .mathcore import activate
                z = w @ trace.y[l - 1]
                y = activate(net.activations[k], z)
                d = targets[l] - y
                return 0.5 * float(np.dot(d, d))

            fd_w = fd_gradient(cost_w, net.weights[k], h=h)
            worst = max(worst, _relative_error(analytic_w, fd_w))

            if l < L:
                # dC_{l+1}/dy_l with w_{l+1} and yhat_{l+1} frozen
                from .learning import cost_gradient_wrt_input
                analytic_y = cost_gradient_wrt_input(
                    net.weights[l], net.activations[l], targets[l + 1], trace.y[l])

                def cost_y(y, l=l):
                    from .mathcore import activate
                    z = net.weights[l] @ y
                    yn = activate(net.activations[l], z)
                    d = targets[l + 1] - yn
                    return 0.5 * float(np.dot(d, d))

                fd_y = fd_gradient(cost_y, trace.y[l], h=h)
                worst = max(worst, _relative_error(analytic_y, fd_y))
        results.append({
            "index": i,
            "sizes": net.layer_sizes,
            "relu_first": relu_first,
            "max_relative_error": worst,
            "passed": worst < FD_RELATIVE_TOL,
        })
    return results
