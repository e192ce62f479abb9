"""Command line entry point: train, eval, verify, inspect-init.

Run configuration comes from an optional flat key=value config file
plus flags; flags win. For training, tau, eta, epochs and seed must
be given explicitly (no silent defaults) so every run is replayable.

Exit codes: 0 ok, 1 verification failure, 2 config/data error,
3 numeric divergence.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .data import Dataset, load_cifar10, load_idx, split_train_test
from .errors import ConfigError, DataFormatError, DivergenceError
from .initialization import initialize_network, layer_variances, sigmoid_uncertainty_moments
from .learning import TargetSolverConfig, TrainConfig, solve_target, train_epoch
from .mathcore import ActivationKind, make_rng, sigmoid
from .network import (Network, default_activations, forward, load_checkpoint,
                      predict_class, save_checkpoint)

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

PROTOCOL_TRAIN_SIZE = 50_000

IDX_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}
CIFAR_TRAIN_BATCHES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST_BATCH = "test_batch.bin"


def parse_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def parse_arch(text) -> tuple[int, ...]:
    try:
        sizes = tuple(int(p) for p in str(text).split("-"))
    except ValueError as exc:
        raise ConfigError(f"bad architecture {text!r}, expected e.g. 784-100-10") from exc
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ConfigError(f"bad architecture {text!r}: need >= 2 positive sizes")
    return sizes


def _merge(args, config: dict, key: str, cast=str, default=None):
    """Flag beats config file beats default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        raw = config[key]
        try:
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key}={raw!r}: {exc}") from exc
    return default


def _require(value, key: str):
    if value is None:
        raise ConfigError(f"{key} must be set explicitly (flag --{key.replace('_', '-')} "
                          f"or config key {key})")
    return value


def _data_dir(args, config) -> Path:
    d = _merge(args, config, "data_dir", str,
               os.environ.get("GRADPROP_DATA_DIR", "."))
    return Path(d)


def load_run_datasets(args, config) -> tuple[Dataset, Dataset]:
    """Resolve train and test datasets from the run configuration."""
    name = _require(_merge(args, config, "dataset"), "dataset")
    if name not in ("mnist", "fashion", "cifar10"):
        raise ConfigError(f"unknown dataset {name!r}, expected mnist, fashion or cifar10")
    base = _data_dir(args, config) / name
    if name in ("mnist", "fashion"):
        paths = {k: Path(_merge(args, config, k, str, base / fname))
                 for k, fname in IDX_FILES.items()}
        train = load_idx(paths["train_images"], paths["train_labels"], name=name)
        test = load_idx(paths["test_images"], paths["test_labels"], name=f"{name}-test")
    else:
        train_batches = _merge(args, config, "cifar_train_batches")
        if train_batches is not None:
            batch_paths = [Path(p) for p in str(train_batches).split(",")]
        else:
            batch_paths = [base / b for b in CIFAR_TRAIN_BATCHES]
        test_batch = Path(_merge(args, config, "cifar_test_batch", str,
                                 base / CIFAR_TEST_BATCH))
        train = load_cifar10(batch_paths, name=name)
        test = load_cifar10([test_batch], name=f"{name}-test")

    # the experimental protocol trains on the first 50000 records
    train_size = _merge(args, config, "train_size", int)
    if train_size is None and len(train) > PROTOCOL_TRAIN_SIZE:
        train_size = PROTOCOL_TRAIN_SIZE
    if train_size is not None:
        train, _ = split_train_test(train, train_size, 0)

    limit_train = _merge(args, config, "limit_train", int)
    if limit_train is not None:
        if limit_train < 1 or limit_train > len(train):
            raise ConfigError(f"limit_train {limit_train} outside 1..{len(train)}")
        train, _ = split_train_test(train, limit_train, 0)
    limit_test = _merge(args, config, "limit_test", int)
    if limit_test is not None:
        if limit_test < 1 or limit_test > len(test):
            raise ConfigError(f"limit_test {limit_test} outside 1..{len(test)}")
        test, _ = split_train_test(test, limit_test, 0)
    return train, test


def _resolve_activations(kind: str, num_weight_layers: int):
    if kind == "relu-first":
        return default_activations(num_weight_layers, first_layer_relu=True)
    if kind == "all-sigmoid":
        return default_activations(num_weight_layers, first_layer_relu=False)
    raise ConfigError(f"unknown activations {kind!r}, expected relu-first or all-sigmoid")


def evaluate(net: Network, dataset: Dataset, workers: int = 1) -> tuple[int, int]:
    """Read-only accuracy over a dataset; results reduced in index order."""
    n = len(dataset)
    if n == 0:
        raise ConfigError("cannot evaluate on an empty split")

    def score(chunk):
        correct = 0
        for i in chunk:
            if predict_class(net, dataset.features[i]) == int(dataset.labels[i]):
                correct += 1
        return correct

    if workers <= 1:
        return score(range(n)), n
    chunks = np.array_split(np.arange(n), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        counts = list(pool.map(score, chunks))
    return sum(counts), n


def cmd_train(args) -> int:
    config = parse_config_file(args.config) if args.config else {}
    train_ds, test_ds = load_run_datasets(args, config)

    arch = parse_arch(_require(_merge(args, config, "arch"), "arch"))
    if arch[0] != train_ds.feature_dim:
        raise ConfigError(f"architecture input size {arch[0]} does not match "
                          f"dataset feature dim {train_ds.feature_dim}")
    if arch[-1] != train_ds.num_classes:
        raise ConfigError(f"architecture output size {arch[-1]} does not match "
                          f"{train_ds.num_classes} classes")
    activations = _resolve_activations(
        _merge(args, config, "activations", str, "relu-first"), len(arch) - 1)

    tau = _require(_merge(args, config, "tau", float), "tau")
    eta = _require(_merge(args, config, "eta", float), "eta")
    epochs = _require(_merge(args, config, "epochs", int), "epochs")
    seed = _require(_merge(args, config, "seed", int), "seed")
    steps = _merge(args, config, "steps", int, 1)
    updater = _merge(args, config, "updater", str, "targetprop")
    shuffle = _merge(args, config, "shuffle", bool, True)
    displacement = _merge(args, config, "displacement_targets", bool, False)
    eval_workers = _merge(args, config, "eval_workers", int, 1)
    metrics_path = Path(_merge(args, config, "metrics", str, "metrics.jsonl"))
    checkpoint_path = Path(_merge(args, config, "checkpoint", str, "checkpoint.gtpnet"))

    solver = TargetSolverConfig(tau=tau, steps=steps, displacement_targets=displacement)
    train_cfg = TrainConfig(eta=eta, epochs=epochs, seed=seed, updater=updater,
                            shuffle=shuffle)

    rng = make_rng(seed)
    net = initialize_network(arch, activations, rng)

    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    metrics_path.write_text("")  # fresh run; records are appended per epoch
    records = []
    for epoch in range(1, epochs + 1):
        epoch_metrics = train_epoch(net, train_ds, solver, train_cfg, rng)
        correct, total = evaluate(net, test_ds, workers=eval_workers)
        record = {
            "epoch": epoch,
            "train_accuracy": epoch_metrics["train_accuracy"],
            "test_accuracy": correct / total,
            "mean_output_cost": epoch_metrics["mean_output_cost"],
        }
        if "mean_layer_costs" in epoch_metrics:
            record["mean_layer_costs"] = epoch_metrics["mean_layer_costs"]
        records.append(record)
        with open(metrics_path, "a") as f:
            f.write(json.dumps(record) + "\n")
        if checkpoint_path.exists():
            checkpoint_path.replace(checkpoint_path.with_name(checkpoint_path.name + ".prev"))
        save_checkpoint(net, checkpoint_path)
        # wall time is reported here, not in the metrics files, so that
        # identical runs produce byte-identical artifacts
        print(f"epoch {epoch}/{epochs}  train_acc={record['train_accuracy']:.4f}  "
              f"test_acc={record['test_accuracy']:.4f}  "
              f"output_cost={record['mean_output_cost']:.6f}  "
              f"wall={epoch_metrics['wall_seconds']:.1f}s")

    csv_path = metrics_path.with_suffix(".csv")
    arch_str = "-".join(str(s) for s in arch)
    with open(csv_path, "w") as f:
        f.write("network,score,tau,eta,epochs,updater,seed\n")
        f.write(f"{arch_str},{records[-1]['test_accuracy']:.4f},{tau:g},{eta:g},"
                f"{epochs},{updater},{seed}\n")

    from .plots import training_curves
    figure_path = metrics_path.with_name(metrics_path.stem + "_curves.png")
    training_curves(records, figure_path)
    print(f"final test accuracy {records[-1]['test_accuracy']:.4f}; "
          f"wrote {metrics_path}, {csv_path}, {figure_path}, {checkpoint_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = parse_config_file(args.config) if args.config else {}
    checkpoint = _require(_merge(args, config, "checkpoint"), "checkpoint")
    net = load_checkpoint(checkpoint)
    train_ds, test_ds = load_run_datasets(args, config)
    dataset = train_ds if args.split == "train" else test_ds
    if net.layer_sizes[0] != dataset.feature_dim:
        raise ConfigError(f"checkpoint input size {net.layer_sizes[0]} does not match "
                          f"dataset feature dim {dataset.feature_dim}")
    if net.layer_sizes[-1] != dataset.num_classes:
        raise ConfigError(f"checkpoint output size {net.layer_sizes[-1]} does not match "
                          f"{dataset.num_classes} classes")
    workers = _merge(args, config, "eval_workers", int, 1)
    correct, total = evaluate(net, dataset, workers=workers)
    print(f"accuracy {correct / total:.4f} ({correct}/{total}) on {dataset.name}")
    return EXIT_OK


def cmd_verify(args) -> int:
    decomp = analysis.run_decomposition_suite(
        seed=args.seed, num_nets=args.nets,
        mutate_hebbian_sign=args.mutate_hebbian_sign)
    grads = analysis.run_gradient_check_suite(seed=args.seed, num_nets=args.grad_nets)

    worst_decomp = max(r["max_abs_diff"] for r in decomp)
    worst_grad = max(r["max_relative_error"] for r in grads)
    print(f"{'check':<28}{'cases':>8}{'worst':>14}{'tolerance':>12}{'result':>8}")
    decomp_ok = all(r["passed"] for r in decomp)
    grad_ok = all(r["passed"] for r in grads)
    print(f"{'decomposition identity':<28}{len(decomp):>8}{worst_decomp:>14.3e}"
          f"{analysis.DECOMPOSITION_TOL:>12.0e}{'pass' if decomp_ok else 'FAIL':>8}")
    print(f"{'gradient vs central FD':<28}{len(grads):>8}{worst_grad:>14.3e}"
          f"{analysis.FD_RELATIVE_TOL:>12.0e}{'pass' if grad_ok else 'FAIL':>8}")

    if args.figure:
        # two-neuron chain target dynamics, rendered from the Euler trajectory
        w = np.array([[1.0]])
        _, history = solve_target(
            np.array([0.5]), w, ActivationKind.SIGMOID, np.array([1.0]),
            tau=1.0, steps=2000, record=True)
        from .plots import target_convergence
        target_convergence(history, args.figure)
        print(f"wrote {args.figure}")

    if decomp_ok and grad_ok:
        return EXIT_OK
    for r in decomp:
        if not r["passed"]:
            print(f"FAIL decomposition net {r['index']} sizes {r['sizes']} "
                  f"max_abs_diff {r['max_abs_diff']:.3e} (replay: --seed {args.seed})")
    for r in grads:
        if not r["passed"]:
            print(f"FAIL gradient net {r['index']} sizes {r['sizes']} "
                  f"relative error {r['max_relative_error']:.3e} (replay: --seed {args.seed})")
    return EXIT_VERIFY_FAIL


def cmd_inspect_init(args) -> int:
    arch = parse_arch(args.arch)
    variances = layer_variances(arch)
    rng = make_rng(args.seed)
    moments = sigmoid_uncertainty_moments()
    print(f"uncertainty moments: mean {moments.mean}, variance {moments.variance}")
    print(f"{'layer':<8}{'fan-in':>8}{'theoretical':>16}{'(float)':>14}"
          f"{'empirical var':>16}{'empirical mean':>16}")
    for k, var in enumerate(variances):
        fan = arch[k]
        shown = f"48/{35 * fan}" if k == 0 else f"16/{11 * fan}"
        draws = rng.normal(0.0, float(np.sqrt(float(var))), size=args.draws)
        print(f"{k + 1:<8}{fan:>8}{shown:>16}{float(var):>14.6e}"
              f"{draws.var(ddof=1):>16.6e}{draws.mean():>16.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradtarget",
                                     description="Train and inspect networks "
                                                 "learned by gradient target propagation")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--dataset", choices=["mnist", "fashion", "cifar10"])
        p.add_argument("--data-dir", dest="data_dir",
                       help="dataset root (default: $GRADPROP_DATA_DIR)")
        p.add_argument("--limit-train", dest="limit_train", type=int,
                       help="train on the first N examples only")
        p.add_argument("--limit-test", dest="limit_test", type=int,
                       help="evaluate on the first N test examples only")
        p.add_argument("--eval-workers", dest="eval_workers", type=int)

    p_train = sub.add_parser("train", help="train a network")
    add_data_flags(p_train)
    p_train.add_argument("--arch", help='layer sizes, e.g. "784-100-10"')
    p_train.add_argument("--activations", choices=["relu-first", "all-sigmoid"])
    p_train.add_argument("--tau", type=float, help="Euler step size")
    p_train.add_argument("--steps", type=int, help="Euler iterations per target (default 1)")
    p_train.add_argument("--eta", type=float, help="learning rate")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--updater", choices=["targetprop", "backprop"])
    p_train.add_argument("--metrics", help="metrics output path (JSON lines)")
    p_train.add_argument("--checkpoint", help="checkpoint output path")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    add_data_flags(p_eval)
    p_eval.add_argument("--checkpoint", help="checkpoint to load")
    p_eval.add_argument("--split", choices=["train", "test"], default="test")
    p_eval.set_defaults(func=cmd_eval)

    p_verify = sub.add_parser("verify", help="run decomposition and gradient checks")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--nets", type=int, default=100,
                          help="random nets for the decomposition check")
    p_verify.add_argument("--grad-nets", dest="grad_nets", type=int, default=50,
                          help="random nets for the finite-difference check")
    p_verify.add_argument("--mutate-hebbian-sign", action="store_true",
                          help="negative control: corrupt the Hebbian sign")
    p_verify.add_argument("--figure", help="write a target-convergence figure here")
    p_verify.set_defaults(func=cmd_verify)

    p_init = sub.add_parser("inspect-init", help="report initialization variances")
    p_init.add_argument("--arch", required=True)
    p_init.add_argument("--seed", type=int, default=0)
    p_init.add_argument("--draws", type=int, default=1_000_000)
    p_init.set_defaults(func=cmd_inspect_init)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
