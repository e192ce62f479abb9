"""Acceptance suite: one test per gated criterion, each printing a
pass/fail line with its measured value and pinned tolerance.

Criteria that need the real MNIST / Fashion-MNIST / CIFAR-10 files look
for them under $GRADPROP_DATA_DIR (default ./data) and are skipped with
an explicit reason when the files are absent. The full 30-epoch MNIST
reproduction additionally requires GRADPROP_RUN_FULL=1.
"""
import json
import os
import struct
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from gradtarget.analysis import (DECOMPOSITION_TOL, FD_RELATIVE_TOL,
                                 run_decomposition_suite, run_gradient_check_suite)
from gradtarget.cli import evaluate, main
from gradtarget.data import load_idx, load_cifar10, split_train_test
from gradtarget.errors import DataFormatError
from gradtarget.initialization import (hidden_layer_variance, initialize_network,
                                       input_layer_variance,
                                       sigmoid_uncertainty_moments)
from gradtarget.learning import TargetSolverConfig, TrainConfig, solve_target, train_epoch
from gradtarget.mathcore import ActivationKind, make_rng
from gradtarget.network import forward

from conftest import write_idx_pair

DATA_ROOT = Path(os.environ.get("GRADPROP_DATA_DIR", "data"))

MNIST_FILES = {
    "train_images": DATA_ROOT / "mnist" / "train-images-idx3-ubyte",
    "train_labels": DATA_ROOT / "mnist" / "train-labels-idx1-ubyte",
    "test_images": DATA_ROOT / "mnist" / "t10k-images-idx3-ubyte",
    "test_labels": DATA_ROOT / "mnist" / "t10k-labels-idx1-ubyte",
}
FASHION_FILES = {k: Path(str(v).replace("mnist", "fashion", 1))
                 for k, v in MNIST_FILES.items()}
CIFAR_DIR = DATA_ROOT / "cifar10"

needs_mnist = pytest.mark.skipif(
    not all(p.exists() for p in MNIST_FILES.values()),
    reason=f"MNIST IDX files not found under {DATA_ROOT / 'mnist'} "
           f"(set GRADPROP_DATA_DIR); this criterion requires the real dataset")
needs_fashion = pytest.mark.skipif(
    not all(p.exists() for p in FASHION_FILES.values()),
    reason=f"Fashion-MNIST IDX files not found under {DATA_ROOT / 'fashion'}")
needs_cifar = pytest.mark.skipif(
    not all((CIFAR_DIR / f"data_batch_{i}.bin").exists() for i in range(1, 6))
    or not (CIFAR_DIR / "test_batch.bin").exists(),
    reason=f"CIFAR-10 binary batches not found under {CIFAR_DIR}")
needs_full_run = pytest.mark.skipif(
    os.environ.get("GRADPROP_RUN_FULL") != "1",
    reason="full 30-epoch reproduction takes CPU-hours; set GRADPROP_RUN_FULL=1")


def report(criterion, ok, detail):
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion} failed: {detail}"


@pytest.fixture(scope="module")
def mnist():
    train = load_idx(MNIST_FILES["train_images"], MNIST_FILES["train_labels"],
                     name="mnist")
    test = load_idx(MNIST_FILES["test_images"], MNIST_FILES["test_labels"],
                    name="mnist-test")
    return train, test


def train_run(train_ds, test_ds, tau, eta, epochs, seed, updater="targetprop",
              arch=(784, 100, 10)):
    rng = make_rng(seed)
    net = initialize_network(arch, rng=rng)
    solver = TargetSolverConfig(tau=tau, steps=1)
    cfg = TrainConfig(eta=eta, epochs=epochs, seed=seed, updater=updater)
    for _ in range(epochs):
        train_epoch(net, train_ds, solver, cfg, rng)
    correct, total = evaluate(net, test_ds)
    return correct / total


def test_criterion_1_decomposition_identity():
    t0 = time.perf_counter()
    results = run_decomposition_suite(seed=0, num_nets=100)
    elapsed = time.perf_counter() - t0
    worst = max(r["max_abs_diff"] for r in results)
    ok = all(r["passed"] for r in results) and elapsed < 5.0
    report(1, ok, f"100 random nets, worst |algorithm - closed form| = {worst:.3e} "
                  f"(tol {DECOMPOSITION_TOL:.0e}), {elapsed:.2f}s (< 5s)")


def test_criterion_2_gradient_oracle():
    t0 = time.perf_counter()
    results = run_gradient_check_suite(seed=0, num_nets=50, h=1e-5)
    elapsed = time.perf_counter() - t0
    worst = max(r["max_relative_error"] for r in results)
    ok = all(r["passed"] for r in results) and elapsed < 10.0
    report(2, ok, f"50 random nets, worst relative error vs central FD = {worst:.3e} "
                  f"(tol {FD_RELATIVE_TOL:.0e}), {elapsed:.2f}s (< 10s)")


def test_criterion_3_initialization_constants():
    t0 = time.perf_counter()
    rational_ok = all(input_layer_variance(n) == Fraction(48, 35 * n)
                      for n in (1, 784, 3072))
    rational_ok &= all(hidden_layer_variance(n) == Fraction(16, 11 * n)
                       for n in (1, 100, 500))

    # 10^6-draw empirical check against 16/1100
    net = initialize_network((10, 100, 10000), rng=make_rng(5))
    w = net.weights[1].ravel()
    target = 16.0 / 1100.0
    var_err = abs(w.var(ddof=1) - target) / target
    mean_se = abs(w.mean()) / np.sqrt(target / w.size)
    sample_ok = var_err < 0.01 and mean_se < 3.0

    y = np.linspace(0.0, 1.0, 10**6 + 1)
    u = 6.0 * y * (1.0 - y)
    profile = sigmoid_uncertainty_moments()
    mean_err = abs(np.trapezoid(y * u, y) - profile.mean)
    var_q_err = abs(np.trapezoid((y - 0.5) ** 2 * u, y) - profile.variance)
    moments_ok = profile.mean == 0.5 and profile.variance == 0.05 \
        and mean_err < 1e-9 and var_q_err < 1e-9
    elapsed = time.perf_counter() - t0
    ok = rational_ok and sample_ok and moments_ok and elapsed < 5.0
    report(3, ok, f"rational={rational_ok}, empirical var err {var_err:.4f} (< 0.01), "
                  f"mean {mean_se:.2f} SE (< 3), moment quadrature errs "
                  f"{mean_err:.1e}/{var_q_err:.1e} (< 1e-9), {elapsed:.2f}s (< 5s)")


def test_criterion_4_target_dynamics():
    t0 = time.perf_counter()
    w = np.array([[1.0]])
    _, history = solve_target(np.array([0.5]), w, ActivationKind.SIGMOID,
                              np.array([1.0]), tau=1.0, steps=20000, record=True)
    costs = np.array(history["costs"])
    monotone = bool(np.all(np.diff(costs) <= 1e-15))
    elapsed = time.perf_counter() - t0
    ok = monotone and costs[-1] < 1e-4 and elapsed < 1.0
    report(4, ok, f"scalar chain: cost monotone={monotone}, final cost "
                  f"{costs[-1]:.2e} (< 1e-4), {elapsed:.2f}s (< 1s)")


@needs_mnist
def test_criterion_5_mnist_smoke(mnist):
    train_full, test = mnist
    train10k, _ = split_train_test(train_full, 10_000, 0)
    accuracy = train_run(train10k, test, tau=400.0, eta=0.01, epochs=1, seed=12345)
    report(5, accuracy >= 0.88,
           f"784-100-10, tau=400, eta=0.01, 1 epoch on 10k: "
           f"test accuracy {accuracy:.4f} (>= 0.88)")


@needs_mnist
@needs_full_run
def test_criterion_6_mnist_full(mnist):
    train_full, test = mnist
    train50k, _ = split_train_test(train_full, 50_000, 0)
    accuracy = train_run(train50k, test, tau=400.0, eta=0.01, epochs=30, seed=12345)
    ok = abs(accuracy - 0.9721) <= 0.005
    report(6, ok, f"784-100-10, tau=400, eta=0.01, 30 epochs on 50k: "
                  f"test accuracy {accuracy:.4f} (0.9721 +- 0.005)")


@needs_mnist
def test_criterion_7_baseline_parity(mnist):
    train_full, test = mnist
    train10k, _ = split_train_test(train_full, 10_000, 0)
    tp = train_run(train10k, test, tau=400.0, eta=0.01, epochs=1, seed=12345)
    bp = train_run(train10k, test, tau=400.0, eta=0.01, epochs=1, seed=12345,
                   updater="backprop")
    ok = tp >= bp - 0.01
    report(7, ok, f"targetprop {tp:.4f} vs backprop {bp:.4f} "
                  f"(same seed/init, parity within 1 point)")


def test_criterion_8_loader_fidelity(tmp_path):
    # 4-image IDX fixture with hand-picked bytes
    images = np.array([[[0, 255], [128, 64]],
                       [[0, 0], [0, 0]],
                       [[255, 255], [255, 255]],
                       [[1, 2], [3, 4]]], dtype=np.uint8)
    labels = np.array([3, 0, 9, 5], dtype=np.uint8)
    img, lbl = tmp_path / "imgs", tmp_path / "lbls"
    write_idx_pair(img, lbl, images, labels)
    ds = load_idx(img, lbl)
    idx_ok = (ds.labels.tolist() == [3, 0, 9, 5]
              and ds.features[0].tolist() == [0.0, 1.0, 128 / 255.0, 64 / 255.0]
              and np.all(ds.features[2] == 1.0))

    # 2-record CIFAR-10 fixture
    rec0 = bytes([9]) + bytes([255] + [0] * 3071)
    rec1 = bytes([0]) + bytes(list(range(256)) * 12)
    batch = tmp_path / "batch.bin"
    batch.write_bytes(rec0 + rec1)
    cds = load_cifar10([batch])
    cifar_ok = (cds.labels.tolist() == [9, 0] and cds.feature_dim == 3072
                and cds.features[0, 0] == 1.0
                and np.allclose(cds.features[1], np.array(list(range(256)) * 12) / 255.0))

    # malformed inputs: bad magic and truncation raise the data error that
    # the CLI maps to exit code 2
    bad_magic = tmp_path / "badmagic"
    bad_magic.write_bytes(struct.pack(">IIII", 0x12345678, 1, 2, 2) + bytes(4))
    with pytest.raises(DataFormatError):
        load_idx(bad_magic, lbl)
    truncated = tmp_path / "trunc"
    truncated.write_bytes(img.read_bytes()[:-2])
    with pytest.raises(DataFormatError):
        load_idx(truncated, lbl)
    bad_cifar = tmp_path / "badcifar.bin"
    bad_cifar.write_bytes(b"\x00" * 100)
    with pytest.raises(DataFormatError):
        load_cifar10([bad_cifar])

    report(8, idx_ok and cifar_ok,
           "IDX and CIFAR-10 fixtures parse byte-exactly; malformed files rejected")


@needs_mnist
def test_criterion_9_determinism(tmp_path):
    def run(outdir):
        outdir.mkdir()
        rc = main(["train", "--dataset", "mnist", "--data-dir", str(DATA_ROOT),
                   "--arch", "784-100-10", "--tau", "400", "--eta", "0.01",
                   "--epochs", "1", "--seed", "12345", "--limit-train", "10000",
                   "--metrics", str(outdir / "metrics.jsonl"),
                   "--checkpoint", str(outdir / "net.gtpnet")])
        assert rc == 0

    run(tmp_path / "a")
    run(tmp_path / "b")
    same_metrics = ((tmp_path / "a" / "metrics.jsonl").read_bytes()
                    == (tmp_path / "b" / "metrics.jsonl").read_bytes())
    same_csv = ((tmp_path / "a" / "metrics.csv").read_bytes()
                == (tmp_path / "b" / "metrics.csv").read_bytes())
    same_ckpt = ((tmp_path / "a" / "net.gtpnet").read_bytes()
                 == (tmp_path / "b" / "net.gtpnet").read_bytes())
    report(9, same_metrics and same_csv and same_ckpt,
           f"byte-identical: metrics={same_metrics}, csv={same_csv}, "
           f"checkpoint={same_ckpt}")


@needs_fashion
def test_smoke_fashion():
    train_full = load_idx(FASHION_FILES["train_images"], FASHION_FILES["train_labels"],
                          name="fashion")
    test = load_idx(FASHION_FILES["test_images"], FASHION_FILES["test_labels"],
                    name="fashion-test")
    train10k, _ = split_train_test(train_full, 10_000, 0)
    accuracy = train_run(train10k, test, tau=100.0, eta=0.01, epochs=1, seed=12345)
    report("fashion-smoke", accuracy >= 0.75,
           f"784-100-10, tau=100, eta=0.01, 1 epoch on 10k: {accuracy:.4f} (>= 0.75)")


@needs_cifar
def test_smoke_cifar10():
    train = load_cifar10([CIFAR_DIR / f"data_batch_{i}.bin" for i in range(1, 6)],
                         name="cifar10")
    test = load_cifar10([CIFAR_DIR / "test_batch.bin"], name="cifar10-test")
    train10k, _ = split_train_test(train, 10_000, 0)
    accuracy = train_run(train10k, test, tau=50.0, eta=0.001, epochs=1, seed=12345,
                         arch=(3072, 100, 10))
    report("cifar10-smoke", accuracy >= 0.25,
           f"3072-100-10, tau=50, eta=0.001, 1 epoch on 10k: {accuracy:.4f} (>= 0.25)")
