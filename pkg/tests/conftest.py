import struct

import numpy as np
import pytest


def write_idx_pair(images_path, labels_path, images, labels):
    """Write a valid IDX image/label file pair from uint8 arrays."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.tobytes())


def make_synthetic_digits(n, rng, rows=10, cols=10, num_classes=10, noise=30):
    """Learnable image set: each class lights up its own pixel block."""
    images = rng.integers(0, noise, size=(n, rows, cols), dtype=np.uint8)
    labels = rng.integers(0, num_classes, size=n).astype(np.uint8)
    for i, lab in enumerate(labels):
        r = (int(lab) // 5) * 4
        c = (int(lab) % 5) * 2
        images[i, r:r + 4, c:c + 2] = 255
    return images, labels


@pytest.fixture
def synth_data_dir(tmp_path):
    """mnist-style directory layout holding a small synthetic IDX dataset
    with 100-dim features, usable directly by the CLI."""
    rng = np.random.default_rng(7)
    root = tmp_path / "data"
    (root / "mnist").mkdir(parents=True)
    train_imgs, train_labels = make_synthetic_digits(600, rng)
    test_imgs, test_labels = make_synthetic_digits(200, rng)
    write_idx_pair(root / "mnist" / "train-images-idx3-ubyte",
                   root / "mnist" / "train-labels-idx1-ubyte",
                   train_imgs, train_labels)
    write_idx_pair(root / "mnist" / "t10k-images-idx3-ubyte",
                   root / "mnist" / "t10k-labels-idx1-ubyte",
                   test_imgs, test_labels)
    return root
