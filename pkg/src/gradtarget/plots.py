"""Figure rendering for training runs and target dynamics."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def training_curves(records, out_path) -> None:
    """Accuracy and cost curves from per-epoch metrics records."""
    epochs = [r["epoch"] for r in records]
    fig, (ax_acc, ax_cost) = plt.subplots(1, 2, figsize=(10, 4))
    ax_acc.plot(epochs, [r["train_accuracy"] for r in records], marker="o", label="train")
    ax_acc.plot(epochs, [r["test_accuracy"] for r in records], marker="s", label="test")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.0)
    ax_acc.legend()
    ax_acc.grid(True, alpha=0.3)
    ax_cost.plot(epochs, [r["mean_output_cost"] for r in records], marker="o",
                 label="output cost")
    layered = [r for r in records if r.get("mean_layer_costs")]
    if layered:
        num_layers = len(layered[0]["mean_layer_costs"])
        for l in range(num_layers - 1):
            ax_cost.plot([r["epoch"] for r in layered],
                         [r["mean_layer_costs"][l] for r in layered],
                         linestyle="--", alpha=0.7, label=f"layer {l + 1} cost")
    ax_cost.set_xlabel("epoch")
    ax_cost.set_ylabel("mean local cost")
    ax_cost.legend()
    ax_cost.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def target_convergence(history, out_path) -> None:
    """Evolution of a scalar target and its local cost over Euler steps."""
    steps = range(len(history["costs"]))
    values = [it[0] for it in history["iterates"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(steps, values, marker="o", markersize=2, label="target value")
    ax.set_xlabel("Euler step")
    ax.set_ylabel("target value")
    ax2 = ax.twinx()
    ax2.plot(steps, history["costs"], color="tab:red", marker="^", markersize=2,
             label="local cost")
    ax2.set_ylabel("local cost")
    ax2.set_yscale("log")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="center right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
