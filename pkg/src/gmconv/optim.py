"""Adam optimizer, training loop, and evaluation metrics.

Training is per-example (batch size 1): graphs vary in size, so one graph
is the natural update unit.  Everything is deterministic under a fixed
seed: example shuffling uses a dedicated generator, parameter updates are
in-place on the arrays returned by the model, and the best-epoch weights
(by validation accuracy) are restored at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TrainError",
    "NumericalError",
    "AdamState",
    "adam_step",
    "TrainConfig",
    "train",
    "evaluate",
]


class TrainError(ValueError):
    """Invalid training configuration or incompatible dataset."""


class NumericalError(RuntimeError):
    """Loss or gradient became non-finite."""


class AdamState:
    """First/second moment estimates plus the step counter."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise TrainError(f"learning rate must be positive, got {lr}")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update, applied to the params in place."""
    if len(params) != len(state.m) or len(grads) != len(state.m):
        raise TrainError("parameter/gradient count does not match state")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise TrainError(
                f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    return params


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""
    epochs: int = 50
    lr: float = 1e-3
    seed: int = 0
    hops: int = 1
    theta: str = "max"
    filters: tuple = (8, 16, 32)
    filter_vertices: int = 5
    edge_matching: bool = False
    activation: bool = True
    classes: tuple = (0, 1)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise TrainError(f"lr must be positive, got {self.lr}")
        if self.hops < 1:
            raise TrainError(f"hops must be >= 1, got {self.hops}")
        if self.theta not in ("max", "avg"):
            raise TrainError(f"theta must be max or avg, got {self.theta!r}")
        if not self.filters or any(f < 1 for f in self.filters):
            raise TrainError(f"filters must be positive counts, got {self.filters}")


def _examples(dataset):
    return dataset.examples if hasattr(dataset, "examples") else list(dataset)


def evaluate(model, dataset):
    """Argmax-class accuracy plus a confusion-count matrix."""
    examples = _examples(dataset)
    if not examples:
        raise TrainError("cannot evaluate on an empty dataset")
    n_classes = model.config["n_classes"]
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    correct = 0
    for G, label in examples:
        pred = model.predict(G)
        confusion[label, pred] += 1
        if pred == label:
            correct += 1
    return correct / len(examples), confusion


def train(model, train_data, valid_data, config: TrainConfig,
          progress=None):
    """Train in place; returns the per-epoch history.

    History entries are dicts with epoch (1-based), mean train loss, and
    validation accuracy.  The parameters of the best validation epoch
    (first maximum) are restored into the model before returning.
    """
    train_examples = _examples(train_data)
    valid_examples = _examples(valid_data)
    if not train_examples:
        raise TrainError("training set is empty")
    if not valid_examples:
        raise TrainError("validation set is empty")
    sample_graph, sample_label = train_examples[0]
    if sample_graph.d_v != model.config["d_v"]:
        raise TrainError(
            f"dataset d_v={sample_graph.d_v} does not match model "
            f"d_v={model.config['d_v']}")
    if not (0 <= sample_label < model.config["n_classes"]):
        raise TrainError(f"label {sample_label} out of range")

    named = model.parameter_arrays()
    params = [arr for _, arr in named]
    state = AdamState(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    history = []
    best_acc = -1.0
    best_params = None
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_examples))
        total_loss = 0.0
        for idx in order:
            G, label = train_examples[idx]
            loss, grads = model.loss_and_grads(G, label)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, example {idx}")
            adam_step(state, params, grads)
            total_loss += float(loss)
        valid_acc, _ = evaluate(model, valid_examples)
        entry = {
            "epoch": epoch,
            "loss": total_loss / len(train_examples),
            "valid_acc": valid_acc,
        }
        history.append(entry)
        if valid_acc > best_acc:
            best_acc = valid_acc
            best_params = [p.copy() for p in params]
        if progress is not None:
            progress(entry)
    if best_params is not None:
        for p, bp in zip(params, best_params):
            p[...] = bp
    return history
