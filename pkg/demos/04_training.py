"""
Training a graph-convolutional classifier
=========================================

A small end-to-end run on the bundled synthetic two-class digits
(rings vs strokes, same 28x28 format as MNIST).  Swap in real MNIST by
pointing GMCONV_MNIST at a directory with the IDX files.

Expect a couple of minutes on one core; shrink N_TRAIN for a quicker
look.
"""

import numpy as np

import gmconv as gm
from gmconv.data import Dataset, make_splits
from gmconv.network import GraphNetwork
from gmconv.optim import TrainConfig, evaluate, train

N_TRAIN = 120

train_images, train_labels = gm.synthesize_digits(N_TRAIN + 24, seed=0)
test_images, test_labels = gm.synthesize_digits(100, seed=1)
train_set, valid_set, test_set = make_splits(
    train_images, train_labels, test_images, test_labels, limit=N_TRAIN)
print(f"{len(train_set)} train / {len(valid_set)} valid / "
      f"{len(test_set)} test graphs")

# three conv stages of 8, 16 and 32 filters, each followed by ReLU and
# Louvain pooling, then global average pooling into a dense softmax
model = GraphNetwork.build(n_classes=2, d_v=1, filters=(8, 16, 32),
                           filter_vertices=5, hops=1, seed=0)

config = TrainConfig(epochs=5, lr=1e-3, seed=0, filters=(8, 16, 32),
                     filter_vertices=5)
history = train(model, train_set, valid_set, config,
                progress=lambda e: print(
                    f"epoch {e['epoch']}: loss {e['loss']:.4f}, "
                    f"valid acc {e['valid_acc']:.3f}"))

acc, confusion = evaluate(model, test_set)
print(f"\ntest accuracy {acc:.3f}")
print("confusion matrix (rows true, cols predicted):")
print(np.asarray(confusion))

# the CLI wraps the same loop and also writes checkpoint.npz plus
# history.csv:
#   gmconv train --kind synth --limit 120 --epochs 5 --out run/
