"""Dataset ingestion: MNIST IDX files, image-to-grid-graph conversion,
right-angle rotations, 2-class filtering, superpixel RAG directories, and
a deterministic synthetic image source for machines without MNIST.

Grid graphs use the quarter resolution of the source images: 28x28 inputs
are 2x2 mean-pooled down to 14x14, one vertex per pixel carrying the
intensity, 4-adjacency edges carrying polar displacement attributes.
"""

from __future__ import annotations

import gzip
import os
from dataclasses import dataclass

import numpy as np

from .graphs import AttributedGraph, GraphParseError, load_graph

__all__ = [
    "DataError",
    "Dataset",
    "GridSpec",
    "load_mnist_idx",
    "find_mnist",
    "image_to_grid_graph",
    "rotate_image",
    "build_mixed",
    "filter_classes",
    "load_rag_dataset",
    "synthesize_digits",
    "make_grid_dataset",
    "make_splits",
    "read_pgm",
    "write_pgm",
]

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049


class DataError(ValueError):
    """Malformed or inconsistent dataset input."""


class Dataset:
    """A list of (graph, label) examples belonging to one split."""

    def __init__(self, examples, split, class_filter=None):
        self.examples = list(examples)
        self.split = split
        self.class_filter = None if class_filter is None else tuple(class_filter)
        for _, label in self.examples:
            if label < 0:
                raise DataError(f"negative label {label}")

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def __repr__(self):
        return f"Dataset(split={self.split!r}, n={len(self.examples)})"


@dataclass(frozen=True)
class GridSpec:
    """Quarter-resolution grid layout: 28x28 source, 2x2 mean downsample,
    4-adjacency."""
    side: int = 14
    source_side: int = 28


def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_mnist_idx(images_path, labels_path):
    """Read an IDX image/label file pair into ([0,1] arrays, labels)."""
    with _open_maybe_gzip(images_path) as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise DataError(f"{images_path}: truncated IDX image header")
    magic, count, rows, cols = (int(x) for x in
                                np.frombuffer(raw[:16], dtype=">i4"))
    if magic != IDX_IMAGES_MAGIC:
        raise DataError(
            f"{images_path}: bad magic {magic}, expected {IDX_IMAGES_MAGIC}")
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise DataError(
            f"{images_path}: payload is {len(raw)} bytes, header implies {expected}")
    images = np.frombuffer(raw[16:], dtype=np.uint8).reshape(count, rows, cols)
    images = images.astype(np.float64) / 255.0

    with _open_maybe_gzip(labels_path) as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise DataError(f"{labels_path}: truncated IDX label header")
    magic, lcount = (int(x) for x in np.frombuffer(raw[:8], dtype=">i4"))
    if magic != IDX_LABELS_MAGIC:
        raise DataError(
            f"{labels_path}: bad magic {magic}, expected {IDX_LABELS_MAGIC}")
    if len(raw) != 8 + lcount:
        raise DataError(f"{labels_path}: payload/header size mismatch")
    if lcount != count:
        raise DataError(
            f"label count {lcount} does not match image count {count}")
    labels = np.frombuffer(raw[8:], dtype=np.uint8).astype(np.int64)
    return images, labels


_MNIST_FILES = {
    "train_images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    "train_labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    "test_images": ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
}


def find_mnist(directory=None):
    """Locate the four standard MNIST IDX files (optionally .gz) under a
    directory, or under $GMCONV_MNIST when no directory is given.
    Returns a dict of paths or None when not all four are present."""
    if directory is None:
        directory = os.environ.get("GMCONV_MNIST")
        if not directory:
            return None
    found = {}
    for key, names in _MNIST_FILES.items():
        for name in names:
            for suffix in ("", ".gz"):
                p = os.path.join(directory, name + suffix)
                if os.path.isfile(p):
                    found[key] = p
                    break
            if key in found:
                break
        if key not in found:
            return None
    return found


def image_to_grid_graph(img, spec: GridSpec = GridSpec()) -> AttributedGraph:
    """Quarter-resolution grid graph of one image.

    Vertices are numbered row-major; d_v=1 intensity.  Edges connect
    4-neighbours and carry (rho, phi) with rho=1 and phi the angle of the
    lower-id to higher-id displacement: 0 for horizontal, pi/2 for
    vertical.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (spec.source_side, spec.source_side):
        raise DataError(
            f"expected {spec.source_side}x{spec.source_side} image, "
            f"got {img.shape}")
    f = spec.source_side // spec.side
    blocks = img.reshape(spec.side, f, spec.side, f)
    blocks = blocks.transpose(0, 2, 1, 3).reshape(spec.side, spec.side, f * f)
    # block means are summed over sorted pixel values so a block's value
    # depends only on its pixel multiset; right-angle rotation (which
    # permutes pixels within blocks) then yields bit-identical vertex
    # attributes under the induced grid permutation
    blocks = np.sort(blocks, axis=-1)
    small = np.zeros((spec.side, spec.side))
    for k in range(f * f):
        small += blocks[..., k]
    small /= f * f
    return grid_graph_from_array(small)


def grid_graph_from_array(small) -> AttributedGraph:
    """Grid graph of an already-downsampled square intensity array."""
    small = np.asarray(small, dtype=np.float64)
    if small.ndim != 2 or small.shape[0] != small.shape[1]:
        raise DataError(f"expected a square array, got {small.shape}")
    side = small.shape[0]
    vattrs = {r * side + c: [small[r, c]]
              for r in range(side) for c in range(side)}
    edges = []
    eattrs = {}
    for r in range(side):
        for c in range(side):
            v = r * side + c
            if c + 1 < side:
                edges.append((v, v + 1))
                eattrs[(v, v + 1)] = [1.0, 0.0]
            if r + 1 < side:
                edges.append((v, v + side))
                eattrs[(v, v + side)] = [1.0, np.pi / 2]
    return AttributedGraph(vattrs, edges, eattrs)


def rotate_image(img, angle):
    """Exact right-angle rotation (a pixel permutation)."""
    if angle % 90 != 0:
        raise DataError(f"only multiples of 90 degrees supported, got {angle}")
    return np.rot90(np.asarray(img), k=(angle // 90) % 4)


def filter_classes(images, labels, classes):
    """Keep the requested labels and remap them to 0..k-1 in sorted order."""
    classes = sorted(set(int(c) for c in classes))
    if len(classes) < 2:
        raise DataError("need at least two classes")
    remap = {c: i for i, c in enumerate(classes)}
    keep = np.isin(labels, classes)
    return images[keep], np.asarray([remap[int(l)] for l in labels[keep]],
                                    dtype=np.int64)


def make_grid_dataset(images, labels, split, rotations=None, seed=0) -> Dataset:
    """Convert images to grid graphs; optionally rotate each image by a
    seeded random choice from ``rotations`` (degrees) first."""
    rng = np.random.default_rng(seed)
    examples = []
    for img, label in zip(images, labels):
        if rotations:
            img = rotate_image(img, int(rng.choice(rotations)))
        examples.append((image_to_grid_graph(img), int(label)))
    return Dataset(examples, split)


def build_mixed(train_images, train_labels, test_images, test_labels,
                seed=0):
    """Rotation-free training split plus right-angle-rotated test split."""
    train = make_grid_dataset(train_images, train_labels, "train")
    test = make_grid_dataset(test_images, test_labels, "test",
                             rotations=(0, 90, 180, 270), seed=seed)
    return train, test


def make_splits(train_images, train_labels, test_images, test_labels,
                limit=None, valid_fraction=0.2, test_factor=5.0):
    """Slice train/valid/test sets in the 1 : 0.2 : 5 ratio.

    ``limit`` is the training-set size; valid examples are taken from the
    training pool after the train slice, test examples from the test pool.
    With limit None, the full pools are used (valid carved from train).
    """
    n_train_pool = len(train_images)
    if limit is None:
        n_train = int(round(n_train_pool / (1.0 + valid_fraction)))
    else:
        n_train = int(limit)
    n_valid = max(1, int(round(n_train * valid_fraction)))
    n_test = min(len(test_images), int(round(n_train * test_factor)))
    if n_train < 1:
        raise DataError(f"train size {n_train} too small")
    if n_train + n_valid > n_train_pool:
        raise DataError(
            f"need {n_train + n_valid} training-pool examples, "
            f"have {n_train_pool}")
    train = make_grid_dataset(train_images[:n_train],
                              train_labels[:n_train], "train")
    valid = make_grid_dataset(train_images[n_train:n_train + n_valid],
                              train_labels[n_train:n_train + n_valid], "valid")
    test = make_grid_dataset(test_images[:n_test], test_labels[:n_test],
                             "test")
    return train, valid, test


def load_rag_dataset(directory, split="train") -> Dataset:
    """Read `<index>.graph` files plus `labels.txt` (lines `<index> <label>`)."""
    labels_path = os.path.join(directory, "labels.txt")
    if not os.path.isfile(labels_path):
        raise DataError(f"{directory}: missing labels.txt")
    labels = {}
    with open(labels_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks or toks[0].startswith("#"):
                continue
            if len(toks) != 2:
                raise DataError(
                    f"{labels_path}:{lineno}: expected '<index> <label>'")
            try:
                labels[toks[0]] = int(toks[1])
            except ValueError:
                raise DataError(
                    f"{labels_path}:{lineno}: non-integer label") from None
    names = sorted(n for n in os.listdir(directory) if n.endswith(".graph"))
    if not names:
        raise DataError(f"{directory}: no .graph files found")
    examples = []
    for name in names:
        index = name[:-len(".graph")]
        if index not in labels:
            raise DataError(f"{directory}: no label entry for {index!r}")
        try:
            G = load_graph(os.path.join(directory, name))
        except GraphParseError as exc:
            raise DataError(str(exc)) from exc
        examples.append((G, labels[index]))
    return Dataset(examples, split)


# -- synthetic image source --------------------------------------------


def synthesize_digits(count, seed=0, side=28):
    """Two-class synthetic digit-like images, intensity-quantized to /255.

    Class 0 is a jittered annulus (ring), class 1 a jittered slanted
    stroke.  Purely deterministic in the seed; a stand-in source for
    machines without the MNIST files.
    """
    rng = np.random.default_rng(seed)
    images = np.empty((count, side, side))
    labels = np.empty(count, dtype=np.int64)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    for k in range(count):
        label = k % 2
        cx = side / 2 + rng.uniform(-2.5, 2.5)
        cy = side / 2 + rng.uniform(-2.5, 2.5)
        amp = rng.uniform(0.75, 1.0)
        if label == 0:
            r_out = rng.uniform(7.0, 10.0)
            thick = rng.uniform(2.0, 3.5)
            rr = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
            band = np.abs(rr - r_out + thick / 2)
            img = amp * np.clip(1.0 - band / thick, 0.0, 1.0)
        else:
            slope = rng.uniform(-0.35, 0.35)
            width = rng.uniform(1.5, 2.8)
            half = rng.uniform(7.0, 10.0)
            dist = np.abs((xx - cx) - slope * (yy - cy))
            img = amp * np.clip(1.0 - dist / width, 0.0, 1.0)
            img[np.abs(yy - cy) > half] = 0.0
        images[k] = np.round(img * 255.0) / 255.0
        labels[k] = label
    return images, labels


# -- PGM ---------------------------------------------------------------


def write_pgm(path, img_u8):
    """Binary (P5) PGM with maxval 255."""
    img_u8 = np.asarray(img_u8, dtype=np.uint8)
    if img_u8.ndim != 2:
        raise DataError("PGM output requires a 2-d array")
    h, w = img_u8.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img_u8.tobytes())


def read_pgm(path):
    """Binary (P5) or plain (P2) PGM, returned as floats in [0,1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks = []
    pos = 0
    # header: magic, width, height, maxval, with # comments allowed
    while len(toks) < 4 and pos < len(data):
        # skip whitespace and comments
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if pos > start:
            toks.append(data[start:pos])
    if len(toks) < 4 or toks[0] not in (b"P5", b"P2"):
        raise DataError(f"{path}: not a P5/P2 PGM file")
    w, h, maxval = int(toks[1]), int(toks[2]), int(toks[3])
    if maxval <= 0 or maxval > 255:
        raise DataError(f"{path}: unsupported maxval {maxval}")
    if toks[0] == b"P5":
        pos += 1  # single whitespace byte after maxval
        pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    else:
        vals = data[pos:].split()
        if len(vals) < w * h:
            raise DataError(f"{path}: truncated P2 payload")
        pixels = np.asarray([int(v) for v in vals[:w * h]], dtype=np.float64)
    return pixels.reshape(h, w).astype(np.float64) / maxval
