"""Command line interface.

Subcommands:
  train      fit a network on a dataset, writing checkpoint + history CSV
  eval       report accuracy of a checkpoint on a dataset's test split
  convolve   apply one handcrafted filter to an image/graph, write a PGM
  gradcheck  finite-difference validation of all layer gradients
  match      score two graph files against each other

Options resolve as flags > config file > defaults; the config file is a
flat key=value text file using the long flag names with underscores.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import zipfile

import numpy as np

from . import gradcheck as gradcheck_mod
from ._lsap import AssignmentError
from .data import (DataError, Dataset, find_mnist, grid_graph_from_array,
                   image_to_grid_graph, load_mnist_idx, load_rag_dataset,
                   make_splits, read_pgm, synthesize_digits, write_pgm)
from .graphs import FilterGraph, GraphError, load_graph
from .layers import ConvLayer, LayerError
from .matching import (MatchingError, gms_bp_edges, gms_brute_force,
                       gms_no_edges)
from .network import GraphNetwork, load_checkpoint, save_checkpoint
from .optim import NumericalError, TrainError, evaluate, train, TrainConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _onoff(value):
    v = str(value).strip().lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise UsageError(f"expected on/off, got {value!r}")


def _int_list(value):
    try:
        return tuple(int(t) for t in str(value).split(",") if t.strip() != "")
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {value!r}")


def _float_list(value):
    try:
        return tuple(float(t) for t in str(value).split(",") if t.strip() != "")
    except ValueError:
        raise UsageError(f"expected a comma-separated float list, got {value!r}")


# option name -> (converter for config-file strings, default)
_OPTIONS = {
    "dataset": (str, None),
    "kind": (str, "grid"),
    "classes": (_int_list, (0, 1)),
    "limit": (int, None),
    "epochs": (int, 50),
    "lr": (float, 1e-3),
    "seed": (int, 0),
    "hops": (int, 1),
    "theta": (str, "max"),
    "edge_matching": (_onoff, False),
    "activation": (_onoff, True),
    "filters": (_int_list, (8, 16, 32)),
    "filter_vertices": (int, None),
    "threads": (int, None),
    "out": (str, None),
    "instances": (int, 20),
}


def _load_config_file(path):
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, _, value = stripped.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _OPTIONS:
                raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
            out[key] = value.strip()
    return out


def _resolve(args, names):
    """Merge flag values, config-file values and defaults."""
    config = {}
    if getattr(args, "config", None):
        config = _load_config_file(args.config)
    out = {}
    for name in names:
        conv, default = _OPTIONS[name]
        flag_val = getattr(args, name, None)
        if flag_val is not None:
            out[name] = flag_val
        elif name in config:
            out[name] = conv(config[name])
        else:
            out[name] = default
    return out


def _apply_threads(threads):
    import numba
    if threads is None:
        threads = os.cpu_count() or 1
    threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    return threads


def _validate(opts):
    if "kind" in opts and opts["kind"] not in ("grid", "rag", "synth"):
        raise UsageError(f"--kind must be grid, rag or synth, got {opts['kind']!r}")
    if "theta" in opts and opts["theta"] not in ("max", "avg"):
        raise UsageError(f"--theta must be max or avg, got {opts['theta']!r}")
    if "hops" in opts and opts["hops"] < 1:
        raise UsageError(f"--hops must be >= 1, got {opts['hops']}")
    if "epochs" in opts and opts["epochs"] < 1:
        raise UsageError(f"--epochs must be >= 1, got {opts['epochs']}")
    if "lr" in opts and opts["lr"] <= 0:
        raise UsageError(f"--lr must be positive, got {opts['lr']}")
    if "limit" in opts and opts["limit"] is not None and opts["limit"] < 1:
        raise UsageError(f"--limit must be >= 1, got {opts['limit']}")
    if "classes" in opts and len(opts["classes"]) < 2:
        raise UsageError("--classes needs at least two labels")
    if "filters" in opts and (not opts["filters"]
                              or any(f < 1 for f in opts["filters"])):
        raise UsageError("--filters needs positive counts, e.g. 8,16,32")


def _build_datasets(opts):
    """Train/valid/test datasets for the requested kind."""
    kind = opts["kind"]
    classes = opts["classes"]
    limit = opts["limit"]
    if kind == "synth":
        if tuple(sorted(classes)) != (0, 1):
            raise UsageError("--kind synth provides exactly the classes 0,1")
        n_train = (limit or 500)
        n_valid = max(1, int(round(n_train * 0.2)))
        n_test = int(round(n_train * 5.0))
        train_images, train_labels = synthesize_digits(
            n_train + n_valid, seed=opts["seed"])
        test_images, test_labels = synthesize_digits(
            n_test, seed=opts["seed"] + 1)
        return make_splits(train_images, train_labels, test_images,
                           test_labels, limit=n_train)
    if kind == "grid":
        if not opts["dataset"]:
            raise UsageError("--kind grid requires --dataset pointing to a "
                             "directory with the MNIST IDX files")
        paths = find_mnist(opts["dataset"])
        if paths is None:
            raise DataError(
                f"{opts['dataset']}: MNIST IDX files not found "
                "(expected train-images-idx3-ubyte etc.)")
        from .data import filter_classes
        train_images, train_labels = load_mnist_idx(
            paths["train_images"], paths["train_labels"])
        test_images, test_labels = load_mnist_idx(
            paths["test_images"], paths["test_labels"])
        train_images, train_labels = filter_classes(
            train_images, train_labels, classes)
        test_images, test_labels = filter_classes(
            test_images, test_labels, classes)
        return make_splits(train_images, train_labels, test_images,
                           test_labels, limit=limit)
    # rag
    if not opts["dataset"]:
        raise UsageError("--kind rag requires --dataset pointing to a "
                         "directory of .graph files plus labels.txt")
    full = load_rag_dataset(opts["dataset"])
    examples = [(g, label) for (g, label) in full
                if label in set(range(len(classes)))]
    n = len(examples)
    if n < 3:
        raise DataError(f"need at least 3 RAG examples, found {n}")
    n_train = limit if limit is not None else max(1, int(n / 6.2))
    n_valid = max(1, n_train // 5)
    if n_train + n_valid >= n:
        raise DataError(
            f"--limit {n_train} leaves no test examples out of {n}")
    n_test = min(n - n_train - n_valid, n_train * 5)
    return (Dataset(examples[:n_train], "train"),
            Dataset(examples[n_train:n_train + n_valid], "valid"),
            Dataset(examples[n_train + n_valid:n_train + n_valid + n_test],
                    "test"))


def _mean_neighborhood_size(dataset, hops, sample=50):
    total = 0
    count = 0
    for G, _ in dataset.examples[:sample]:
        idx = G._hood_index(hops)
        total += sum(len(members) for members, _, _ in idx)
        count += G.n_vertices
    return max(1, int(round(total / count)))


def _build_model(opts, train_set):
    sample_graph, _ = train_set.examples[0]
    filter_vertices = opts["filter_vertices"]
    if filter_vertices is None:
        filter_vertices = _mean_neighborhood_size(train_set, opts["hops"])
    return GraphNetwork.build(
        n_classes=len(opts["classes"]),
        d_v=sample_graph.d_v,
        input_d_e=sample_graph.d_e,
        filters=opts["filters"],
        filter_vertices=filter_vertices,
        hops=opts["hops"],
        theta=opts["theta"],
        edge_matching=opts["edge_matching"],
        activation=opts["activation"],
        pool=True,
        seed=opts["seed"],
    ), filter_vertices


def cmd_train(args):
    names = ["dataset", "kind", "classes", "limit", "epochs", "lr", "seed",
             "hops", "theta", "edge_matching", "activation", "filters",
             "filter_vertices", "threads", "out"]
    opts = _resolve(args, names)
    _validate(opts)
    threads = _apply_threads(opts["threads"])
    train_set, valid_set, test_set = _build_datasets(opts)
    model, filter_vertices = _build_model(opts, train_set)
    out_dir = opts["out"] or "out"
    os.makedirs(out_dir, exist_ok=True)
    print(f"training: {len(train_set)} train / {len(valid_set)} valid / "
          f"{len(test_set)} test examples, filters={opts['filters']}, "
          f"filter_vertices={filter_vertices}, hops={opts['hops']}, "
          f"threads={threads}")
    config = TrainConfig(epochs=opts["epochs"], lr=opts["lr"],
                         seed=opts["seed"], hops=opts["hops"],
                         theta=opts["theta"], filters=opts["filters"],
                         filter_vertices=filter_vertices,
                         edge_matching=opts["edge_matching"],
                         activation=opts["activation"],
                         classes=opts["classes"])

    def progress(entry):
        print(f"epoch {entry['epoch']}: loss={entry['loss']:.6f} "
              f"valid_acc={entry['valid_acc']:.4f}")

    history = train(model, train_set, valid_set, config, progress=progress)
    test_acc, _ = evaluate(model, test_set)
    print(f"test accuracy (best-validation weights): {test_acc:.4f}")

    ckpt_path = os.path.join(out_dir, "checkpoint.npz")
    save_checkpoint(model, ckpt_path)
    csv_path = os.path.join(out_dir, "history.csv")
    with open(csv_path, "w") as fh:
        fh.write("epoch,loss,valid_acc\n")
        for entry in history:
            fh.write(f"{entry['epoch']},{entry['loss']!r},"
                     f"{entry['valid_acc']!r}\n")
    print(f"wrote {ckpt_path} and {csv_path}")
    return EXIT_OK


def cmd_eval(args):
    names = ["dataset", "kind", "classes", "limit", "threads", "seed"]
    opts = _resolve(args, names)
    _validate(opts)
    _apply_threads(opts["threads"])
    model = load_checkpoint(args.checkpoint)
    _, _, test_set = _build_datasets(opts)
    acc, confusion = evaluate(model, test_set)
    print(f"test accuracy: {acc:.4f} on {len(test_set)} examples")
    print("confusion (rows = true, cols = predicted):")
    for row in confusion:
        print("  " + " ".join(f"{v:6d}" for v in row))
    return EXIT_OK


def _input_to_graph(path):
    if path.endswith(".graph"):
        return load_graph(path)
    img = read_pgm(path)
    if img.shape == (28, 28):
        return image_to_grid_graph(img)
    if img.ndim == 2 and img.shape[0] == img.shape[1]:
        return grid_graph_from_array(img)
    raise DataError(f"{path}: need a square image, got {img.shape}")


def cmd_convolve(args):
    names = ["hops", "threads", "out"]
    opts = _resolve(args, names)
    _validate(opts)
    _apply_threads(opts["threads"])
    G = _input_to_graph(args.input)
    side = int(round(np.sqrt(G.n_vertices)))
    if side * side != G.n_vertices:
        raise DataError(
            f"grid layout needs a square vertex count, got {G.n_vertices}")
    weights = _float_list(args.filter)
    if not weights:
        raise UsageError("--filter needs at least one weight, e.g. -1,1")
    if G.d_v != 1:
        raise DataError(
            f"convolve expects scalar vertex attributes, got d_v={G.d_v}")
    layer = ConvLayer(np.asarray(weights, dtype=np.float64).reshape(1, -1, 1),
                      hops=opts["hops"])
    G_out, _ = layer.forward(G)
    scores = G_out.vertex_attrs[:, 0]
    lo, hi = float(scores.min()), float(scores.max())
    if hi > lo:
        pixels = np.round((scores - lo) / (hi - lo) * 255.0)
    else:
        pixels = np.zeros_like(scores)
    out_path = opts["out"] or "convolved.pgm"
    write_pgm(out_path, pixels.reshape(side, side).astype(np.uint8))
    print(f"wrote {out_path} (score range [{lo:.6g}, {hi:.6g}])")
    return EXIT_OK


def cmd_gradcheck(args):
    names = ["seed", "instances", "threads"]
    opts = _resolve(args, names)
    _apply_threads(opts["threads"])
    report, passed = gradcheck_mod.run_all(
        seed=opts["seed"], instances=opts["instances"],
        corrupt=bool(getattr(args, "corrupt", False)))
    for kind, entry in report.items():
        status = "PASS" if entry["passed"] else "FAIL"
        print(f"{kind}: max_rel_error={entry['max_rel_error']:.3e} "
              f"({entry['instances']} instances) {status}")
    if not passed:
        print("gradient check FAILED", file=sys.stderr)
        return EXIT_NUMERIC
    print("all gradient checks passed")
    return EXIT_OK


def _graph_as_filter(G):
    vw = {v: G.vertex_attrs[i] for i, v in enumerate(G.vertex_ids)}
    ew = None
    if G.edge_attrs is not None and G.n_edges > 0:
        ew = {e: G.edge_attrs[k] for k, e in enumerate(G.edges)}
    return FilterGraph(vw, G.edges, ew)


def _print_matching(tag, M):
    print(f"{tag} score: {float(M.score)!r}")
    for i in M.graph.vertex_ids:
        a = M.image(i)
        print(f"  {i} -> {a if a is not None else 'eps'}")


def cmd_match(args):
    names = ["threads"]
    opts = _resolve(args, names)
    _apply_threads(opts["threads"])
    G1 = load_graph(args.graph_a)
    G2 = _graph_as_filter(load_graph(args.graph_b))
    if args.edges:
        M = gms_bp_edges(G1, G2)
        _print_matching("bp-edges", M)
        if args.brute:
            MB = gms_brute_force(G1, G2)
            _print_matching("brute-force", MB)
            print(f"optimality gap: {float(MB.score - M.score)!r}")
    elif args.brute:
        _print_matching("brute-force", gms_brute_force(G1, G2))
    else:
        _print_matching("no-edge", gms_no_edges(G1, G2))
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="gmconv",
                     description="Graph convolution by graph matching")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--config")

    def add_dataset(p):
        p.add_argument("--dataset")
        p.add_argument("--kind", choices=["grid", "rag", "synth"])
        p.add_argument("--classes", type=_int_list)
        p.add_argument("--limit", type=int)

    p_train = sub.add_parser("train", help="train a model")
    add_common(p_train)
    add_dataset(p_train)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--hops", type=int)
    p_train.add_argument("--theta", choices=["max", "avg"])
    p_train.add_argument("--edge-matching", dest="edge_matching", type=_onoff,
                         metavar="on|off")
    p_train.add_argument("--activation", type=_onoff, metavar="on|off")
    p_train.add_argument("--filters", type=_int_list)
    p_train.add_argument("--filter-vertices", dest="filter_vertices", type=int)
    p_train.add_argument("--out")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    add_common(p_eval)
    add_dataset(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_conv = sub.add_parser("convolve", help="apply one filter, write a PGM")
    add_common(p_conv)
    p_conv.add_argument("--input", required=True,
                        help="a .graph file or a square PGM image")
    p_conv.add_argument("--filter", default="-1,1",
                        help="comma-separated filter vertex weights")
    p_conv.add_argument("--hops", type=int)
    p_conv.add_argument("--out")
    p_conv.set_defaults(func=cmd_convolve)

    p_gc = sub.add_parser("gradcheck", help="finite-difference checks")
    add_common(p_gc)
    p_gc.add_argument("--instances", type=int)
    p_gc.add_argument("--corrupt", action="store_true",
                      help=argparse.SUPPRESS)
    p_gc.set_defaults(func=cmd_gradcheck)

    p_match = sub.add_parser("match", help="match two graph files")
    add_common(p_match)
    p_match.add_argument("graph_a")
    p_match.add_argument("graph_b")
    p_match.add_argument("--edges", action="store_true",
                         help="edge-aware bipartite approximation")
    p_match.add_argument("--brute", action="store_true",
                         help="exact enumeration (small graphs)")
    p_match.set_defaults(func=cmd_match)
    return parser


def _fold_values(argv, options=("--filter",)):
    """Rewrite ``--opt value`` as ``--opt=value`` for the listed options.

    argparse rejects values like ``-1,1`` as unknown flags; folding lets
    filter weight lists start with a negative weight.
    """
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in options and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    argv = _fold_values(argv)
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help()
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphError, MatchingError, LayerError,
            AssignmentError, FileNotFoundError, IsADirectoryError,
            zipfile.BadZipFile) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
