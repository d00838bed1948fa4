"""Central finite-difference validation of every backward pass.

Each check builds seeded random instances, evaluates a random linear
functional of the layer output, and compares the analytic gradients
against central differences (h=1e-6, float64).  The matching, pooling and
max selections are discrete, so gradients only exist where those choices
are locally constant; every evaluation therefore carries a token encoding
its discrete choices, and instances where a perturbation flips a choice
are redrawn.  Relative error uses |a-n| / max(|a|, |n|, 1e-3).
"""

from __future__ import annotations

import numpy as np

from .graphs import AttributedGraph
from .layers import (ConvLayer, dense_backward, dense_forward,
                     global_avg_pool, global_avg_pool_backward, louvain_pool,
                     pool_backward, relu_backward, relu_forward,
                     softmax_cross_entropy)

__all__ = ["relative_error", "run_all", "LAYER_KINDS", "DEFAULT_TOLERANCE"]

DEFAULT_H = 1e-6
DEFAULT_TOLERANCE = 1e-4
SCALE_FLOOR = 1e-3

LAYER_KINDS = (
    "conv_no_edge",
    "conv_edges_max",
    "conv_edges_avg",
    "louvain_pool",
    "global_avg_pool",
    "relu",
    "dense",
    "softmax_cross_entropy",
)


def relative_error(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), SCALE_FLOOR)
    return float(np.max(np.abs(a - n) / denom))


def _fd_gradients(eval_fn, arrays, h=DEFAULT_H):
    """Central differences of eval_fn over every component of ``arrays``.

    eval_fn(arrays) -> (scalar, token); returns None when any perturbed
    evaluation lands on a different discrete choice than the base point.
    """
    _, token0 = eval_fn(arrays)
    grads = [np.zeros_like(a) for a in arrays]
    for ai, arr in enumerate(arrays):
        flat = arr.ravel()
        gflat = grads[ai].ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            jp, tp = eval_fn(arrays)
            flat[k] = orig - h
            jm, tm = eval_fn(arrays)
            flat[k] = orig
            if tp != token0 or tm != token0:
                return None
            gflat[k] = (jp - jm) / (2.0 * h)
    return grads


def _random_graph(rng, n, d_v, d_e):
    """Connected random graph with uniform [-1,1] attributes."""
    vattrs = {i: rng.uniform(-1.0, 1.0, size=d_v) for i in range(n)}
    edges = set((i, i + 1) for i in range(n - 1))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.uniform() < 0.35:
                edges.add((i, j))
    eattrs = None
    if d_e > 0:
        eattrs = {e: rng.uniform(-1.0, 1.0, size=d_e) for e in edges}
    return AttributedGraph(vattrs, sorted(edges), eattrs)


def _conv_token(tape):
    parts = [tape.vassign.tobytes()]
    if tape.edge_maps is not None:
        parts.append(tuple(sorted(
            (key, tuple(sorted(emap.items())))
            for key, emap in tape.edge_maps.items())))
    if tape.zeta_members is not None:
        choices = []
        for per_edge in tape.zeta_members:
            for entries in per_edge:
                choices.append(tuple((r, q) for (r, q, _) in entries))
        parts.append(tuple(choices))
    return tuple(parts)


def _check_conv(rng, edge_matching, theta):
    n = 5
    d_v = 2
    d_e = 1 if edge_matching else 0
    nf = 2
    m = 3
    G = _random_graph(rng, n, d_v, d_e)
    fedges = ((0, 1), (1, 2)) if edge_matching else ()
    Wv = rng.uniform(-1.0, 1.0, size=(nf, m, d_v))
    We = rng.uniform(-1.0, 1.0, size=(nf, len(fedges), d_e)) \
        if edge_matching else None
    c_mu = rng.uniform(-1.0, 1.0, size=(n, nf))
    c_zeta = rng.uniform(-1.0, 1.0, size=(G.n_edges, nf)) \
        if edge_matching else None

    def make_layer(wv, we):
        return ConvLayer(wv.copy(), fedges,
                         None if we is None else we.copy(),
                         hops=1, theta=theta, edge_matching=edge_matching)

    def eval_fn(arrays):
        if edge_matching:
            X, E, wv, we = arrays
            g = G.with_attrs(X.copy(), E.copy())
            layer2 = make_layer(wv, we)
        else:
            X, wv = arrays
            g = G.with_attrs(X.copy(), None)
            layer2 = make_layer(wv, None)
            we = None
        g_out, tape = layer2.forward(g)
        j = float(np.sum(c_mu * g_out.vertex_attrs))
        if edge_matching and g_out.edge_attrs is not None:
            j += float(np.sum(c_zeta * g_out.edge_attrs))
        return j, _conv_token(tape)

    if edge_matching:
        arrays = [G.vertex_attrs.copy(), G.edge_attrs.copy(),
                  Wv.copy(), We.copy()]
    else:
        arrays = [G.vertex_attrs.copy(), Wv.copy()]
    numeric = _fd_gradients(eval_fn, arrays)
    if numeric is None:
        return None

    layer = make_layer(Wv, We)
    g = G.with_attrs(arrays[0].copy(),
                     arrays[1].copy() if edge_matching else None)
    _, tape = layer.forward(g)
    grads = layer.backward(tape, c_mu, c_zeta)
    if edge_matching:
        analytic = [grads.d_input_vertex_attrs, grads.d_input_edge_attrs,
                    grads.d_vertex_weights, grads.d_edge_weights]
    else:
        analytic = [grads.d_input_vertex_attrs, grads.d_vertex_weights]
    return max(relative_error(a, nmr) for a, nmr in zip(analytic, numeric))


def _check_pool(rng):
    n = 7
    d = 3
    G = _random_graph(rng, n, d, 0)
    # positive attributes keep the scalar-product edge weights generic
    X0 = rng.uniform(0.1, 1.0, size=(n, d))
    G = G.with_attrs(X0, None)
    probe_coarse, part0 = louvain_pool(G)
    c = rng.uniform(-1.0, 1.0, size=probe_coarse.vertex_attrs.shape)

    def eval_fn(arrays):
        g = G.with_attrs(arrays[0].copy(), None)
        coarse, part = louvain_pool(g)
        token = (tuple(sorted(part.communities.items())),
                 part.argmax_pos.tobytes())
        if coarse.vertex_attrs.shape != c.shape:
            return 0.0, ("shape-changed",)
        return float(np.sum(c * coarse.vertex_attrs)), token

    numeric = _fd_gradients(eval_fn, [X0.copy()])
    if numeric is None:
        return None
    analytic = pool_backward(part0, c)
    return relative_error(analytic, numeric[0])


def _check_global_pool(rng):
    n = 6
    d = 4
    G = _random_graph(rng, n, d, 0)
    c = rng.uniform(-1.0, 1.0, size=d)

    def eval_fn(arrays):
        g = G.with_attrs(arrays[0].copy(), None)
        return float(np.dot(c, global_avg_pool(g))), ()

    numeric = _fd_gradients(eval_fn, [G.vertex_attrs.copy()])
    analytic = global_avg_pool_backward(G, c)
    return relative_error(analytic, numeric[0])


def _check_relu(rng):
    x = rng.uniform(-1.0, 1.0, size=(5, 3))
    while np.any(np.abs(x) < 1e-3):
        x = rng.uniform(-1.0, 1.0, size=(5, 3))
    c = rng.uniform(-1.0, 1.0, size=x.shape)

    def eval_fn(arrays):
        y, _ = relu_forward(arrays[0])
        return float(np.sum(c * y)), ()

    numeric = _fd_gradients(eval_fn, [x.copy()])
    analytic = relu_backward(x, c)
    return relative_error(analytic, numeric[0])


def _check_dense(rng):
    in_dim, out_dim = 4, 3
    W = rng.uniform(-1.0, 1.0, size=(out_dim, in_dim))
    b = rng.uniform(-1.0, 1.0, size=out_dim)
    x = rng.uniform(-1.0, 1.0, size=in_dim)
    c = rng.uniform(-1.0, 1.0, size=out_dim)

    def eval_fn(arrays):
        xx, ww, bb = arrays
        return float(np.dot(c, dense_forward(xx, ww, bb))), ()

    numeric = _fd_gradients(eval_fn, [x.copy(), W.copy(), b.copy()])
    dW, db, dx = dense_backward(x, W, c)
    return max(relative_error(dx, numeric[0]),
               relative_error(dW, numeric[1]),
               relative_error(db, numeric[2]))


def _check_loss(rng):
    n_classes = 4
    logits = rng.uniform(-2.0, 2.0, size=n_classes)
    label = int(rng.integers(n_classes))

    def eval_fn(arrays):
        loss, _ = softmax_cross_entropy(arrays[0], label)
        return float(loss), ()

    numeric = _fd_gradients(eval_fn, [logits.copy()])
    _, analytic = softmax_cross_entropy(logits, label)
    return relative_error(analytic, numeric[0])


_CHECKS = {
    "conv_no_edge": lambda rng: _check_conv(rng, False, "max"),
    "conv_edges_max": lambda rng: _check_conv(rng, True, "max"),
    "conv_edges_avg": lambda rng: _check_conv(rng, True, "avg"),
    "louvain_pool": _check_pool,
    "global_avg_pool": _check_global_pool,
    "relu": _check_relu,
    "dense": _check_dense,
    "softmax_cross_entropy": _check_loss,
}


def run_all(seed=0, instances=20, tolerance=DEFAULT_TOLERANCE,
            kinds=LAYER_KINDS, corrupt=False):
    """Run every layer check; returns (report, all_passed).

    The report maps layer kind to {max_rel_error, instances, passed}.
    ``corrupt`` deliberately biases one result, for validating that the
    failure path works.
    """
    report = {}
    all_passed = True
    for kind in kinds:
        check = _CHECKS[kind]
        kind_id = LAYER_KINDS.index(kind)
        worst = 0.0
        done = 0
        attempts = 0
        while done < instances:
            if attempts >= instances * 10:
                raise RuntimeError(
                    f"{kind}: too many tie-degenerate instances")
            rng = np.random.default_rng((seed, kind_id, attempts))
            attempts += 1
            err = check(rng)
            if err is None:
                continue
            worst = max(worst, err)
            done += 1
        if corrupt:
            worst += 1.0
        passed = worst < tolerance
        all_passed = all_passed and passed
        report[kind] = {
            "max_rel_error": worst,
            "instances": done,
            "passed": passed,
        }
    return report, all_passed
