"""Graph classification network: stacked convolution/pooling stages, a
global average pool, and a dense classifier head.

The stage layout follows the usual image-classifier pattern: each stage
convolves (stacking one score per filter into the vertex attributes),
optionally applies ReLU to the vertex attributes, then coarsens the graph
by Louvain pooling.  After the last stage the surviving vertex attributes
are averaged into one vector and classified by an affine map.

The forward pass records everything the backward pass needs (tapes,
pre-activation values, partitions); backward returns one gradient array
per parameter array, aligned with ``parameter_arrays``.
"""

from __future__ import annotations

import io
import json

import numpy as np

from .graphs import AttributedGraph
from .layers import (ConvLayer, DenseLayer, LayerError, global_avg_pool,
                     global_avg_pool_backward, louvain_pool, pool_backward,
                     relu_backward, relu_forward, softmax_cross_entropy)

__all__ = ["GraphNetwork", "save_checkpoint", "load_checkpoint"]

CHECKPOINT_VERSION = 1


class _StageRecord:
    __slots__ = ("graph_in", "conv_tape", "relu_x", "partition")

    def __init__(self):
        self.graph_in = None
        self.conv_tape = None
        self.relu_x = None
        self.partition = None


class GraphNetwork:
    """Convolution stack + global average pool + dense classifier."""

    def __init__(self, config, conv_layers, dense):
        self.config = dict(config)
        self.conv_layers = list(conv_layers)
        self.dense = dense

    @classmethod
    def build(cls, n_classes, d_v=1, input_d_e=0, filters=(8, 16, 32),
              filter_vertices=5, hops=1, theta="max", edge_matching=False,
              activation=True, pool=True, seed=0):
        """Construct a randomly initialized network.

        Edge-aware filters get a star topology (hub plus leaves), the
        common core of every 1-hop neighborhood, but only on stages whose
        input still carries edge attributes; pooling drops them.
        """
        if n_classes < 2:
            raise LayerError(f"need at least 2 classes, got {n_classes}")
        if not filters:
            raise LayerError("need at least one convolution stage")
        rng = np.random.default_rng(seed)
        config = {
            "n_classes": int(n_classes),
            "d_v": int(d_v),
            "input_d_e": int(input_d_e),
            "filters": [int(f) for f in filters],
            "filter_vertices": int(filter_vertices),
            "hops": int(hops),
            "theta": theta,
            "edge_matching": bool(edge_matching),
            "activation": bool(activation),
            "pool": bool(pool),
            "seed": int(seed),
        }
        convs = []
        cur_dv = d_v
        cur_de = input_d_e
        for nf in filters:
            fedges = ()
            fde = 0
            if edge_matching and cur_de > 0 and filter_vertices >= 2:
                fedges = tuple((0, a) for a in range(1, filter_vertices))
                fde = cur_de
            convs.append(ConvLayer.init(
                nf, filter_vertices, cur_dv, filter_edges=fedges, d_e=fde,
                hops=hops, theta=theta, edge_matching=edge_matching, rng=rng))
            cur_dv = nf
            cur_de = 0 if pool else (nf if edge_matching else 0)
        dense = DenseLayer.init(filters[-1], n_classes, rng=rng)
        return cls(config, convs, dense)

    # -- parameter plumbing -------------------------------------------

    def parameter_arrays(self):
        """All trainable arrays in a fixed order (updated in place)."""
        out = []
        for li, layer in enumerate(self.conv_layers):
            for name, arr in layer.parameters():
                out.append((f"conv{li}.{name}", arr))
        for name, arr in self.dense.parameters():
            out.append((f"dense.{name}", arr))
        return out

    # -- forward / backward -------------------------------------------

    def forward(self, G: AttributedGraph):
        """Returns (logits, tape)."""
        cfg = self.config
        records = []
        cur = G
        for layer in self.conv_layers:
            rec = _StageRecord()
            rec.graph_in = cur
            cur, rec.conv_tape = layer.forward(cur)
            if cfg["activation"]:
                rec.relu_x = cur.vertex_attrs
                acts, _ = relu_forward(cur.vertex_attrs)
                cur = cur.with_attrs(acts, cur.edge_attrs)
            if cfg["pool"]:
                cur, rec.partition = louvain_pool(cur)
            records.append(rec)
        pooled = global_avg_pool(cur)
        logits = self.dense.forward(pooled)
        tape = {"records": records, "final_graph": cur, "pooled": pooled}
        return logits, tape

    def backward(self, tape, d_logits):
        """Returns one gradient array per entry of parameter_arrays."""
        records = tape["records"]
        dW_dense, db_dense, d_pooled = self.dense.backward(
            tape["pooled"], d_logits)
        d_vertex = global_avg_pool_backward(tape["final_graph"], d_pooled)
        d_edge = None
        conv_grads = [None] * len(self.conv_layers)
        for li in range(len(self.conv_layers) - 1, -1, -1):
            layer = self.conv_layers[li]
            rec = records[li]
            if rec.partition is not None:
                d_vertex = pool_backward(rec.partition, d_vertex)
                d_edge = None
            if rec.relu_x is not None:
                d_vertex = relu_backward(rec.relu_x, d_vertex)
            g = layer.backward(rec.conv_tape, d_vertex, d_edge)
            conv_grads[li] = g
            d_vertex = g.d_input_vertex_attrs
            d_edge = g.d_input_edge_attrs
        grads = []
        for li, layer in enumerate(self.conv_layers):
            g = conv_grads[li]
            grads.append(g.d_vertex_weights)
            if layer.edge_weights is not None:
                grads.append(g.d_edge_weights)
        grads.append(dW_dense)
        grads.append(db_dense)
        return grads

    def loss_and_grads(self, G, label):
        logits, tape = self.forward(G)
        loss, d_logits = softmax_cross_entropy(logits, label)
        return loss, self.backward(tape, d_logits)

    def predict(self, G):
        logits, _ = self.forward(G)
        return int(np.argmax(logits))


# -- checkpointing -----------------------------------------------------


def save_checkpoint(model: GraphNetwork, path):
    """Write all weights plus the build config; exact round-trip."""
    arrays = {f"param_{i}": arr
              for i, (_, arr) in enumerate(model.parameter_arrays())}
    meta = json.dumps({"version": CHECKPOINT_VERSION, "config": model.config})
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(meta.encode(), dtype=np.uint8), **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> GraphNetwork:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise LayerError(
                f"unsupported checkpoint version {meta.get('version')!r}")
        cfg = meta["config"]
        model = GraphNetwork.build(
            n_classes=cfg["n_classes"], d_v=cfg["d_v"],
            input_d_e=cfg["input_d_e"], filters=cfg["filters"],
            filter_vertices=cfg["filter_vertices"], hops=cfg["hops"],
            theta=cfg["theta"], edge_matching=cfg["edge_matching"],
            activation=cfg["activation"], pool=cfg["pool"], seed=cfg["seed"])
        params = model.parameter_arrays()
        for i, (name, arr) in enumerate(params):
            key = f"param_{i}"
            if key not in data:
                raise LayerError(f"checkpoint missing {key} ({name})")
            saved = data[key]
            if saved.shape != arr.shape:
                raise LayerError(
                    f"checkpoint shape mismatch for {name}: "
                    f"{saved.shape} vs {arr.shape}")
            arr[...] = saved
    return model
