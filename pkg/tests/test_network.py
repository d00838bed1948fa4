"""Full network assembly, forward/backward plumbing, checkpoints."""

import numpy as np
import pytest

import gmconv as gm
from gmconv import GraphNetwork, load_checkpoint, save_checkpoint

from conftest import random_attributed_graph


def small_graph(seed=0, n=10, d_v=1, d_e=None):
    rng = np.random.default_rng(seed)
    return random_attributed_graph(rng, n, d_v, d_e=d_e)


class TestBuild:
    def test_stage_dimensions_chain(self):
        net = GraphNetwork.build(n_classes=3, d_v=2, filters=(4, 6), seed=0)
        assert net.conv_layers[0].d_v == 2
        assert net.conv_layers[0].n_filters == 4
        assert net.conv_layers[1].d_v == 4
        assert net.conv_layers[1].n_filters == 6
        assert net.dense.weights.shape == (3, 6)

    def test_no_edges_without_edge_matching(self):
        net = GraphNetwork.build(n_classes=2, d_v=1, input_d_e=2,
                                 filters=(4, 4), seed=0)
        for layer in net.conv_layers:
            assert layer.filter_edges == ()
            assert layer.edge_weights is None

    def test_edge_matching_first_stage_only_after_pool(self):
        # pooling drops edge attributes, so only the first stage can carry
        # filter edges when the input has them
        net = GraphNetwork.build(n_classes=2, d_v=1, input_d_e=2,
                                 filters=(4, 4), edge_matching=True, seed=0)
        assert net.conv_layers[0].filter_edges != ()
        assert net.conv_layers[0].d_e == 2
        assert net.conv_layers[1].filter_edges == ()

    def test_edge_matching_without_pool_chains_zeta(self):
        net = GraphNetwork.build(n_classes=2, d_v=1, input_d_e=2,
                                 filters=(4, 4), edge_matching=True,
                                 pool=False, seed=0)
        # stage 2 consumes the stacked zeta scores of stage 1
        assert net.conv_layers[1].filter_edges != ()
        assert net.conv_layers[1].d_e == 4

    def test_parameter_names_unique_and_aligned(self):
        net = GraphNetwork.build(n_classes=2, d_v=1, filters=(3, 3), seed=0)
        names = [n for n, _ in net.parameter_arrays()]
        assert len(names) == len(set(names))
        assert names[-2:] == ["dense.weights", "dense.bias"]

    def test_invalid_config(self):
        with pytest.raises(gm.LayerError):
            GraphNetwork.build(n_classes=1, d_v=1, seed=0)
        with pytest.raises(gm.LayerError):
            GraphNetwork.build(n_classes=2, d_v=1, filters=(), seed=0)


class TestForwardBackward:
    def test_logits_shape_and_tape(self):
        net = GraphNetwork.build(n_classes=3, d_v=1, filters=(4, 4), seed=0)
        logits, tape = net.forward(small_graph())
        assert logits.shape == (3,)
        assert len(tape["records"]) == 2
        assert tape["pooled"].shape == (4,)

    def test_gradients_align_with_parameters(self):
        net = GraphNetwork.build(n_classes=2, d_v=1, filters=(3, 3), seed=0)
        G = small_graph()
        loss, grads = net.loss_and_grads(G, 1)
        params = net.parameter_arrays()
        assert len(grads) == len(params)
        for (name, p), g in zip(params, grads):
            assert g.shape == p.shape, name
        assert np.isfinite(loss)
        assert any(np.any(g != 0) for g in grads)

    def test_gradients_reach_first_conv(self):
        net = GraphNetwork.build(n_classes=2, d_v=1, filters=(3, 3), seed=3)
        loss, grads = net.loss_and_grads(small_graph(seed=5), 0)
        names = [n for n, _ in net.parameter_arrays()]
        g0 = grads[names.index("conv0.vertex_weights")]
        assert np.any(g0 != 0.0)

    def test_pool_free_variant_runs(self):
        net = GraphNetwork.build(n_classes=2, d_v=1, filters=(3, 3),
                                 pool=False, seed=0)
        logits, tape = net.forward(small_graph())
        assert logits.shape == (2,)
        assert all(rec.partition is None for rec in tape["records"])

    def test_edge_model_full_pass(self):
        net = GraphNetwork.build(n_classes=2, d_v=2, input_d_e=1,
                                 filters=(3, 3), edge_matching=True, seed=1)
        G = small_graph(seed=2, d_v=2, d_e=1)
        loss, grads = net.loss_and_grads(G, 1)
        assert np.isfinite(loss)
        names = [n for n, _ in net.parameter_arrays()]
        assert "conv0.edge_weights" in names

    def test_predict_returns_argmax(self):
        net = GraphNetwork.build(n_classes=4, d_v=1, filters=(3,), seed=0)
        G = small_graph()
        logits, _ = net.forward(G)
        assert net.predict(G) == int(np.argmax(logits))

    def test_activation_off_passes_scores_through(self):
        on = GraphNetwork.build(n_classes=2, d_v=1, filters=(3,),
                                activation=True, pool=False, seed=0)
        off = GraphNetwork.build(n_classes=2, d_v=1, filters=(3,),
                                 activation=False, pool=False, seed=0)
        G = small_graph(seed=7)
        _, tape_on = on.forward(G)
        _, tape_off = off.forward(G)
        conv_out = tape_off.pop("records")[0]
        # with activation the pooled vector has no negative contributions
        final_on = tape_on["final_graph"].vertex_attrs
        assert np.all(final_on >= 0.0)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        net = GraphNetwork.build(n_classes=3, d_v=2, filters=(4, 5),
                                 theta="avg", hops=2, seed=9)
        p = tmp_path / "model.npz"
        save_checkpoint(net, p)
        loaded = load_checkpoint(p)
        assert loaded.config == net.config
        for (na, a), (nb, b) in zip(net.parameter_arrays(),
                                    loaded.parameter_arrays()):
            assert na == nb
            assert np.array_equal(a, b)

    def test_round_trip_preserves_predictions(self, tmp_path):
        net = GraphNetwork.build(n_classes=2, d_v=1, filters=(4, 4), seed=3)
        G = small_graph(seed=11)
        la, _ = net.forward(G)
        p = tmp_path / "model.npz"
        save_checkpoint(net, p)
        lb, _ = load_checkpoint(p).forward(G)
        assert np.array_equal(la, lb)

    def test_edge_model_round_trip(self, tmp_path):
        net = GraphNetwork.build(n_classes=2, d_v=1, input_d_e=2,
                                 filters=(3, 3), edge_matching=True, seed=0)
        p = tmp_path / "model.npz"
        save_checkpoint(net, p)
        loaded = load_checkpoint(p)
        assert loaded.conv_layers[0].filter_edges == \
            net.conv_layers[0].filter_edges
        assert np.array_equal(loaded.conv_layers[0].edge_weights,
                              net.conv_layers[0].edge_weights)

    def test_corrupt_file_raises(self, tmp_path):
        p = tmp_path / "model.npz"
        p.write_bytes(b"not a checkpoint")
        with pytest.raises(Exception):
            load_checkpoint(p)
