"""Finite-difference validation harness."""

import numpy as np
import pytest

from gmconv.gradcheck import (DEFAULT_TOLERANCE, LAYER_KINDS, relative_error,
                              run_all)


class TestRelativeError:
    def test_zero_for_equal(self):
        g = np.array([1.0, -2.0, 3.0])
        assert relative_error(g, g.copy()) == 0.0

    def test_formula(self):
        # |a - n| / max(|a|, |n|, floor), worst entry
        a = np.array([2.0, 100.0])
        n = np.array([2.0, 101.0])
        assert relative_error(a, n) == pytest.approx(1.0 / 101.0)

    def test_floor_guards_tiny_gradients(self):
        # near-zero pairs divide by the floor, not by each other
        assert relative_error([1e-9], [2e-9]) < 1e-5

    def test_empty(self):
        assert relative_error([], []) == 0.0


class TestRunAll:
    def test_all_kinds_pass(self):
        report, ok = run_all(seed=3, instances=3)
        assert ok
        assert set(report) == set(LAYER_KINDS)
        for kind, entry in report.items():
            assert entry["passed"], kind
            assert entry["instances"] == 3
            assert entry["max_rel_error"] < DEFAULT_TOLERANCE

    def test_subset_of_kinds(self):
        report, ok = run_all(seed=0, instances=2, kinds=("relu", "dense"))
        assert ok
        assert set(report) == {"relu", "dense"}

    def test_deterministic(self):
        r1, _ = run_all(seed=5, instances=2, kinds=("dense", "relu"))
        r2, _ = run_all(seed=5, instances=2, kinds=("dense", "relu"))
        assert r1 == r2

    def test_corrupt_trips_failure_path(self):
        report, ok = run_all(seed=0, instances=1, kinds=("relu",),
                             corrupt=True)
        assert not ok
        assert not report["relu"]["passed"]
        assert report["relu"]["max_rel_error"] >= 1.0

    def test_conv_kinds_small_budget(self):
        # the conv checks are the slow ones; keep this smoke-sized, the
        # acceptance suite runs them at full instance count
        report, ok = run_all(
            seed=1, instances=2,
            kinds=("conv_no_edge", "conv_edges_max", "conv_edges_avg"))
        assert ok
        for entry in report.values():
            assert entry["max_rel_error"] < DEFAULT_TOLERANCE
