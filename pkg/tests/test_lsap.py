"""Assignment solver against an exhaustive permutation oracle."""

import numpy as np
import pytest

from gmconv import AssignmentError, solve_lsap

from conftest import exhaustive_lsap


def test_known_two_by_two():
    assign, value = solve_lsap([[4.0, 1.0], [2.0, 3.0]])
    assert assign.tolist() == [1, 0]
    assert value == 3.0


def test_identity_on_diagonal_friendly():
    C = np.array([[1.0, 9.0, 9.0],
                  [9.0, 1.0, 9.0],
                  [9.0, 9.0, 1.0]])
    assign, value = solve_lsap(C)
    assert assign.tolist() == [0, 1, 2]
    assert value == 3.0


def test_all_equal_matrix_resolves_to_identity():
    assign, value = solve_lsap(np.full((4, 4), 2.5))
    assert assign.tolist() == [0, 1, 2, 3]
    assert value == 10.0


def test_single_entry():
    assign, value = solve_lsap([[7.0]])
    assert assign.tolist() == [0]
    assert value == 7.0


def test_matches_oracle_on_random_matrices():
    rng = np.random.default_rng(123)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        C = rng.uniform(-10.0, 10.0, size=(n, n))
        assign, value = solve_lsap(C)
        oracle_assign, oracle_value = exhaustive_lsap(C)
        assert value == oracle_value
        assert assign.tolist() == oracle_assign.tolist()


def test_lexicographic_tie_break_on_integer_ties():
    # both diagonals are optimal; the smaller row-major vector must win
    assign, value = solve_lsap([[1.0, 1.0], [1.0, 1.0]])
    assert assign.tolist() == [0, 1]
    assert value == 2.0

    # many ties from duplicated rows
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 6))
        base = rng.integers(0, 3, size=(n, n)).astype(np.float64)
        assign, value = solve_lsap(base)
        oracle_assign, oracle_value = exhaustive_lsap(base)
        assert value == oracle_value
        assert assign.tolist() == oracle_assign.tolist()


def test_dyadic_ties_resolve_lexicographically():
    # entries are exactly representable so all tied assignments have
    # exactly zero reduced-cost residue
    C = np.array([[0.5, 0.25, 0.75],
                  [0.25, 0.5, 0.75],
                  [0.75, 0.75, 0.5]])
    assign, value = solve_lsap(C)
    oracle_assign, oracle_value = exhaustive_lsap(C)
    assert value == oracle_value
    assert assign.tolist() == oracle_assign.tolist()


def test_negative_entries():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        C = rng.uniform(-50.0, -1.0, size=(n, n))
        assign, value = solve_lsap(C)
        _, oracle_value = exhaustive_lsap(C)
        assert value == oracle_value


def test_rejects_non_square():
    with pytest.raises(AssignmentError):
        solve_lsap(np.zeros((2, 3)))


def test_rejects_empty_and_bad_rank():
    with pytest.raises(AssignmentError):
        solve_lsap(np.zeros((0, 0)))
    with pytest.raises(AssignmentError):
        solve_lsap(np.zeros(4))


def test_rejects_non_finite():
    with pytest.raises(AssignmentError):
        solve_lsap([[1.0, np.inf], [0.0, 1.0]])
    with pytest.raises(AssignmentError):
        solve_lsap([[np.nan, 1.0], [0.0, 1.0]])
