import itertools

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from permsync.assign import AssignmentProblem, auction_lap, project_onto_universe, prune
from permsync.matmodel import BlockStructure, UniverseAssignment


def brute_force_best(B):
    """Oracle: maximum total over all injective row -> column maps."""
    r, c = B.shape
    return max(B[np.arange(r), list(p)].sum() for p in itertools.permutations(range(c), r))


def check_injective(cols, c):
    assert len(set(cols.tolist())) == cols.size
    assert np.all((cols >= 0) & (cols < c))


def test_square_example():
    B = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    cols = auction_lap(B)
    assert B[np.arange(3), cols].sum() == 11.0


def test_rectangular_example():
    B = np.array([[1.0, 9.0, 2.0, 0.0], [1.0, 8.0, 7.0, 0.0]])
    assert auction_lap(B).tolist() == [1, 2]


def test_single_entry_and_empty():
    assert auction_lap(np.array([[3.0]])).tolist() == [0]
    assert auction_lap(np.zeros((0, 4))).size == 0


def test_brute_force_oracle_small(rng):
    for _ in range(200):
        r = int(rng.integers(1, 5))
        c = int(rng.integers(r, 7))
        B = rng.integers(-5, 10, size=(r, c)).astype(float)
        cols = auction_lap(B)
        check_injective(cols, c)
        assert B[np.arange(r), cols].sum() == brute_force_best(B)


def test_float_benefits_close_to_scipy(rng):
    for _ in range(100):
        r = int(rng.integers(1, 15))
        c = int(rng.integers(r, 20))
        B = rng.standard_normal((r, c))
        rr, cc = linear_sum_assignment(B, maximize=True)
        cols = auction_lap(B)
        check_injective(cols, c)
        assert B[np.arange(r), cols].sum() >= B[rr, cc].sum() - 1e-9 * r


def test_ties_and_constant_matrix():
    B = np.ones((4, 6))
    cols = auction_lap(B)
    check_injective(cols, 6)


def test_large_magnitudes():
    B = np.array([[1e12, 0.0], [0.0, 1e12]])
    assert auction_lap(B).tolist() == [0, 1]


def test_problem_validation():
    with pytest.raises(ValueError):
        AssignmentProblem(np.ones((3, 2)))
    with pytest.raises(ValueError):
        AssignmentProblem(np.array([[np.nan]]))


def test_project_onto_universe():
    st = BlockStructure((2, 3))
    V = np.array([[0.9, 0.8, 0.0],
                  [0.8, 0.1, 0.0],
                  [0.1, 0.2, 0.9],
                  [0.6, 0.0, 0.3],
                  [0.0, 0.7, 0.0]])
    U = project_onto_universe(V, st)
    # first object: (0->1, 1->0) totals 1.6 beats the greedy (0->0, 1->1) at 1.0
    assert U.labels.tolist() == [1, 0, 2, 0, 1]


def test_project_rejects_small_universe():
    with pytest.raises(ValueError, match="object 2"):
        project_onto_universe(np.zeros((5, 2)), BlockStructure((2, 3)))


def test_prune_moves_low_confidence_rows():
    st = BlockStructure((2, 2))
    U = UniverseAssignment(st, 2, [0, 1, 1, 0])
    V = np.array([[0.9, 0.0], [0.0, 0.2], [0.0, 0.1], [0.8, 0.0]])
    P = prune(V, U, 0.5)
    assert P.d == 4
    assert P.labels.tolist() == [0, 2, 3, 0]
    assert prune(V, U, 0.0) is U
    with pytest.raises(ValueError):
        prune(V, U, -1.0)


def test_prune_monotone_in_theta(rng):
    st = BlockStructure((4, 4, 4))
    V = rng.random((12, 5))
    U = project_onto_universe(V, st)
    counts = []
    for theta in (0.0, 0.2, 0.4, 0.6, 0.8, 1.1):
        P = prune(V, U, theta)
        counts.append(int(np.sum(np.bincount(P.labels) > 1)))
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] == 0
