"""Minimum-cost assignment against brute-force enumeration."""

import itertools

import numpy as np
import pytest

from gaptrack import FORBIDDEN, solve


def brute_force(costs):
    """Best matching by enumeration: max cardinality, then min cost, then lexicographic."""
    costs = np.asarray(costs, dtype=np.float64)
    n, m = costs.shape
    best = None
    rows = list(range(n))
    for size in range(min(n, m), -1, -1):
        for row_subset in itertools.combinations(rows, size):
            for col_perm in itertools.permutations(range(m), size):
                if any(np.isinf(costs[r, c]) for r, c in zip(row_subset, col_perm)):
                    continue
                pairs = sorted(zip(row_subset, col_perm))
                total = sum(costs[r, c] for r, c in pairs)
                # one-decimal costs: rounding undoes float summation-order
                # noise so decimal ties rank as ties
                key = (round(total, 6), pairs)
                if best is None or key < best:
                    best = key
        if best is not None:
            return best[1]
    return []


def test_two_by_two_hand_example():
    assert solve(np.array([[1.0, 2.0], [3.0, 1.0]])) == [(0, 0), (1, 1)]


def test_competition_for_one_cheap_column():
    # Rows 0 and 1 both want column 0; row 1 loses and stays on its own column.
    costs = np.array([[1.0, 9.0], [2.0, 9.0], [9.0, 1.0]])
    assert solve(costs) == [(0, 0), (2, 1)]


def test_rectangular_both_orientations():
    costs = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0]])
    assert solve(costs) == brute_force(costs)
    assert solve(costs.T) == brute_force(costs.T)


def test_empty_and_degenerate_shapes():
    assert solve(np.zeros((0, 3))) == []
    assert solve(np.zeros((3, 0))) == []
    full = np.full((2, 2), FORBIDDEN)
    assert solve(full) == []


def test_forbidden_blocks_pairs_not_rows():
    costs = np.array([[FORBIDDEN, 5.0], [1.0, FORBIDDEN]])
    assert solve(costs) == [(0, 1), (1, 0)]


def test_cardinality_dominates_cost():
    # Matching both rows costs 100, far worse than the single cheap pair,
    # but a larger matching always wins.
    costs = np.array([[0.1, FORBIDDEN], [50.0, 50.0]])
    assert solve(costs) == [(0, 0), (1, 1)]


def test_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(10)
    for trial in range(400):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 5))
        costs = np.round(rng.uniform(0.0, 10.0, size=(n, m)), 1)
        # forbid a random subset of pairs
        costs[rng.random(size=(n, m)) < 0.3] = FORBIDDEN
        got = solve(costs)
        want = brute_force(costs)
        got_cost = sum(costs[r, c] for r, c in got)
        want_cost = sum(costs[r, c] for r, c in want)
        assert len(got) == len(want), f"trial {trial}: cardinality {got} vs {want}"
        assert got_cost == pytest.approx(want_cost), f"trial {trial}: cost"
        assert got == want, f"trial {trial}: tie-break {got} vs {want}"


def test_integer_costs_solved_exactly():
    rng = np.random.default_rng(11)
    for _ in range(100):
        costs = rng.integers(0, 100, size=(4, 4)).astype(np.float64)
        got = solve(costs)
        want = brute_force(costs)
        assert got == want


def test_lexicographic_tie_break():
    # All-equal costs admit many optimal matchings; the identity is smallest.
    costs = np.ones((3, 3))
    assert solve(costs) == [(0, 0), (1, 1), (2, 2)]


def test_shift_invariance():
    rng = np.random.default_rng(12)
    costs = rng.uniform(0.0, 5.0, size=(4, 4))
    base = solve(costs)
    assert solve(costs + 17.5) == base


def test_input_validation():
    with pytest.raises(ValueError):
        solve(np.array([[1.0, np.nan], [2.0, 3.0]]))
    with pytest.raises(ValueError):
        solve(np.array([[1.0, -np.inf], [2.0, 3.0]]))
    with pytest.raises(ValueError):
        solve(np.zeros(3))
