"""Exact minimum-cost bipartite assignment with forbidden pairs.

``solve`` returns a maximum-cardinality matching over the allowed (finite)
entries that minimizes total cost, breaking ties by the lexicographically
smallest assignment when matchings are compared as row-sorted (row, column)
pair lists. Forbidden pairs are marked with ``FORBIDDEN`` (+inf).

The solver is a dense shortest-augmenting-path method (Jonker-Volgenant
style) run on a padded square matrix: each row and each column gets a
private "stay unmatched" slot priced high enough that cardinality dominates
cost. The algorithm uses only additions and subtractions, so integer cost
matrices are solved in exact arithmetic.
"""

from __future__ import annotations

import numpy as np

FORBIDDEN = float("inf")

_EPS = np.finfo(np.float64).eps


def _solve_square(cost: np.ndarray):
    """Min-cost perfect matching on a finite square matrix.

    Returns (col_to_row, u, v): the matching as a column-indexed array plus
    optimal dual potentials (reduced cost[i, j] - u[i] - v[j] is >= 0
    everywhere and == 0 on matched pairs).
    """
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n + 1)  # slot n is the virtual start column
    col_to_row = np.full(n + 1, -1, dtype=np.int64)

    for i in range(n):
        col_to_row[n] = i
        j0 = n
        minv = np.full(n, np.inf)
        way = np.full(n, n, dtype=np.int64)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = col_to_row[j0]
            free = ~used[:n]
            cur = cost[i0, :] - u[i0] - v[:n]
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            used_cols = used[:n]
            u[col_to_row[:n][used_cols]] += delta
            u[i] += delta  # virtual column carries the current row
            v[:n][used_cols] -= delta
            minv[free] -= delta
            j0 = j1
            if col_to_row[j0] == -1:
                break
        while j0 != n:
            j1 = way[j0]
            col_to_row[j0] = col_to_row[j1]
            j0 = j1
    return col_to_row[:n], u, v[:n]


def _pad(costs: np.ndarray, finite: np.ndarray):
    """Square matrix embedding unmatched-row/column slots.

    Row i may take its private slot (column M+i) and column j its private
    slot (row N+j) at price ``unmatched``; leftover slots pair off at zero.
    ``unmatched`` exceeds the total absolute real cost, so every extra real
    match is always worth taking; ``blocked`` cells can never appear in an
    optimal perfect matching.
    """
    n_rows, n_cols = costs.shape
    n = n_rows + n_cols
    unmatched = 1.0 + np.sum(np.abs(costs[finite])) if finite.any() else 1.0
    blocked = unmatched * (n + 4)
    pad = np.full((n, n), blocked)
    pad[:n_rows, :n_cols] = np.where(finite, costs, blocked)
    pad[np.arange(n_rows), n_cols + np.arange(n_rows)] = unmatched
    pad[n_rows + np.arange(n_cols), np.arange(n_cols)] = unmatched
    pad[n_rows:, n_cols:] = 0.0
    return pad, unmatched


def solve(costs: np.ndarray) -> list[tuple[int, int]]:
    """Optimal assignment for an (N, M) cost matrix; see the module docstring.

    Returns (row, column) pairs sorted by row. Entries must be finite or
    ``FORBIDDEN``; rows and columns without any allowed partner stay
    unmatched, as do pairs whose exclusion permits a larger matching.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2:
        raise ValueError(f"expected a 2-D cost matrix, got shape {costs.shape}")
    n_rows, n_cols = costs.shape
    if n_rows == 0 or n_cols == 0:
        return []
    if np.any(np.isnan(costs)) or np.any(np.isneginf(costs)):
        raise ValueError("cost entries must be finite or FORBIDDEN (+inf)")
    finite = np.isfinite(costs)
    if not finite.any():
        return []

    pad, unmatched = _pad(costs, finite)
    n = pad.shape[0]
    col_to_row, u, v = _solve_square(pad)
    value = float(np.sum(pad[col_to_row, np.arange(n)]))

    # Lexicographic refinement: walk real rows in order, pinning for each the
    # smallest column that some optimal matching assigns it. Dual feasibility
    # restricts candidates to zero-reduced-cost cells, so rows without ties
    # are pinned without extra solves; a candidate is accepted only when
    # fixing it provably preserves the optimal value.
    rows_idx = np.arange(n)
    cols_idx = np.arange(n)
    row_to_col = np.full(n, -1, dtype=np.int64)
    row_to_col[col_to_row] = np.arange(n)
    sub_match = row_to_col  # position-indexed within (rows_idx, cols_idx)
    accept_tol = 64.0 * _EPS * max(1.0, abs(value)) * n
    reduced_tol = 1e-8 * max(1.0, unmatched)

    pairs: list[tuple[int, int]] = []
    for r in range(n_rows):
        r_pos = int(np.where(rows_idx == r)[0][0])
        c_star_pos = int(sub_match[r_pos])
        c_star = int(cols_idx[c_star_pos])
        real_cols = cols_idx[(cols_idx < n_cols)]
        if c_star < n_cols:
            real_cols = real_cols[real_cols < c_star]
        chosen_pos = c_star_pos
        sub_cost = pad[np.ix_(rows_idx, cols_idx)]
        reduced = sub_cost[r_pos] - u[r_pos] - v
        for c in real_cols:
            if not finite[r, c]:
                continue
            c_pos = int(np.where(cols_idx == c)[0][0])
            if reduced[c_pos] > reduced_tol:
                continue
            keep_r = rows_idx != r
            keep_c = cols_idx != c
            trial = pad[np.ix_(rows_idx[keep_r], cols_idx[keep_c])]
            t_match, t_u, t_v = _solve_square(trial)
            t_value = float(np.sum(trial[t_match, np.arange(trial.shape[0])]))
            if pad[r, c] + t_value <= value + accept_tol:
                rows_idx = rows_idx[keep_r]
                cols_idx = cols_idx[keep_c]
                row_to_col_t = np.full(len(rows_idx), -1, dtype=np.int64)
                row_to_col_t[t_match] = np.arange(len(cols_idx))
                sub_match = row_to_col_t
                u, v = t_u, t_v
                value = t_value
                chosen_pos = -1
                pairs.append((r, int(c)))
                break
        if chosen_pos >= 0:
            # keep the current pair; the residual matching and duals stay optimal
            value -= pad[r, c_star]
            keep_r = rows_idx != r
            keep_c = cols_idx != c_star
            new_match = sub_match[keep_r]
            shift = (cols_idx[new_match] > c_star).astype(np.int64)
            sub_match = new_match - shift
            u = u[keep_r]
            v = v[keep_c]
            rows_idx = rows_idx[keep_r]
            cols_idx = cols_idx[keep_c]
            if c_star < n_cols and finite[r, c_star]:
                pairs.append((r, c_star))
    return pairs
