"""Hungarian method for rectangular cost matrices with forbidden entries.

Forbidden entries are marked with a sentinel value.  The solver first maximises
the number of real (non-sentinel) pairs and then minimises their total cost.
Among equally cheap optima it returns the lexicographically smallest one, so
results are reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AssignmentContractError(ValueError):
    pass


@dataclass
class Assignment:
    pairs: list = field(default_factory=list)
    total_cost: float = 0.0

    def row_to_col(self):
        return dict(self.pairs)

    def col_to_row(self):
        return {c: r for r, c in self.pairs}

    def __len__(self):
        return len(self.pairs)


def _hungarian(a):
    """Shortest augmenting path Hungarian method on a square matrix.

    Returns ``(col_of_row, u, v)`` where ``a[i, j] - u[i] - v[j] >= 0`` for
    all entries and equality holds on the matching.
    """
    n = a.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)      # p[j]: row (1-based) owning column j
    way = np.zeros(n + 1, dtype=np.int64)
    # 1-based padding so column 0 can serve as the virtual root
    cost = np.zeros((n + 1, n + 1))
    cost[1:, 1:] = a
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = cost[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, INF)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[p[1:] - 1] = np.arange(n)
    return col_of_row, u[1:], v[1:]


def _lexicographic_refine(col_of_row, tight):
    """Move to the lexicographically smallest perfect matching in ``tight``.

    ``tight[i, j]`` marks zero-reduced-cost edges; every perfect matching
    inside it is optimal.  Rows are fixed one at a time, each re-routed to
    its smallest column that still admits a completion.
    """
    n = len(col_of_row)
    col = col_of_row.copy()
    row = np.empty(n, dtype=np.int64)
    row[col] = np.arange(n)
    adj = [np.flatnonzero(tight[i]) for i in range(n)]
    for i in range(n):
        for c in adj[i]:
            if c >= col[i]:
                break
            # Free col[i]; the owner of c must reach it along tight edges using
            # only rows after i and never touching c.
            target = col[i]
            start = row[c]
            if start < i:
                continue
            parent = {start: None}
            via = {}
            stack = [start]
            found = None
            seen_cols = {c}
            while stack and found is None:
                r = stack.pop()
                for cc in adj[r]:
                    if cc in seen_cols:
                        continue
                    seen_cols.add(cc)
                    if cc == target:
                        found = (r, cc)
                        break
                    nr = row[cc]
                    if nr <= i or nr in parent:
                        continue
                    parent[nr] = r
                    via[nr] = cc
                    stack.append(nr)
            if found is None:
                continue
            r, cc = found
            while r is not None:
                col[r] = cc
                row[cc] = r
                cc = via.get(r)
                r = parent[r]
            col[i] = c
            row[c] = i
            break
    return col


def solve_min_cost(costs, infeasible_sentinel=None) -> Assignment:
    """Maximum-cardinality, minimum-cost one-to-one assignment.

    ``costs`` may be rectangular.  Entries equal to ``infeasible_sentinel``
    are never returned as pairs.  Every other entry must be finite and
    strictly below the sentinel.
    """
    a = np.asarray(costs, dtype=float)
    if a.ndim != 2:
        raise AssignmentContractError(f"cost matrix must be 2-D, got shape {a.shape}")
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        return Assignment()
    if infeasible_sentinel is None:
        feasible = np.isfinite(a)
    else:
        feasible = a != infeasible_sentinel
        if np.isnan(a).any():
            raise AssignmentContractError("cost matrix contains NaN")
        if feasible.any() and not (a[feasible] < infeasible_sentinel).all():
            raise AssignmentContractError(
                "sentinel must be strictly greater than every feasible cost")
    if not np.isfinite(a[feasible]).all():
        raise AssignmentContractError("feasible costs must be finite")
    if not feasible.any():
        return Assignment()

    pairs = []
    for block_rows, block_cols in _components(feasible):
        if len(block_rows) == 1 and len(block_cols) == 1:
            pairs.append((block_rows[0], block_cols[0]))
            continue
        sub = a[np.ix_(block_rows, block_cols)]
        local = _solve_block(sub, feasible[np.ix_(block_rows, block_cols)])
        pairs.extend((block_rows[r], block_cols[c]) for r, c in local)
    pairs.sort()
    total = 0.0
    for r, c in pairs:
        total += float(a[r, c])
    return Assignment(pairs=pairs, total_cost=total)


def _components(feasible):
    """Connected blocks of the bipartite graph of feasible entries.

    Cost, cardinality and the lexicographic order all decompose over blocks,
    so each can be solved on its own.
    """
    rows, cols = feasible.shape
    row_seen = np.zeros(rows, dtype=bool)
    col_seen = np.zeros(cols, dtype=bool)
    blocks = []
    for start in range(rows):
        if row_seen[start] or not feasible[start].any():
            continue
        row_seen[start] = True
        block_rows, block_cols = [start], []
        frontier = [start]
        while frontier:
            new_cols = np.flatnonzero(feasible[frontier].any(axis=0) & ~col_seen)
            col_seen[new_cols] = True
            block_cols.extend(int(c) for c in new_cols)
            new_rows = np.flatnonzero(feasible[:, new_cols].any(axis=1) & ~row_seen)
            row_seen[new_rows] = True
            block_rows.extend(int(r) for r in new_rows)
            frontier = list(new_rows)
        blocks.append((sorted(block_rows), sorted(block_cols)))
    return blocks


def _solve_block(a, feasible):
    rows, cols = a.shape
    low = a[feasible].min()
    span = a[feasible].max() - low
    # One extra real pair always outweighs any reshuffle of the others.
    big = (rows + cols + 1) * (span + 1.0)
    # Every row owns a dummy column (cost ``big``) that stands for
    # "unmatched"; forbidden real entries cost more than any dummy so they
    # are never used as placeholders.  Dummy columns sit after the real ones,
    # which puts unmatched rows last in the lexicographic order.  The extra
    # rows soak up the columns left over.
    # A fully feasible block has no placeholders to worry about, and plain
    # padding to a square already provides the dummies.
    n = max(rows, cols) if feasible.all() else rows + cols
    square = np.zeros((n, n))
    square[:rows, :cols] = np.where(feasible, a - low, 2.0 * big)
    square[:rows, cols:] = big

    col_of_row, u, v = _hungarian(square)
    reduced = square - u[:, None] - v[None, :]
    tol = 1e-9 * (span + 1.0)
    tight = reduced <= tol
    tight[np.arange(n), col_of_row] = True
    col_of_row = _lexicographic_refine(col_of_row, tight)
    return [(r, int(col_of_row[r])) for r in range(rows)
            if col_of_row[r] < cols and feasible[r, col_of_row[r]]]
