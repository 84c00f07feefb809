"""Maximum-weight bipartite alignment with a deterministic tie rule.

Both solvers return a maximum-cardinality one-to-one matching (size
min(n, m)) whose total weight is maximal; among optima within a small
tolerance the sorted pair sequence that is lexicographically smallest wins.
Totals are summed over the chosen pairs in sorted order, so the two solvers
agree bit-for-bit whenever they agree on the matching.
"""
from __future__ import annotations

import itertools
import os

import numpy as np

from ..core import TemplexError

if os.environ.get("TEMPLEX_PURE_PYTHON"):
    from ._assign_py import solve_min
    BACKEND = "python"
else:
    try:
        from ._assign import solve_min
        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._assign_py import solve_min
        BACKEND = "python"

BRUTEFORCE_LIMIT = 8


class TooLarge(TemplexError):
    pass


def _as_matrix(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        if w.size == 0:
            return w.reshape(0, 0)
        raise ValueError("similarity matrix must be two-dimensional")
    if not np.all(np.isfinite(w)):
        raise ValueError("similarity matrix has non-finite entries")
    return w


def _tolerance(w: np.ndarray) -> float:
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    return 1e-9 * max(1.0, scale) * max(1, min(w.shape))


def _total(w: np.ndarray, pairs) -> float:
    total = 0.0
    for i, j in sorted(pairs):
        total += float(w[i, j])
    return total


def max_weight(w: np.ndarray, rows, cols):
    """Best full-cardinality matching on the sub-matrix; returns (value, pairs)."""
    rows, cols = list(rows), list(cols)
    if not rows or not cols:
        return 0.0, []
    sub = w[np.ix_(rows, cols)]
    flip = sub.shape[0] > sub.shape[1]
    if flip:
        sub = sub.T
    assign = solve_min(sub.max() - sub)
    pairs = [(r, int(c)) for r, c in enumerate(assign)]
    if flip:
        pairs = [(c, r) for r, c in pairs]
    pairs = [(rows[r], cols[c]) for r, c in pairs]
    return _total(w, pairs), pairs


def align_optimal(similarity) -> tuple[list[tuple[int, int]], float]:
    """Kuhn-Munkres alignment of references (rows) to predictions (columns).

    Returns (sorted pair list, total similarity).
    """
    w = _as_matrix(similarity)
    n, m = w.shape
    k = min(n, m)
    if k == 0:
        return [], 0.0
    best, current = max_weight(w, range(n), range(m))
    tol = _tolerance(w)
    chosen: list[tuple[int, int]] = []
    acc = 0.0
    used_cols: set[int] = set()
    last_row = -1
    current = sorted(current)
    while len(chosen) < k:
        target = current[len(chosen)]
        picked = None
        # any lexicographically smaller next pair that still reaches the optimum?
        for i in range(last_row + 1, target[0] + 1):
            for j in range(m):
                if (i, j) >= target:
                    break
                if j in used_cols:
                    continue
                rows = range(i + 1, n)
                cols = [c for c in range(m) if c not in used_cols and c != j]
                if min(len(rows), len(cols)) != k - len(chosen) - 1:
                    continue
                rest, rest_pairs = max_weight(w, rows, cols)
                if acc + w[i, j] + rest >= best - tol:
                    picked = (i, j)
                    current = chosen + [(i, j)] + sorted(rest_pairs)
                    break
            if picked is not None:
                break
        if picked is None:
            picked = target
        chosen.append(picked)
        acc += float(w[picked])
        used_cols.add(picked[1])
        last_row = picked[0]
    return chosen, _total(w, chosen)


def align_bruteforce(similarity) -> tuple[list[tuple[int, int]], float]:
    """Exhaustive oracle for :func:`align_optimal`; dimensions are capped at 8."""
    w = _as_matrix(similarity)
    n, m = w.shape
    if max(n, m) > BRUTEFORCE_LIMIT:
        raise TooLarge(f"{n}x{m} exceeds the brute-force limit of {BRUTEFORCE_LIMIT}")
    if min(n, m) == 0:
        return [], 0.0
    candidates = []
    if n <= m:
        for cols in itertools.permutations(range(m), n):
            pairs = list(enumerate(cols))
            candidates.append((_total(w, pairs), pairs))
    else:
        for rows in itertools.permutations(range(n), m):
            pairs = sorted((r, c) for c, r in enumerate(rows))
            candidates.append((_total(w, pairs), pairs))
    best = max(t for t, _ in candidates)
    tol = _tolerance(w)
    pairs = min(p for t, p in candidates if t >= best - tol)
    return pairs, _total(w, pairs)
