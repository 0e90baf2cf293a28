"""Label matching between frozen output labels and the current hidden labels.

Hidden labels are re-derived from scratch at every step and may be permuted
arbitrarily with respect to earlier steps. The co-occurrence counts between
the labels already emitted and the hidden labels of the same segments define
a bipartite graph; its maximum-weight matching tells which output speaker a
hidden cluster currently stands for.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from chkptdiar.core import InvalidInputError


def solve_min_assignment(cost: Sequence[Sequence]) -> list[int]:
    """Hungarian algorithm (shortest augmenting paths with potentials).

    ``cost`` is square. Works on Python ints exactly as well as on floats.
    Returns the column assigned to each row.
    """
    n = len(cost)
    if n == 0:
        return []
    big = max(abs(x) for row in cost for x in row)
    inf = (big + 1) * 4 * (n + 1) ** 2
    if isinstance(big, float):
        inf = float(inf)
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = cost[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assignment = [0] * n
    for j in range(1, n + 1):
        assignment[p[j] - 1] = j - 1
    return assignment


def max_weight_assignment(weights, *, lexicographic: bool = False) -> list[tuple[int, int]]:
    """Maximum-weight matching of a rectangular non-negative weight matrix.

    The smaller side is padded with zero-weight dummies, which are dropped
    from the returned ``(row, col)`` pairs. With ``lexicographic=True`` the
    weights must be integers, and among all optimal matchings the one whose
    row-by-row column choices are lexicographically smallest is returned.
    """
    w = np.asarray(weights)
    if w.ndim != 2:
        raise InvalidInputError("weights must be a 2-D matrix")
    n_rows, n_cols = w.shape
    if n_rows == 0 or n_cols == 0:
        return []
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite and non-negative")
    n = max(n_rows, n_cols)
    if lexicographic:
        if not np.all(w == np.round(w)):
            raise InvalidInputError("lexicographic tie-breaking needs integer weights")
        scale = n**n
        place = [n ** (n - 1 - r) for r in range(n)]
        cost = [
            [(-int(w[r, c]) * scale if r < n_rows and c < n_cols else 0) + c * place[r] for c in range(n)]
            for r in range(n)
        ]
    else:
        cost = [
            [(-float(w[r, c]) if r < n_rows and c < n_cols else 0.0) for c in range(n)]
            for r in range(n)
        ]
    cols = solve_min_assignment(cost)
    return [(r, c) for r, c in enumerate(cols) if r < n_rows and c < n_cols]


@dataclass(frozen=True, eq=False)
class CooccurrenceMatrix:
    """counts[i, j] = segments carrying output label rows[i] and hidden label cols[j]."""

    rows: tuple[Hashable, ...]
    cols: tuple[Hashable, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[tuple[Hashable, Hashable], int]:
        r_idx, c_idx = np.nonzero(self.counts)
        return {(self.rows[r], self.cols[c]): int(self.counts[r, c]) for r, c in zip(r_idx, c_idx)}


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[Hashable, Hashable], ...]
    total_weight: int

    def output_for(self, hidden: Hashable):
        for o, h in self.pairs:
            if h == hidden:
                return o
        return None


def build_cooccurrence(output_labels: Sequence, hidden_labels: Sequence) -> CooccurrenceMatrix:
    """Count label pairs over the segments that already have an output label.

    ``hidden_labels`` may be one element longer than ``output_labels``; that
    trailing entry belongs to the segment being labelled and is ignored.
    """
    n = len(output_labels)
    if len(hidden_labels) not in (n, n + 1):
        raise InvalidInputError(
            f"hidden labels ({len(hidden_labels)}) must cover the {n} frozen segments "
            "plus at most one new segment"
        )
    if n == 0:
        return CooccurrenceMatrix((), (), np.zeros((0, 0), dtype=np.int64))
    out = np.asarray(output_labels)
    hid = np.asarray(hidden_labels)[:n]
    if out.dtype.kind in "iu" and hid.dtype.kind in "iu":
        rows, r_idx = np.unique(out, return_inverse=True)
        cols, c_idx = np.unique(hid, return_inverse=True)
        counts = np.zeros((rows.size, cols.size), dtype=np.int64)
        np.add.at(counts, (r_idx, c_idx), 1)
        return CooccurrenceMatrix(tuple(rows.tolist()), tuple(cols.tolist()), counts)
    pairs = Counter(zip(output_labels, list(hidden_labels)[:n]))
    rows = tuple(sorted({o for o, _ in pairs}))
    cols = tuple(sorted({h for _, h in pairs}))
    r_pos = {o: i for i, o in enumerate(rows)}
    c_pos = {h: j for j, h in enumerate(cols)}
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for (o, h), cnt in pairs.items():
        counts[r_pos[o], c_pos[h]] = cnt
    return CooccurrenceMatrix(rows, cols, counts)


def hungarian(matrix: CooccurrenceMatrix) -> Matching:
    """Maximum-weight bipartite matching of output labels to hidden labels."""
    pairs = max_weight_assignment(matrix.counts, lexicographic=True)
    total = sum(int(matrix.counts[r, c]) for r, c in pairs)
    return Matching(tuple((matrix.rows[r], matrix.cols[c]) for r, c in pairs), total)


def infer_label(m: Matching, hidden_of_new: Hashable, next_label: int) -> int:
    """Output label for the newest segment.

    Falls back to ``next_label`` (a label never emitted before) when the
    segment's hidden cluster has no matched output label.
    """
    matched = m.output_for(hidden_of_new)
    return next_label if matched is None else int(matched)
