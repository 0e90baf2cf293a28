"""Slow, independent reference implementations used as test oracles.

None of these import the code under test beyond plain data types.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def _signed_square(dot: int, norm_a: int, norm_b: int) -> Fraction:
    # monotone in the cosine, exact on integer vectors
    sign = (dot > 0) - (dot < 0)
    return sign * Fraction(dot * dot, norm_a * norm_b)


def brute_ahc(vectors, theta: float) -> frozenset:
    """Greedy centroid-linkage AHC in exact rational arithmetic.

    ``vectors`` must hold integers. Cosines between cluster means equal
    cosines between cluster sums, so only integer sums are needed.
    Ties go to the lexicographically smallest (min id, min id) pair.
    """
    vecs = [[int(x) for x in v] for v in vectors]
    clusters = [[i] for i in range(len(vecs))]
    sums = [list(v) for v in vecs]
    th = Fraction(theta)
    th = th * abs(th)
    dot = lambda a, b: sum(x * y for x, y in zip(a, b))
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(range(len(clusters)), 2):
            sim = _signed_square(dot(sums[a], sums[b]), dot(sums[a], sums[a]), dot(sums[b], sums[b]))
            key = (-sim, clusters[a][0], clusters[b][0])
            if best is None or key < best[0]:
                best = (key, a, b)
        (neg_sim, _, _), a, b = best
        if -neg_sim < th:
            break
        clusters[a] = sorted(clusters[a] + clusters[b])
        sums[a] = [x + y for x, y in zip(sums[a], sums[b])]
        del clusters[b], sums[b]
    return frozenset(frozenset(c) for c in clusters)


def brute_max_matching(weights) -> int:
    w = np.asarray(weights)
    r, c = w.shape
    if r == 0 or c == 0:
        return 0
    if r <= c:
        return max(sum(int(w[i, p[i]]) for i in range(r)) for p in itertools.permutations(range(c), r))
    return max(sum(int(w[p[j], j]) for j in range(c)) for p in itertools.permutations(range(r), c))


def frame_der(reference, hypothesis, collar: float, step: float = 0.01) -> float:
    """Frame-level DER on a fixed grid with exhaustive speaker mapping.

    ``reference`` and ``hypothesis`` are lists of (speaker, start, end)
    whose times lie on the grid.
    """
    to_frame = lambda t: int(round(t / step))
    ref_turns = [(s, to_frame(a), to_frame(b)) for s, a, b in reference]
    hyp_turns = [(s, to_frame(a), to_frame(b)) for s, a, b in hypothesis]
    n = max([b for _, _, b in ref_turns + hyp_turns] + [0]) + to_frame(collar) + 2
    ref_spk = sorted({s for s, _, _ in ref_turns})
    hyp_spk = sorted({s for s, _, _ in hyp_turns})
    ref = np.zeros((len(ref_spk), n), dtype=bool)
    hyp = np.zeros((len(hyp_spk), n), dtype=bool)
    for s, a, b in ref_turns:
        ref[ref_spk.index(s), a:b] = True
    for s, a, b in hyp_turns:
        hyp[hyp_spk.index(s), a:b] = True
    scored = np.ones(n, dtype=bool)
    c = to_frame(collar)
    if c:
        for _, a, b in ref_turns:
            for x in (a, b):
                scored[max(0, x - c): x + c] = False
    ref, hyp = ref[:, scored], hyp[:, scored]
    n_ref, n_hyp = ref.sum(0), hyp.sum(0)
    total = n_ref.sum()
    errors = np.maximum(n_ref, n_hyp).sum()
    best = 0
    small, large = (ref, hyp) if len(ref_spk) <= len(hyp_spk) else (hyp, ref)
    for perm in itertools.permutations(range(len(large)), len(small)):
        best = max(best, sum(int(np.sum(small[i] & large[j])) for i, j in enumerate(perm)))
    return float(errors - best) / float(total)


def dense_adjacency(vectors, s: float) -> np.ndarray:
    v = np.asarray(vectors, dtype=float)
    u = v / np.linalg.norm(v, axis=1, keepdims=True)
    sims = np.clip(u @ u.T, -1.0, 1.0)
    adj = np.where(sims > s, sims, 0.0)
    np.fill_diagonal(adj, 0.0)
    return adj
