"""Centroid-linkage agglomerative clustering and its checkpointed online form.

Both ``ahc`` and ``chkpt_step`` run the same greedy merge loop. The loop works
on the Gram matrix of cluster *sum* vectors: cosine similarity is scale
invariant, so the centroid similarity of two clusters is
``<s_a, s_b> / (|s_a| |s_b|)``, and merging two clusters only needs the row
update ``G[a] += G[b]``. No embedding dimension enters the loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from chkptdiar.core import (
    Cluster,
    ClusterState,
    Embedding,
    InvalidInputError,
    check_dimension,
)


class Merge(NamedTuple):
    label_a: int
    label_b: int
    similarity: float


MergeTrace = tuple[Merge, ...]


@njit(cache=True)
def gram_matrix(X):
    """Inner products with a fixed summation order.

    Entry (i, j) is bit-identical to ``gram_row(X, j)[i]``, which keeps the
    incremental cache used in full-AHC mode consistent with fresh runs.
    """
    m, d = X.shape
    G = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            acc = 0.0
            for t in range(d):
                acc += X[i, t] * X[j, t]
            G[i, j] = acc
            G[j, i] = acc
    return G


@njit(cache=True)
def gram_row(X, n):
    out = np.empty(n + 1)
    d = X.shape[1]
    for i in range(n + 1):
        acc = 0.0
        for t in range(d):
            acc += X[i, t] * X[n, t]
        out[i] = acc
    return out


@njit(cache=True)
def _row_best(S, active, r, best_j, best_s):
    # candidates are restricted to j > r; scanning upward keeps the first
    # maximum, i.e. the smallest pair key, since slots are ordered by
    # minimum segment id
    m = S.shape[0]
    bj = -1
    bs = -np.inf
    for j in range(r + 1, m):
        if active[j]:
            s = S[r, j]
            if bj < 0 or s > bs:
                bj = j
                bs = s
    best_j[r] = bj
    best_s[r] = bs


@njit(cache=True)
def _cos(G, norms, i, j):
    den = norms[i] * norms[j]
    if den == 0.0:
        return 0.0
    return G[i, j] / den


@njit(cache=True)
def _snapshot(parent, labels, roots_out, labels_out):
    m = parent.shape[0]
    for i in range(m):
        r = i
        while parent[r] != r:
            r = parent[r]
        roots_out[i] = r
    labels_out[:] = labels


@njit(cache=True)
def _agglomerate(G, sizes, labels, theta, k):
    """Greedy merge loop over slots ordered by minimum segment id.

    Stops at the similarity threshold for the result. When ``k > 0`` it also
    records the first state with at most ``k`` clusters, merging past the
    threshold if needed so the checkpoint never holds more than ``k``.
    G is modified in place.

    Row r keeps its best partner among slots j > r. When that partner takes
    part in a merge, the row keeps its old value as an upper bound and is
    marked stale; stale rows are rescanned only when they reach the top.
    """
    m = G.shape[0]
    sizes = sizes.copy()
    labels = labels.copy()
    norms = np.empty(m)
    for i in range(m):
        norms[i] = np.sqrt(max(G[i, i], 0.0))
    S = np.empty((m, m))
    for i in range(m):
        S[i, i] = -np.inf
        for j in range(i + 1, m):
            v = _cos(G, norms, i, j)
            S[i, j] = v
            S[j, i] = v
    evals = m * (m - 1) // 2

    active = np.ones(m, dtype=np.bool_)
    stale = np.zeros(m, dtype=np.bool_)
    parent = np.arange(m)
    best_j = np.full(m, -1)
    best_s = np.full(m, -np.inf)
    for r in range(m):
        _row_best(S, active, r, best_j, best_s)

    res_roots = np.empty(m, dtype=np.int64)
    res_labels = np.empty(m, dtype=np.int64)
    ck_roots = np.empty(m, dtype=np.int64)
    ck_labels = np.empty(m, dtype=np.int64)
    tr_a = np.empty(max(m - 1, 0), dtype=np.int64)
    tr_b = np.empty(max(m - 1, 0), dtype=np.int64)
    tr_s = np.empty(max(m - 1, 0))
    n_trace = 0
    merges = 0

    n_active = m
    result_done = False
    ckpt_done = k <= 0
    if not ckpt_done and n_active <= k:
        _snapshot(parent, labels, ck_roots, ck_labels)
        ckpt_done = True

    while n_active > 1:
        # rows scanned upward with a strict comparison: ties keep the
        # smaller row, hence the lexicographically smaller pair
        while True:
            u = -1
            su = -np.inf
            for r in range(m):
                if active[r] and best_j[r] >= 0:
                    if u < 0 or best_s[r] > su:
                        u = r
                        su = best_s[r]
            if not stale[u]:
                break
            _row_best(S, active, u, best_j, best_s)
            stale[u] = False
        v = best_j[u]
        if not result_done and su < theta:
            _snapshot(parent, labels, res_roots, res_labels)
            result_done = True
            if ckpt_done:
                break
        if not result_done:
            tr_a[n_trace] = labels[u]
            tr_b[n_trace] = labels[v]
            tr_s[n_trace] = su
            n_trace += 1

        new_uu = G[u, u] + 2.0 * G[u, v] + G[v, v]
        for r in range(m):
            if active[r] and r != u and r != v:
                g = G[u, r] + G[v, r]
                G[u, r] = g
                G[r, u] = g
        G[u, u] = new_uu
        norms[u] = np.sqrt(max(new_uu, 0.0))
        if sizes[v] > sizes[u]:
            labels[u] = labels[v]
        sizes[u] += sizes[v]
        active[v] = False
        parent[v] = u
        best_j[v] = -1
        stale[v] = False
        n_active -= 1
        merges += 1

        for r in range(m):
            if active[r] and r != u:
                s = _cos(G, norms, u, r)
                S[u, r] = s
                S[r, u] = s
                evals += 1
        _row_best(S, active, u, best_j, best_s)
        stale[u] = False
        for r in range(v):
            if r == u or not active[r]:
                continue
            bj = best_j[r]
            if r < u:
                s = S[r, u]
                if s > best_s[r] or (s == best_s[r] and u <= bj):
                    best_j[r] = u
                    best_s[r] = s
                    stale[r] = False
                    continue
            if bj == u or bj == v:
                stale[r] = True

        if not ckpt_done and n_active <= k:
            _snapshot(parent, labels, ck_roots, ck_labels)
            ckpt_done = True
            if result_done:
                break

    if not result_done:
        _snapshot(parent, labels, res_roots, res_labels)
    if not ckpt_done:
        _snapshot(parent, labels, ck_roots, ck_labels)
    return (res_roots, res_labels, ck_roots, ck_labels,
            tr_a[:n_trace], tr_b[:n_trace], tr_s[:n_trace], evals, merges)


@dataclass
class Atoms:
    """Flat-array view of the clusters that enter one merge loop.

    Atoms are sorted by their smallest segment id; the merge loop relies on it.
    """

    member_ids: np.ndarray
    atom_of: np.ndarray
    sizes: np.ndarray
    sums: np.ndarray
    durations: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.sizes.shape[0]

    @classmethod
    def from_clusters(cls, clusters: Sequence[Cluster]) -> "Atoms":
        clusters = sorted(clusters, key=lambda c: c.min_id)
        sizes = np.array([c.size for c in clusters], dtype=np.int64)
        members = [np.asarray(c.members, dtype=np.int64) for c in clusters]
        return cls(
            member_ids=np.concatenate(members),
            atom_of=np.repeat(np.arange(len(clusters)), sizes),
            sizes=sizes,
            sums=np.vstack([c.centroid * c.size for c in clusters]),
            durations=np.array([c.duration for c in clusters], dtype=np.float64),
            labels=np.array([c.hidden_label for c in clusters], dtype=np.int64),
        )

    @classmethod
    def singletons(cls, vectors: np.ndarray, durations: np.ndarray, ids: np.ndarray) -> "Atoms":
        n = vectors.shape[0]
        ids = np.asarray(ids, dtype=np.int64)
        return cls(ids, np.arange(n), np.ones(n, dtype=np.int64), vectors,
                   np.asarray(durations, dtype=np.float64), ids.copy())

    def collect(self, roots: np.ndarray, slot_labels: np.ndarray) -> ClusterState:
        """Build the cluster state that groups atoms sharing a root slot."""
        uniq, inv = np.unique(roots, return_inverse=True)
        n_clusters = uniq.shape[0]
        order = np.argsort(inv, kind="stable")
        starts = np.searchsorted(inv[order], np.arange(n_clusters))
        sums = np.add.reduceat(self.sums[order], starts, axis=0)
        sizes = np.add.reduceat(self.sizes[order], starts)
        durations = np.add.reduceat(self.durations[order], starts)

        member_cluster = inv[self.atom_of]
        morder = np.lexsort((self.member_ids, member_cluster))
        sorted_ids = self.member_ids[morder]
        bounds = np.cumsum(sizes)[:-1]
        chunks = np.split(sorted_ids, bounds)
        labels = slot_labels[uniq]
        centroids = sums / sizes[:, None]
        return ClusterState(tuple(
            Cluster(tuple(chunks[c].tolist()), centroids[c], float(durations[c]), int(labels[c]))
            for c in range(n_clusters)
        ))


@dataclass
class Agglomeration:
    result: ClusterState
    checkpoint: ClusterState | None
    trace: MergeTrace
    pair_evaluations: int
    merges: int


def agglomerate(atoms: Atoms, theta: float, k: int = 0, gram: np.ndarray | None = None) -> Agglomeration:
    """Run the merge loop over ``atoms``; ``gram`` is consumed if given."""
    if len(atoms) == 0:
        raise InvalidInputError("cannot cluster an empty state")
    if not -1.0 < theta < 1.0:
        raise InvalidInputError(f"threshold must lie in (-1, 1), got {theta}")
    G = gram_matrix(np.ascontiguousarray(atoms.sums)) if gram is None else gram
    (res_roots, res_labels, ck_roots, ck_labels,
     tr_a, tr_b, tr_s, evals, merges) = _agglomerate(G, atoms.sizes, atoms.labels, float(theta), int(k))
    result = atoms.collect(res_roots, res_labels)
    if k <= 0:
        checkpoint = None
    elif np.array_equal(res_roots, ck_roots) and np.array_equal(res_labels, ck_labels):
        checkpoint = result
    else:
        checkpoint = atoms.collect(ck_roots, ck_labels)
    trace = tuple(Merge(int(a), int(b), float(s)) for a, b, s in zip(tr_a, tr_b, tr_s))
    return Agglomeration(result, checkpoint, trace, int(evals), int(merges))


def ahc(initial: ClusterState, theta: float) -> tuple[ClusterState, MergeTrace]:
    """Merge the most similar pair of centroids until the best pair is below ``theta``.

    Ties go to the pair whose (smallest segment id) values are
    lexicographically smallest.
    """
    if len(initial) == 0:
        raise InvalidInputError("cannot cluster an empty state")
    _check_uniform_dim(initial.clusters)
    out = agglomerate(Atoms.from_clusters(initial.clusters), theta)
    return out.result, out.trace


def chkpt_step(
    checkpoint: ClusterState, new: Embedding, theta: float, k: int
) -> tuple[ClusterState, ClusterState, MergeTrace]:
    """Resume clustering from ``checkpoint`` with one more embedding.

    Returns ``(result, next_checkpoint, trace)``. The next checkpoint is the
    first state of the merge sequence holding at most ``k`` clusters; while
    fewer than ``k`` clusters exist that is the unmerged input itself, so the
    step is plain AHC over every embedding.
    """
    out = _chkpt(checkpoint, new, theta, k)
    return out.result, out.checkpoint, out.trace


def _chkpt(checkpoint: ClusterState, new: Embedding, theta: float, k: int) -> Agglomeration:
    if k < 2:
        raise InvalidInputError(f"checkpoint size must be >= 2, got {k}")
    if len(checkpoint) > k:
        raise InvalidInputError(f"checkpoint holds {len(checkpoint)} clusters, more than k={k}")
    check_dimension(checkpoint.dim, new.vector)
    clusters = checkpoint.clusters + (Cluster.from_embedding(new),)
    return agglomerate(Atoms.from_clusters(clusters), theta, k)


def _check_uniform_dim(clusters: Sequence[Cluster]) -> None:
    dim = clusters[0].centroid.shape[0]
    for c in clusters:
        check_dimension(dim, c.centroid)
