"""Speaker-embedding graph and the re-clustering of short (non-speaker) clusters."""

from __future__ import annotations

from dataclasses import dataclass
from operator import attrgetter
from typing import Iterator, Sequence, TextIO

import numpy as np
from numba import njit

from chkptdiar.core import (
    Cluster,
    ClusterState,
    Embedding,
    InvalidInputError,
    check_dimension,
    cosine_similarity,
)


@njit(cache=True)
def _visit(sims, adj, n, s, prune):
    # nodes are visited in insertion order; a dissimilar node removes itself
    # and its current neighbours from the candidates still to be visited
    candidate = np.ones(n, dtype=np.bool_)
    link = np.zeros(n, dtype=np.bool_)
    visited = 0
    for i in range(n):
        if not candidate[i]:
            continue
        visited += 1
        if sims[i] > s:
            link[i] = True
        elif prune:
            candidate[i] = False
            for j in range(n):
                if adj[i, j]:
                    candidate[j] = False
    return link, visited


class SpeakerGraph:
    """Weighted undirected graph with one node per speech segment.

    An edge (i, j) carries the cosine similarity of the two embeddings and
    exists only when that similarity exceeds ``threshold``. Storage is a
    dense, capacity-doubling weight matrix plus an edge mask, indexed by
    insertion order.
    """

    def __init__(self, threshold: float = 0.4, prune: bool = True):
        if not -1.0 < threshold < 1.0:
            raise InvalidInputError(f"graph threshold must lie in (-1, 1), got {threshold}")
        self.threshold = float(threshold)
        self.prune = prune
        self._embeddings: list[Embedding] = []
        self._index: dict[int, int] = {}
        self._unit = np.empty((0, 0))
        self._weights = np.zeros((0, 0))
        self._adj = np.zeros((0, 0), dtype=bool)
        self.last_visited = 0

    def __len__(self) -> int:
        return len(self._embeddings)

    def __contains__(self, segment_id: int) -> bool:
        return segment_id in self._index

    @property
    def dim(self) -> int | None:
        return self._embeddings[0].dim if self._embeddings else None

    @property
    def node_ids(self) -> list[int]:
        return [e.segment_id for e in self._embeddings]

    @property
    def n_edges(self) -> int:
        n = len(self)
        return int(np.count_nonzero(self._adj[:n, :n])) // 2

    def embedding(self, segment_id: int) -> Embedding:
        return self._embeddings[self._idx(segment_id)]

    def _idx(self, segment_id: int) -> int:
        try:
            return self._index[segment_id]
        except KeyError:
            raise InvalidInputError(f"segment {segment_id} is not a node of the graph") from None

    def indices(self, segment_ids: Sequence[int]) -> np.ndarray:
        return np.fromiter((self._idx(s) for s in segment_ids), dtype=np.int64, count=len(segment_ids))

    def _grow(self, dim: int) -> None:
        n = len(self)
        cap = max(64, 2 * self._weights.shape[0])
        unit = np.zeros((cap, dim))
        weights = np.zeros((cap, cap))
        adj = np.zeros((cap, cap), dtype=bool)
        if n:
            unit[:n] = self._unit[:n]
        weights[:n, :n] = self._weights[:n, :n]
        adj[:n, :n] = self._adj[:n, :n]
        self._unit, self._weights, self._adj = unit, weights, adj

    def add_node(self, e: Embedding) -> None:
        if e.segment_id in self._index:
            raise InvalidInputError(f"segment {e.segment_id} is already in the graph")
        check_dimension(self.dim, e.vector)
        n = len(self)
        if n == self._weights.shape[0]:
            self._grow(e.dim)
        unit = e.vector / np.linalg.norm(e.vector)
        if n:
            sims = np.clip(self._unit[:n] @ unit, -1.0, 1.0)
            link, self.last_visited = _visit(sims, self._adj, n, self.threshold, self.prune)
            nbrs = np.flatnonzero(link)
            self._weights[n, nbrs] = sims[nbrs]
            self._weights[nbrs, n] = sims[nbrs]
            self._adj[n, nbrs] = True
            self._adj[nbrs, n] = True
        else:
            self.last_visited = 0
        self._unit[n] = unit
        self._index[e.segment_id] = n
        self._embeddings.append(e)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[self._idx(i), self._idx(j)])

    def weight(self, i: int, j: int) -> float:
        """Adjacency entry: the edge weight, or 0 when the pair is not connected."""
        return float(self._weights[self._idx(i), self._idx(j)])

    def neighbors(self, segment_id: int) -> list[int]:
        row = self._adj[self._idx(segment_id), : len(self)]
        return [self._embeddings[j].segment_id for j in np.flatnonzero(row)]

    def edges(self) -> Iterator[tuple[int, int, float]]:
        n = len(self)
        rows, cols = np.nonzero(np.triu(self._adj[:n, :n], k=1))
        for r, c in zip(rows, cols):
            yield self._embeddings[r].segment_id, self._embeddings[c].segment_id, float(self._weights[r, c])

    def adjacency(self) -> np.ndarray:
        """Dense copy of the weighted adjacency matrix in insertion order."""
        n = len(self)
        return self._weights[:n, :n].copy()

    def likelihoods(self, node_ids: Sequence[int], clusters: Sequence[Cluster]) -> np.ndarray:
        """Matrix of cluster likelihoods, one row per node, one column per cluster."""
        rows = self.indices(node_ids)
        out = np.zeros((len(rows), len(clusters)))
        for j, c in enumerate(clusters):
            cols = self.indices(c.members)
            out[:, j] = self._weights[np.ix_(rows, cols)].sum(axis=1) / len(cols)
        return out

    def write_edges(self, fh: TextIO) -> None:
        for i, j, w in self.edges():
            fh.write(f"{i} {j} {w:.6f}\n")


def graph_add_node(g: SpeakerGraph, e: Embedding, s: float | None = None) -> SpeakerGraph:
    """Insert ``e`` into ``g`` (in place) and return the graph."""
    if s is not None and s != g.threshold:
        raise InvalidInputError(f"graph was built with threshold {g.threshold}, got {s}")
    g.add_node(e)
    return g


def cluster_likelihood(g: SpeakerGraph, i: int, cluster: Cluster) -> float:
    """Mean adjacency weight from node ``i`` into the members of ``cluster``."""
    return float(g.likelihoods([i], [cluster])[0, 0])


_by_id = attrgetter("min_id")


@dataclass(frozen=True)
class SpeakerPartition:
    speaker_clusters: tuple[Cluster, ...]
    nonspeaker_clusters: tuple[Cluster, ...]


def select_speakers(state: ClusterState, dmin: float) -> SpeakerPartition:
    """Split clusters by accumulated duration.

    Clusters lasting at least ``dmin`` seconds are speakers. If none does,
    the single longest cluster is taken as the only speaker.
    """
    if len(state) == 0:
        raise InvalidInputError("cannot select speakers from an empty state")
    speakers = [c for c in state if c.duration >= dmin]
    if not speakers:
        speakers = [min(state, key=lambda c: (-c.duration, c.min_id))]
    chosen = {id(c) for c in speakers}
    others = [c for c in state if id(c) not in chosen]
    return SpeakerPartition(tuple(sorted(speakers, key=_by_id)), tuple(sorted(others, key=_by_id)))


def _absorb(speaker: Cluster, extra: Sequence[Embedding]) -> Cluster:
    if not extra:
        return speaker
    vec_sum = speaker.centroid * speaker.size + np.sum([e.vector for e in extra], axis=0)
    members = tuple(sorted(speaker.members + tuple(e.segment_id for e in extra)))
    return Cluster(
        members=members,
        centroid=vec_sum / len(members),
        duration=speaker.duration + sum(e.duration for e in extra),
        hidden_label=speaker.hidden_label,
    )


def _remnant(cluster: Cluster, kept: Sequence[Embedding]) -> Cluster:
    if len(kept) == cluster.size:
        return cluster
    return Cluster(
        members=tuple(e.segment_id for e in kept),
        centroid=np.mean([e.vector for e in kept], axis=0),
        duration=sum(e.duration for e in kept),
        hidden_label=cluster.hidden_label,
    )


def assign_nonspeakers_graph(g: SpeakerGraph, part: SpeakerPartition) -> ClusterState:
    """Move every node of a non-speaker cluster to its most likely speaker cluster.

    Likelihoods are computed against the speaker clusters as given. A node
    with zero likelihood everywhere stays in its own cluster, which then
    becomes a new speaker cluster.
    """
    speakers = sorted(part.speaker_clusters, key=_by_id)
    if not speakers:
        raise InvalidInputError("graph re-clustering needs at least one speaker cluster")
    if not part.nonspeaker_clusters:
        return ClusterState(tuple(speakers))
    added: list[list[Embedding]] = [[] for _ in speakers]
    remnants = []
    for cluster in part.nonspeaker_clusters:
        scores = g.likelihoods(cluster.members, speakers)
        kept = []
        for node, row in zip(cluster.members, scores):
            e = g.embedding(node)
            best = int(np.argmax(row))
            if row[best] > 0.0:
                added[best].append(e)
            else:
                kept.append(e)
        if kept:
            remnants.append(_remnant(cluster, kept))
    grown = [_absorb(s, extra) for s, extra in zip(speakers, added)]
    return ClusterState(tuple(grown) + tuple(remnants))


def assign_nonspeakers_naive(part: SpeakerPartition, t: float) -> ClusterState:
    """Merge each non-speaker cluster into the speaker cluster whose centroid
    is most similar, provided that similarity exceeds ``t``; otherwise the
    cluster becomes a speaker of its own."""
    speakers = sorted(part.speaker_clusters, key=_by_id)
    if not speakers:
        raise InvalidInputError("naive re-clustering needs at least one speaker cluster")
    absorbed: list[list[Cluster]] = [[] for _ in speakers]
    promoted = []
    for cluster in part.nonspeaker_clusters:
        sims = [cosine_similarity(cluster.centroid, s.centroid) for s in speakers]
        best = int(np.argmax(sims))
        if sims[best] > t:
            absorbed[best].append(cluster)
        else:
            promoted.append(cluster)
    grown = []
    for speaker, extra in zip(speakers, absorbed):
        for c in extra:
            speaker = _merge_into(speaker, c)
        grown.append(speaker)
    return ClusterState(tuple(grown) + tuple(promoted))


def _merge_into(speaker: Cluster, other: Cluster) -> Cluster:
    size = speaker.size + other.size
    return Cluster(
        members=tuple(sorted(speaker.members + other.members)),
        centroid=(speaker.centroid * speaker.size + other.centroid * other.size) / size,
        duration=speaker.duration + other.duration,
        hidden_label=speaker.hidden_label,
    )
