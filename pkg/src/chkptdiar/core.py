"""Domain types and vector arithmetic shared by every stage of the pipeline."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, fields, replace
from typing import Iterable

import numpy as np

CLUSTERING_MODES = ("ahc", "chkpt")
RECLUSTER_MODES = ("none", "naive", "graph")


class InvalidInputError(ValueError):
    """Raised when an operation receives data outside its contract."""


class InvariantViolationError(RuntimeError):
    """Raised when combining values would break a structural invariant."""


def as_vector(values, *, name: str = "vector") -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-D array, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return vec


@dataclass(frozen=True, eq=False)
class Embedding:
    """Speaker embedding of one speech segment.

    ``segment_id`` is assigned at ingestion and grows with arrival order.
    """

    vector: np.ndarray
    start: float
    end: float
    segment_id: int

    def __post_init__(self):
        vec = as_vector(self.vector, name="embedding")
        if not np.any(vec):
            raise InvalidInputError(f"segment {self.segment_id}: zero embedding vector")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        if not self.end > self.start:
            raise InvalidInputError(
                f"segment {self.segment_id}: end ({self.end}) must exceed start ({self.start})"
            )

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True, eq=False)
class Cluster:
    """A group of segments represented by the mean of their embeddings."""

    members: tuple[int, ...]
    centroid: np.ndarray
    duration: float
    hidden_label: int

    def __post_init__(self):
        if not self.members:
            raise InvalidInputError("a cluster needs at least one member")
        centroid = as_vector(self.centroid, name="centroid")
        centroid.setflags(write=False)
        object.__setattr__(self, "centroid", centroid)
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))

    @classmethod
    def from_embedding(cls, e: Embedding, hidden_label: int | None = None) -> "Cluster":
        label = e.segment_id if hidden_label is None else hidden_label
        return cls((e.segment_id,), e.vector, e.duration, label)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def min_id(self) -> int:
        return self.members[0]


@dataclass(frozen=True, eq=False)
class ClusterState:
    """A partition of every segment seen so far into clusters."""

    clusters: tuple[Cluster, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))

    @classmethod
    def from_embeddings(cls, embeddings: Iterable[Embedding]) -> "ClusterState":
        return cls(tuple(Cluster.from_embedding(e) for e in embeddings))

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def covered_segments(self) -> int:
        return sum(c.size for c in self.clusters)

    @property
    def dim(self) -> int | None:
        return self.clusters[0].centroid.shape[0] if self.clusters else None

    def labels(self) -> dict[int, int]:
        """Map each segment id to the hidden label of its cluster."""
        return {m: c.hidden_label for c in self.clusters for m in c.members}

    def partition(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(c.members) for c in self.clusters)

    def validate(self, expected_ids: Iterable[int] | None = None) -> None:
        seen: set[int] = set()
        hidden: set[int] = set()
        for c in self.clusters:
            overlap = seen.intersection(c.members)
            if overlap:
                raise InvariantViolationError(f"segments {sorted(overlap)} appear in two clusters")
            seen.update(c.members)
            if c.hidden_label in hidden:
                raise InvariantViolationError(f"hidden label {c.hidden_label} used twice")
            hidden.add(c.hidden_label)
        if expected_ids is not None and seen != set(expected_ids):
            raise InvariantViolationError("clusters do not cover exactly the expected segments")


@dataclass(frozen=True)
class Config:
    """Thresholds and switches for one diarization run.

    Similarity thresholds are cosine values; durations and the collar are in
    seconds.
    """

    ahc_stop_threshold: float = 0.6
    graph_threshold: float = 0.4
    checkpoint_k: int = 50
    speaker_duration_threshold: float = 6.0
    naive_recluster_threshold: float = 0.45
    collar: float = 0.25
    recluster_mode: str = "graph"
    clustering_mode: str = "chkpt"
    baseline3_threshold: float = 0.6
    graph_pruning: bool = True

    def __post_init__(self):
        for name in ("ahc_stop_threshold", "graph_threshold"):
            value = getattr(self, name)
            if not -1.0 < value < 1.0:
                raise InvalidInputError(f"{name} must lie in (-1, 1), got {value}")
        if not self.graph_threshold < self.ahc_stop_threshold:
            raise InvalidInputError("graph_threshold must be lower than ahc_stop_threshold")
        if isinstance(self.checkpoint_k, bool) or int(self.checkpoint_k) != self.checkpoint_k:
            raise InvalidInputError("checkpoint_k must be an integer")
        if self.checkpoint_k < 2:
            raise InvalidInputError(f"checkpoint_k must be >= 2, got {self.checkpoint_k}")
        if self.speaker_duration_threshold < 0:
            raise InvalidInputError("speaker_duration_threshold must be non-negative")
        if self.collar < 0:
            raise InvalidInputError("collar must be non-negative")
        if self.recluster_mode not in RECLUSTER_MODES:
            raise InvalidInputError(f"recluster_mode must be one of {RECLUSTER_MODES}")
        if self.clustering_mode not in CLUSTERING_MODES:
            raise InvalidInputError(f"clustering_mode must be one of {CLUSTERING_MODES}")

    def with_updates(self, **changes) -> "Config":
        return replace(self, **changes)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: type(getattr(cls(), f.name)) for f in fields(cls)}


def cosine_similarity(a, b) -> float:
    a = as_vector(a, name="a")
    b = as_vector(b, name="b")
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise InvalidInputError("cosine similarity is undefined for a zero vector")
    sim = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, sim))


def merge_clusters(c1: Cluster, c2: Cluster) -> Cluster:
    """Combine two disjoint clusters; the centroid stays the exact member mean.

    The merged cluster keeps the hidden label of the larger input. On equal
    sizes the cluster holding the smaller segment id wins.
    """
    if not set(c1.members).isdisjoint(c2.members):
        raise InvariantViolationError("cannot merge clusters that share members")
    if c1.centroid.shape != c2.centroid.shape:
        raise InvalidInputError("cannot merge clusters of different dimension")
    n1, n2 = c1.size, c2.size
    centroid = (n1 * c1.centroid + n2 * c2.centroid) / (n1 + n2)
    return Cluster(
        members=tuple(heapq.merge(c1.members, c2.members)),
        centroid=centroid,
        duration=c1.duration + c2.duration,
        hidden_label=_surviving_label(c1, c2),
    )


def _surviving_label(c1: Cluster, c2: Cluster) -> int:
    if c1.size != c2.size:
        return c1.hidden_label if c1.size > c2.size else c2.hidden_label
    return c1.hidden_label if c1.min_id < c2.min_id else c2.hidden_label


def check_dimension(expected: int | None, vec: np.ndarray) -> None:
    if expected is not None and vec.shape[0] != expected:
        raise InvalidInputError(f"dimension mismatch: expected {expected}, got {vec.shape[0]}")
