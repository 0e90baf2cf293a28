"""Per-segment online diarization: cluster, re-cluster, then match labels."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from chkptdiar.clustering import Agglomeration, Atoms, _chkpt, agglomerate, gram_row
from chkptdiar.core import (
    ClusterState,
    Config,
    Embedding,
    InvalidInputError,
    check_dimension,
)
from chkptdiar.graph import (
    SpeakerGraph,
    assign_nonspeakers_graph,
    assign_nonspeakers_naive,
    select_speakers,
)
from chkptdiar.matching import build_cooccurrence, hungarian, infer_label


class _GramCache:
    """Growing store of raw embeddings and their inner products (full-AHC mode)."""

    def __init__(self):
        self.n = 0
        self.vectors = np.empty((0, 0))
        self.durations = np.empty(0)
        self.gram = np.empty((0, 0))

    def append(self, e: Embedding) -> None:
        n = self.n
        if n == self.vectors.shape[0]:
            cap = max(64, 2 * n)
            vectors = np.zeros((cap, e.dim))
            if n:
                vectors[:n] = self.vectors[:n]
            durations = np.zeros(cap)
            durations[:n] = self.durations[:n]
            gram = np.zeros((cap, cap))
            gram[:n, :n] = self.gram[:n, :n]
            self.vectors, self.durations, self.gram = vectors, durations, gram
        self.vectors[n] = e.vector
        self.durations[n] = e.duration
        row = gram_row(self.vectors, n)
        self.gram[n, : n + 1] = row
        self.gram[: n + 1, n] = row
        self.n = n + 1

    def atoms(self) -> Atoms:
        n = self.n
        return Atoms.singletons(self.vectors[:n], self.durations[:n], np.arange(n))


@dataclass
class PipelineState:
    config: Config
    checkpoint: ClusterState = field(default_factory=ClusterState)
    graph: SpeakerGraph | None = None
    ledger: list[int] = field(default_factory=list)
    step_count: int = 0
    step_times: list[float] = field(default_factory=list)
    pair_evaluations: list[int] = field(default_factory=list)
    merges: list[int] = field(default_factory=list)
    next_label: int = 1
    dim: int | None = None
    last_clustering: ClusterState | None = None
    last_hidden: np.ndarray | None = None
    _cache: _GramCache | None = None

    @classmethod
    def create(cls, config: Config | None = None) -> "PipelineState":
        config = config or Config()
        graph = None
        if config.recluster_mode == "graph":
            graph = SpeakerGraph(config.graph_threshold, prune=config.graph_pruning)
        cache = _GramCache() if config.clustering_mode == "ahc" else None
        return cls(config=config, graph=graph, _cache=cache)


def _cluster(state: PipelineState, e: Embedding) -> Agglomeration:
    cfg = state.config
    if cfg.clustering_mode == "chkpt":
        out = _chkpt(state.checkpoint, e, cfg.ahc_stop_threshold, cfg.checkpoint_k)
        state.checkpoint = out.checkpoint
        return out
    cache = state._cache
    cache.append(e)
    n = cache.n
    return agglomerate(cache.atoms(), cfg.ahc_stop_threshold, gram=cache.gram[:n, :n].copy())


def _recluster(state: PipelineState, clusters: ClusterState) -> ClusterState:
    cfg = state.config
    part = select_speakers(clusters, cfg.speaker_duration_threshold)
    if cfg.recluster_mode == "graph":
        return assign_nonspeakers_graph(state.graph, part)
    if cfg.recluster_mode == "naive":
        return assign_nonspeakers_naive(part, cfg.naive_recluster_threshold)
    return clusters


def step(state: PipelineState, e: Embedding) -> tuple[int, PipelineState]:
    """Label one new segment. ``state`` is updated in place and returned."""
    t0 = time.perf_counter_ns()
    if e.segment_id != state.step_count:
        raise InvalidInputError(
            f"expected segment {state.step_count}, got segment {e.segment_id}"
        )
    check_dimension(state.dim, e.vector)
    state.dim = e.dim

    if state.graph is not None:
        state.graph.add_node(e)
    agg = _cluster(state, e)
    working = _recluster(state, agg.result)

    n = state.step_count + 1
    hidden = np.empty(n, dtype=np.int64)
    for c in working:
        hidden[list(c.members)] = c.hidden_label
    matching = hungarian(build_cooccurrence(state.ledger, hidden))
    label = infer_label(matching, int(hidden[-1]), state.next_label)
    if label == state.next_label:
        state.next_label += 1

    state.ledger.append(label)
    state.step_count = n
    state.last_clustering = agg.result
    state.last_hidden = hidden
    state.pair_evaluations.append(agg.pair_evaluations)
    state.merges.append(agg.merges)
    state.step_times.append((time.perf_counter_ns() - t0) * 1e-9)
    return label, state


@dataclass
class Baseline3State:
    """Greedy online clusterer: one pass, nearest centroid or a new cluster."""

    threshold: float = 0.6
    centroids: list[np.ndarray] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    durations: list[float] = field(default_factory=list)
    ledger: list[int] = field(default_factory=list)
    step_times: list[float] = field(default_factory=list)


def baseline3_step(state: Baseline3State, e: Embedding) -> tuple[int, Baseline3State]:
    t0 = time.perf_counter_ns()
    if state.centroids:
        check_dimension(state.centroids[0].shape[0], e.vector)
        C = np.vstack(state.centroids)
        sims = C @ e.vector / (np.linalg.norm(C, axis=1) * np.linalg.norm(e.vector))
        best = int(np.argmax(sims))
    if state.centroids and sims[best] >= state.threshold:
        n = state.counts[best]
        state.centroids[best] = (state.centroids[best] * n + e.vector) / (n + 1)
        state.counts[best] = n + 1
        state.durations[best] += e.duration
        label = best + 1
    else:
        state.centroids.append(e.vector.copy())
        state.counts.append(1)
        state.durations.append(e.duration)
        label = len(state.centroids)
    state.ledger.append(label)
    state.step_times.append((time.perf_counter_ns() - t0) * 1e-9)
    return label, state


@dataclass
class TimingReport:
    step_times: list[float]

    @property
    def total(self) -> float:
        return float(sum(self.step_times))

    @property
    def mean(self) -> float:
        return self.total / len(self.step_times) if self.step_times else 0.0

    def decile_means(self) -> tuple[float, float]:
        """Mean step time over the first and the last tenth of the stream."""
        n = len(self.step_times)
        if n == 0:
            return 0.0, 0.0
        w = max(1, n // 10)
        return float(np.mean(self.step_times[:w])), float(np.mean(self.step_times[-w:]))

    def as_dict(self) -> dict:
        first, last = self.decile_means()
        return {
            "steps": len(self.step_times),
            "total_s": self.total,
            "mean_step_s": self.mean,
            "first_decile_mean_s": first,
            "last_decile_mean_s": last,
        }


def run_stream(
    segments: Iterable[Embedding],
    config: Config | None = None,
    *,
    baseline3: bool = False,
    on_label: Callable[[int, int], None] | None = None,
) -> tuple[list[int], TimingReport]:
    """Label a whole stream segment by segment.

    ``on_label(segment_id, label)`` is called right after each step.
    """
    config = config or Config()
    if baseline3:
        state = Baseline3State(threshold=config.baseline3_threshold)
        advance = baseline3_step
    else:
        state = PipelineState.create(config)
        advance = step
    for e in segments:
        label, state = advance(state, e)
        if on_label is not None:
            on_label(e.segment_id, label)
    return list(state.ledger), TimingReport(list(state.step_times))
