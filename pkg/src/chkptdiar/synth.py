"""Synthetic embedding streams with known speakers, for tests and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chkptdiar.core import Embedding, InvalidInputError
from chkptdiar.formats import segments_to_turns
from chkptdiar.scoring import Annotation


@dataclass
class SyntheticStream:
    embeddings: list[Embedding]
    speakers: list[int]
    centroids: np.ndarray

    @property
    def segments(self) -> list[tuple[float, float]]:
        return [(e.start, e.end) for e in self.embeddings]

    def reference(self) -> Annotation:
        return Annotation(segments_to_turns(self.segments, self.speakers, prefix="S"))


def speaker_centroids(n_speakers: int, dim: int, inter_cos: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors whose pairwise cosine equals ``inter_cos`` exactly.

    Built from an orthonormal frame: a shared direction weighted by
    sqrt(inter_cos) plus one private direction per speaker.
    """
    shared = 1 if inter_cos > 0 else 0
    if n_speakers + shared > dim:
        raise InvalidInputError(
            f"{n_speakers} speakers with inter-speaker cosine {inter_cos} need dimension "
            f">= {n_speakers + shared}, got {dim}"
        )
    q, _ = np.linalg.qr(rng.standard_normal((dim, n_speakers + shared)))
    private = q[:, shared:].T
    if not shared:
        return private
    return np.sqrt(inter_cos) * q[:, 0] + np.sqrt(1.0 - inter_cos) * private


def perturb(centroid: np.ndarray, cos: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector at cosine exactly ``cos`` from ``centroid`` in a random direction."""
    z = rng.standard_normal(centroid.shape[0])
    z -= (z @ centroid) * centroid
    z /= np.linalg.norm(z)
    return cos * centroid + np.sqrt(max(0.0, 1.0 - cos * cos)) * z


def synthesize(
    speakers: int,
    segments: int,
    dim: int = 128,
    intra_cos: float = 0.95,
    inter_cos: float = 0.0,
    seed: int = 0,
    seg_len: float = 1.0,
    shift: float = 0.5,
    turn_range: tuple[int, int] = (4, 20),
) -> SyntheticStream:
    """Conversation-like stream: speakers alternate in turns of a random
    number of segments; segments are ``seg_len`` long every ``shift`` seconds."""
    if speakers < 1 or segments < 1:
        raise InvalidInputError("need at least one speaker and one segment")
    if not 0.0 <= inter_cos < intra_cos <= 1.0:
        raise InvalidInputError("require 0 <= inter_cos < intra_cos <= 1")
    if dim < 2:
        raise InvalidInputError("dimension must be at least 2")
    rng = np.random.default_rng(seed)
    centroids = speaker_centroids(speakers, dim, inter_cos, rng)

    labels: list[int] = []
    current = int(rng.integers(speakers))
    while len(labels) < segments:
        length = int(rng.integers(turn_range[0], turn_range[1] + 1))
        labels.extend([current + 1] * length)
        if speakers > 1:
            current = (current + 1 + int(rng.integers(speakers - 1))) % speakers
    labels = labels[:segments]

    embeddings = [
        Embedding(perturb(centroids[spk - 1], intra_cos, rng), i * shift, i * shift + seg_len, i)
        for i, spk in enumerate(labels)
    ]
    return SyntheticStream(embeddings, labels, centroids)
