"""Online speaker diarization over streams of speaker embeddings."""

from chkptdiar.core import (
    Cluster,
    ClusterState,
    Config,
    Embedding,
    InvalidInputError,
    InvariantViolationError,
    cosine_similarity,
    merge_clusters,
)
from chkptdiar.pipeline import run_stream

__all__ = [
    "Cluster",
    "ClusterState",
    "Config",
    "Embedding",
    "InvalidInputError",
    "InvariantViolationError",
    "cosine_similarity",
    "merge_clusters",
    "run_stream",
]

__version__ = "0.1.0"
