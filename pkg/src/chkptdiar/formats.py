"""Wire formats: JSON-lines embedding streams and RTTM speaker turns."""

from __future__ import annotations

import json
from typing import Iterable, Iterator, Sequence, TextIO

from chkptdiar.core import Embedding, InvalidInputError
from chkptdiar.scoring import Annotation, Turn


class DataError(InvalidInputError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def read_embeddings(fh: TextIO) -> Iterator[Embedding]:
    """Parse ``{"start", "end", "embedding"}`` records, one per line.

    Segment ids are assigned in file order. Blank lines are skipped.
    """
    dim = None
    last_start = float("-inf")
    segment_id = 0
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            start, end, vector = float(rec["start"]), float(rec["end"]), rec["embedding"]
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"malformed record ({exc})", lineno) from None
        if not isinstance(vector, list):
            raise DataError("'embedding' must be a list of numbers", lineno)
        if dim is None:
            dim = len(vector)
        elif len(vector) != dim:
            raise DataError(f"embedding has dimension {len(vector)}, expected {dim}", lineno)
        if start < last_start:
            raise DataError("records must be ordered by start time", lineno)
        last_start = start
        try:
            yield Embedding(vector, start, end, segment_id)
        except InvalidInputError as exc:
            raise DataError(str(exc), lineno) from None
        segment_id += 1


def write_embeddings(fh: TextIO, embeddings: Iterable[Embedding]) -> None:
    for e in embeddings:
        rec = {"start": e.start, "end": e.end, "embedding": e.vector.tolist()}
        fh.write(json.dumps(rec) + "\n")


def read_rttm(fh: TextIO) -> Annotation:
    turns = []
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 10 or fields[0] != "SPEAKER":
            raise DataError(f"expected 10 fields starting with SPEAKER, got {len(fields)}", lineno)
        try:
            onset, duration = float(fields[3]), float(fields[4])
        except ValueError:
            raise DataError("onset and duration must be numbers", lineno) from None
        if not duration > 0:
            raise DataError("turn duration must be positive", lineno)
        turns.append((fields[7], onset, onset + duration))
    return Annotation(turns)


def write_rttm(fh: TextIO, annotation: Iterable[Turn], file_id: str = "stream") -> None:
    for spk, start, end in annotation:
        fh.write(f"SPEAKER {file_id} 1 {start:.3f} {end - start:.3f} <NA> <NA> {spk} <NA> <NA>\n")


def segments_to_turns(segments: Sequence[tuple[float, float]], labels: Sequence, prefix: str = "spk") -> list[Turn]:
    """Turn per-segment labels into speaker turns.

    Where neighbouring segments with different labels overlap, the overlap is
    split at its midpoint. Consecutive pieces with the same label are joined
    when they touch or overlap (intervals are half-open).
    """
    if len(segments) != len(labels):
        raise InvalidInputError("one label per segment is required")
    pieces = []
    n = len(segments)
    for i, ((start, end), label) in enumerate(zip(segments, labels)):
        if i > 0 and labels[i - 1] != label and segments[i - 1][1] > start:
            start = (start + segments[i - 1][1]) / 2
        if i + 1 < n and labels[i + 1] != label and segments[i + 1][0] < end:
            end = (segments[i + 1][0] + end) / 2
        if end > start:
            pieces.append([f"{prefix}{label}", start, end])
    turns: list[list] = []
    for piece in pieces:
        if turns and turns[-1][0] == piece[0] and piece[1] <= turns[-1][2]:
            turns[-1][2] = max(turns[-1][2], piece[2])
        else:
            turns.append(piece)
    return [Turn(*t) for t in turns]
