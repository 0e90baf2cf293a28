"""Diarization error rate with a forgiveness collar and optimal speaker mapping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from chkptdiar.core import InvalidInputError
from chkptdiar.matching import max_weight_assignment


class Turn(NamedTuple):
    speaker: str
    start: float
    end: float


class Annotation:
    """Speaker turns of one recording. Same-speaker turns that touch or
    overlap are merged on construction; different speakers may overlap."""

    def __init__(self, turns: Iterable = ()):
        by_speaker: dict[str, list[tuple[float, float]]] = {}
        for spk, start, end in turns:
            start, end = float(start), float(end)
            if not end > start:
                raise InvalidInputError(f"turn of {spk!r} has end {end} <= start {start}")
            by_speaker.setdefault(str(spk), []).append((start, end))
        merged = []
        for spk, spans in by_speaker.items():
            spans.sort()
            cur_s, cur_e = spans[0]
            for s, e in spans[1:]:
                if s <= cur_e:
                    cur_e = max(cur_e, e)
                else:
                    merged.append(Turn(spk, cur_s, cur_e))
                    cur_s, cur_e = s, e
            merged.append(Turn(spk, cur_s, cur_e))
        merged.sort(key=lambda t: (t.start, t.end, t.speaker))
        self.turns: tuple[Turn, ...] = tuple(merged)

    def __iter__(self):
        return iter(self.turns)

    def __len__(self) -> int:
        return len(self.turns)

    def __eq__(self, other) -> bool:
        return isinstance(other, Annotation) and self.turns == other.turns

    def __repr__(self) -> str:
        return f"Annotation({list(self.turns)!r})"

    @property
    def speakers(self) -> list[str]:
        return sorted({t.speaker for t in self.turns})

    def boundaries(self) -> list[float]:
        return [x for t in self.turns for x in (t.start, t.end)]

    def renamed(self, mapping: dict[str, str]) -> "Annotation":
        return Annotation((mapping.get(t.speaker, t.speaker), t.start, t.end) for t in self.turns)


@dataclass(frozen=True)
class DerReport:
    miss: float
    false_alarm: float
    confusion: float
    scored_total: float

    @property
    def der(self) -> float:
        return (self.miss + self.false_alarm + self.confusion) / self.scored_total

    def as_dict(self) -> dict[str, float]:
        return {
            "miss": self.miss,
            "false_alarm": self.false_alarm,
            "confusion": self.confusion,
            "scored_total": self.scored_total,
            "der": self.der,
        }


def _collar_zones(reference: Annotation, collar: float) -> list[tuple[float, float]]:
    """Merged no-score zones around every reference turn boundary."""
    if collar == 0:
        return []
    zones = sorted((b - collar, b + collar) for b in reference.boundaries())
    merged = [list(zones[0])]
    for s, e in zones[1:]:
        if s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [(s, e) for s, e in merged]


def _active(turns: Sequence[Turn], index: dict[str, int], points: np.ndarray) -> np.ndarray:
    """Boolean matrix (speaker, elementary interval) of speech activity."""
    act = np.zeros((len(index), len(points) - 1), dtype=bool)
    for t in turns:
        lo = np.searchsorted(points, t.start)
        hi = np.searchsorted(points, t.end)
        act[index[t.speaker], lo:hi] = True
    return act


def score_der(reference: Annotation, hypothesis: Annotation, collar: float = 0.0) -> DerReport:
    """Score ``hypothesis`` against ``reference``.

    Time within ``collar`` seconds of any reference turn boundary is not
    scored. Reference and hypothesis speakers are mapped one-to-one so that
    the correctly attributed time is maximal.
    """
    if collar < 0:
        raise InvalidInputError(f"collar must be non-negative, got {collar}")
    if len(reference) == 0:
        raise InvalidInputError("DER is undefined for an empty reference")
    excluded = _collar_zones(reference, collar)
    points = sorted(
        set(reference.boundaries())
        | set(hypothesis.boundaries())
        | {x for zone in excluded for x in zone}
    )
    grid = np.asarray(points)
    widths = np.diff(grid)
    scored = np.ones(widths.shape[0], dtype=bool)
    for s, e in excluded:
        scored[np.searchsorted(grid, s): np.searchsorted(grid, e)] = False
    widths = np.where(scored, widths, 0.0)

    ref_index = {s: i for i, s in enumerate(reference.speakers)}
    hyp_index = {s: i for i, s in enumerate(hypothesis.speakers)}
    ref_act = _active(reference.turns, ref_index, grid)
    hyp_act = _active(hypothesis.turns, hyp_index, grid)

    n_ref = ref_act.sum(axis=0)
    n_hyp = hyp_act.sum(axis=0)
    overlap = (ref_act * widths) @ hyp_act.T.astype(float)
    pairs = max_weight_assignment(overlap) if overlap.size else []
    # correctly attributed speakers per elementary interval
    n_correct = np.zeros_like(n_ref)
    for r, h in pairs:
        n_correct += ref_act[r] & hyp_act[h]

    scored_total = float(widths @ n_ref)
    if scored_total <= 0:
        raise InvalidInputError("no reference speech is left to score outside the collar")
    miss = float(widths @ np.maximum(n_ref - n_hyp, 0))
    false_alarm = float(widths @ np.maximum(n_hyp - n_ref, 0))
    confusion = float(widths @ (np.minimum(n_ref, n_hyp) - n_correct))
    return DerReport(miss, false_alarm, confusion, scored_total)
