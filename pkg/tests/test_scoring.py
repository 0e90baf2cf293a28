import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chkptdiar.core import InvalidInputError
from chkptdiar.scoring import Annotation, score_der

from oracles import frame_der


def test_worked_examples():
    ref = Annotation([("A", 0, 10)])
    assert score_der(ref, Annotation([("X", 0, 10)])).der == 0.0
    r = score_der(ref, Annotation([("X", 0, 5), ("Y", 5, 10)]))
    assert r.confusion == pytest.approx(5.0) and r.der == pytest.approx(0.5)
    r = score_der(ref, Annotation())
    assert r.miss == pytest.approx(10.0) and r.der == pytest.approx(1.0)


def test_collar_on_identical():
    ref = Annotation([("A", 0, 5), ("B", 5, 10)])
    plain = score_der(ref, ref)
    collared = score_der(ref, ref, collar=0.25)
    assert collared.der == 0.0
    assert collared.scored_total < plain.scored_total
    assert collared.scored_total == pytest.approx(9.0)


def test_errors():
    with pytest.raises(InvalidInputError):
        score_der(Annotation(), Annotation([("A", 0, 1)]))
    with pytest.raises(InvalidInputError):
        score_der(Annotation([("A", 0, 1)]), Annotation(), collar=-1)
    with pytest.raises(InvalidInputError):
        score_der(Annotation([("A", 0, 0.4)]), Annotation(), collar=0.25)
    with pytest.raises(InvalidInputError):
        Annotation([("A", 2, 1)])


def test_overlapping_reference_speech_accrues_miss():
    ref = Annotation([("A", 0, 10), ("B", 5, 10)])
    r = score_der(ref, Annotation([("X", 0, 10)]))
    assert r.scored_total == pytest.approx(15.0)
    assert r.miss == pytest.approx(5.0) and r.confusion == 0.0


def test_same_speaker_turns_are_merged():
    a = Annotation([("A", 0, 2), ("A", 2, 3), ("A", 2.5, 4), ("B", 1, 2)])
    assert [(t.speaker, t.start, t.end) for t in a] == [("A", 0, 4), ("B", 1, 2)]


@st.composite
def annotations(draw, max_speakers=6, max_time=120.0):
    n_spk = draw(st.integers(1, max_speakers))
    n_turns = draw(st.integers(0, 12))
    turns = []
    grid = int(max_time * 100)
    for _ in range(n_turns):
        a = draw(st.integers(0, grid - 1))
        b = draw(st.integers(a + 1, min(grid, a + 3000)))
        turns.append((f"s{draw(st.integers(0, n_spk - 1))}", a / 100, b / 100))
    return turns


@settings(max_examples=60, deadline=None)
@given(annotations(), annotations(), st.sampled_from([0.0, 0.25]))
def test_matches_frame_oracle(ref, hyp, collar):
    reference = Annotation(ref)
    if not reference.turns:
        return
    try:
        report = score_der(reference, Annotation(hyp), collar=collar)
    except InvalidInputError:
        return
    oracle = frame_der(list(reference), list(Annotation(hyp)), collar)
    assert report.der == pytest.approx(oracle, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(annotations(max_time=30.0), annotations(max_time=30.0), st.floats(0, 1), st.data())
def test_properties(ref, hyp, collar, data):
    reference, hypothesis = Annotation(ref), Annotation(hyp)
    if not reference.turns:
        return
    try:
        r = score_der(reference, hypothesis, collar=collar)
    except InvalidInputError:
        return
    assert min(r.miss, r.false_alarm, r.confusion) >= 0
    assert r.miss + r.false_alarm + r.confusion == pytest.approx(r.der * r.scored_total, abs=1e-9)
    assert score_der(reference, reference, collar=collar).der == 0.0
    spk = hypothesis.speakers
    perm = data.draw(st.permutations(spk))
    renamed = hypothesis.renamed(dict(zip(spk, [f"z{p}" for p in perm])))
    assert score_der(reference, renamed, collar=collar).der == pytest.approx(r.der, abs=1e-12)
    try:
        wider = score_der(reference, hypothesis, collar=collar + 0.1)
    except InvalidInputError:
        return
    assert wider.scored_total <= r.scored_total + 1e-12


def test_oracle_on_examples():
    ref = [("A", 0, 10)]
    assert frame_der(ref, [("X", 0, 5), ("Y", 5, 10)], 0.0) == pytest.approx(0.5)
    assert np.isclose(frame_der(ref, [], 0.0), 1.0)
