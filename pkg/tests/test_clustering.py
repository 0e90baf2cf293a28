import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chkptdiar.clustering import ahc, chkpt_step
from chkptdiar.core import ClusterState, Embedding, InvalidInputError, merge_clusters

from oracles import brute_ahc


def singletons(vectors, start_id=0):
    return ClusterState.from_embeddings(
        Embedding(v, i * 0.5, i * 0.5 + 1.0, start_id + i) for i, v in enumerate(vectors)
    )


def embeddings(vectors):
    return [Embedding(v, i * 0.5, i * 0.5 + 1.0, i) for i, v in enumerate(vectors)]


def test_three_singleton_example():
    state, trace = ahc(singletons([(1, 0), (1, 0), (0, 1)]), 0.6)
    assert state.partition() == {frozenset({0, 1}), frozenset({2})}
    assert len(trace) == 1 and trace[0].similarity == pytest.approx(1.0)


def test_single_cluster_unchanged():
    state = singletons([(1, 2)])
    out, trace = ahc(state, -0.9)
    assert out.partition() == state.partition() and trace == ()


def test_all_below_threshold_unchanged():
    state = singletons([(1, 0), (0, 1), (-1, 0)])
    out, trace = ahc(state, 0.6)
    assert out.partition() == state.partition() and trace == ()
    assert [c.hidden_label for c in out] == [0, 1, 2]


def test_errors():
    with pytest.raises(InvalidInputError):
        ahc(ClusterState(), 0.5)
    with pytest.raises(InvalidInputError):
        ahc(singletons([(1, 0)]), 1.0)
    with pytest.raises(InvalidInputError):
        chkpt_step(singletons([(1, 0)]), Embedding((1, 0, 0), 0, 1, 1), 0.5, 4)
    with pytest.raises(InvalidInputError):
        chkpt_step(singletons([(1, 0)]), Embedding((1, 0), 0, 1, 1), 0.5, 1)
    with pytest.raises(InvalidInputError):
        chkpt_step(singletons([(1, 0)] * 3), Embedding((1, 0), 0, 1, 3), 0.5, 2)


def test_tie_goes_to_smallest_pair():
    # three identical vectors: every pair ties at 1.0, so (0, 1) merges first
    state, trace = ahc(singletons([(1, 0)] * 3), 0.99)
    assert trace[0][:2] == (0, 1)
    assert state.partition() == {frozenset({0, 1, 2})}


int_vectors = st.integers(2, 3).flatmap(
    lambda d: st.lists(
        st.lists(st.integers(-3, 3), min_size=d, max_size=d).filter(any), min_size=1, max_size=9
    )
)


@settings(max_examples=150, deadline=None)
@given(int_vectors, st.sampled_from([-0.3, 0.0, 0.3, 0.5, 0.6, 0.8, 0.95]))
def test_ahc_matches_exact_oracle(vectors, theta):
    out, _ = ahc(singletons(vectors), theta)
    assert out.partition() == brute_ahc(vectors, theta)


def _replay(initial: ClusterState, trace, theta):
    """Apply the trace step by step, checking every merge was the greedy best."""
    by_label = {c.hidden_label: c for c in initial}
    for a, b, sim in trace:
        ca, cb = by_label.pop(a), by_label.pop(b)
        cos = lambda x, y: float(x @ y / np.linalg.norm(x) / np.linalg.norm(y))
        assert cos(ca.centroid, cb.centroid) == pytest.approx(sim, abs=1e-9)
        others = list(by_label.values()) + [ca, cb]
        best = max(cos(x.centroid, y.centroid) for x, y in itertools.combinations(others, 2))
        assert sim >= best - 1e-9
        assert sim >= theta
        merged = merge_clusters(ca, cb)
        by_label[merged.hidden_label] = merged
    return frozenset(frozenset(c.members) for c in by_label.values())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 25), st.floats(0.0, 0.9))
def test_trace_is_greedy_and_replays_to_result(seed, n, theta):
    rng = np.random.default_rng(seed)
    state = singletons(rng.normal(size=(n, 3)))
    out, trace = ahc(state, theta)
    assert len(trace) == n - len(out)
    assert _replay(state, trace, theta) == out.partition()


def test_centroid_trace_need_not_be_monotone():
    # centroid linkage can merge at a higher similarity after a lower one
    x, phi = np.radians(30), np.radians(57)
    vectors = [(np.cos(x), np.sin(x), 0), (np.cos(x), -np.sin(x), 0), (np.cos(phi), 0, np.sin(phi))]
    _, trace = ahc(singletons(vectors), 0.4)
    sims = [m.similarity for m in trace]
    assert len(sims) == 2 and sims[1] > sims[0]


def _stream(state, vectors, theta, k):
    results = []
    for e in embeddings(vectors):
        result, state, _ = chkpt_step(state, e, theta, k)
        results.append(result)
        assert len(state) <= k
        result.validate(range(e.segment_id + 1))
        state.validate(range(e.segment_id + 1))
    return results


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.sampled_from([2, 8]), st.floats(0.3, 0.9))
def test_chkpt_equals_ahc_below_k(seed, n, dim, theta):
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(n, dim))
    k = max(2, n)
    for i, result in enumerate(_stream(ClusterState(), vectors, theta, k)):
        expected, _ = ahc(singletons(vectors[: i + 1]), theta)
        assert result.partition() == expected.partition()


def test_below_k_checkpoint_is_the_input():
    state = singletons([(1, 0), (0, 1), (-1, 0)])
    result, ckpt, _ = chkpt_step(state, Embedding((1, 0.1), 0, 1, 3), 0.6, 50)
    assert ckpt.partition() == {frozenset({i}) for i in range(4)}
    expected, _ = ahc(singletons([(1, 0), (0, 1), (-1, 0), (1, 0.1)]), 0.6)
    assert result.partition() == expected.partition()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6), st.floats(0.2, 0.9))
def test_checkpoint_bound_and_partition_safety(seed, k, theta):
    rng = np.random.default_rng(seed)
    _stream(ClusterState(), rng.normal(size=(40, 4)), theta, k)


def test_checkpoint_taken_past_threshold():
    # four mutually orthogonal directions never merge at theta=0.6, yet the
    # checkpoint must still shrink to k clusters
    vectors = np.eye(4)
    state = ClusterState()
    for e in embeddings(vectors):
        result, state, _ = chkpt_step(state, e, 0.6, 3)
    assert len(result) == 4
    assert len(state) == 3


def test_determinism():
    rng = np.random.default_rng(5)
    vectors = rng.normal(size=(60, 5))
    runs = []
    for _ in range(2):
        runs.append([
            (r.partition(), tuple(c.hidden_label for c in r), tuple(c.centroid.tobytes() for c in r))
            for r in _stream(ClusterState(), vectors, 0.4, 5)
        ])
    assert runs[0] == runs[1]


def test_checkpoint_clusters_are_atomic():
    rng = np.random.default_rng(11)
    vectors = rng.normal(size=(30, 3))
    state = ClusterState()
    for e in embeddings(vectors):
        previous = state.partition()
        result, state, _ = chkpt_step(state, e, 0.5, 4)
        for atom in previous:
            assert any(atom <= c for c in result.partition())


def test_centroids_and_durations_exact():
    rng = np.random.default_rng(2)
    vectors = rng.normal(size=(25, 3))
    es = embeddings(vectors)
    result, _ = ahc(ClusterState.from_embeddings(es), 0.2)
    for c in result:
        np.testing.assert_allclose(c.centroid, vectors[list(c.members)].mean(axis=0), atol=1e-9)
        assert c.duration == pytest.approx(sum(es[m].duration for m in c.members))
        assert c.hidden_label in c.members
