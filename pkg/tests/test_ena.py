import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpsseq.coding import MultichannelSequence
from cpsseq.ena import accumulate, code_pairs, fit_ena, normalize_and_project, strong_edges
from cpsseq.errors import ComputationError
from cpsseq.synthetic import planted_corpus

from conftest import random_sequence


def accumulate_oracle(seq, window, codes):
    """Stanza rule evaluated literally: one set of codes per stanza, one count per pair."""
    pos = seq.positions()
    out = {p: 0 for p in itertools.combinations(codes, 2)}
    for t in range(len(pos)):
        present = {c for s in pos[max(0, t - window + 1) : t + 1] for c in s if c is not None}
        for p in out:
            if p[0] in present and p[1] in present:
                out[p] += 1
    return np.array(list(out.values()), dtype=float)


def seq_of(scheme, *positions):
    rows = []
    for codes in positions:
        row = [None] * scheme.n_channels
        for c in codes:
            row[scheme.channel_of(c)] = c
        rows.append(tuple(row))
    return MultichannelSequence.from_positions("s", rows, scheme.n_channels)


def test_single_code_gives_zero(scheme):
    s = seq_of(scheme, ["Int-C"], ["Int-C"], [], ["Int-C"])
    assert not accumulate(s, 4, scheme.codes).any()


def test_two_position_window(scheme):
    v = accumulate(seq_of(scheme, ["Int-C"], ["CM"]), 2, scheme.codes)
    pairs = code_pairs(scheme.codes)
    assert v[pairs.index(("Int-C", "CM"))] == 1
    assert v.sum() == 1


def test_window_one_single_codes_is_zero(scheme, rng):
    codes = list(scheme.codes)
    s = seq_of(scheme, *[[codes[int(rng.integers(14))]] for _ in range(20)])
    assert not accumulate(s, 1, codes).any()


def test_window_one_same_position_pairs(scheme):
    v = accumulate(seq_of(scheme, ["KS", "CM"]), 1, scheme.codes)
    assert v[code_pairs(scheme.codes).index(("KS", "CM"))] == 1


@pytest.mark.parametrize("window", [1, 2, 4, 7])
def test_accumulate_matches_literal_rule(scheme, rng, window):
    for _ in range(15):
        s = random_sequence(rng, scheme, int(rng.integers(0, 25)), missing=0.7)
        np.testing.assert_array_equal(accumulate(s, window, scheme.codes), accumulate_oracle(s, window, scheme.codes))


def planar_vectors(rng, n, dim=12):
    """Nonnegative raw vectors whose normalized forms lie on one 2-D plane."""
    a = np.zeros(dim)
    b = np.zeros(dim)
    a[: dim // 2] = rng.uniform(0.5, 1, dim // 2)
    b[dim // 2 :] = rng.uniform(0.5, 1, dim - dim // 2)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    theta = rng.uniform(0, np.pi / 2, n)
    scale = rng.uniform(0.1, 50, n)
    return (np.cos(theta)[:, None] * a + np.sin(theta)[:, None] * b) * scale[:, None]


def codes_for(dim):
    # 5 codes give 10 pairs, 6 give 15
    k = next(k for k in range(2, 20) if k * (k - 1) // 2 >= dim)
    return [f"c{i}" for i in range(k)], k * (k - 1) // 2


@pytest.mark.parametrize("seed", range(5))
def test_rank_two_distances_preserved(seed):
    rng = np.random.default_rng(seed)
    codes, dim = codes_for(15)
    raw = planar_vectors(rng, 3 + seed * 3, dim)
    m = normalize_and_project(raw, [str(i) for i in range(len(raw))], None, codes)
    centered = m.normalized_vectors - m.center
    dc = np.linalg.norm(centered[:, None] - centered[None], axis=-1)
    dp = np.linalg.norm(m.points[:, None] - m.points[None], axis=-1)
    np.testing.assert_allclose(dp, dc, atol=1e-9)


def test_model_invariants_on_corpus(scheme):
    seqs, truth = planted_corpus(seed=2)
    m = fit_ena(seqs, scheme, truth, window=4)
    norms = np.linalg.norm(m.normalized_vectors[~m.zero_vector], axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-9)
    np.testing.assert_allclose(m.directions @ m.directions.T, np.eye(2), atol=1e-9)
    assert m.singular_values[0] >= m.singular_values[1]
    assert 0 <= m.variance_share.sum() <= 1 + 1e-12
    for c, w in m.edges.items():
        assert ((w >= 0) & (w <= 1)).all()
        members = [i for i, l in enumerate(m.labels) if truth[l] == c]
        np.testing.assert_allclose(m.centroids[c], m.points[members].mean(axis=0))
    for d in m.directions:
        assert d[np.argmax(np.abs(d))] > 0
    # projection is a contraction of centered distances
    centered = m.normalized_vectors - m.center
    dc = np.linalg.norm(centered[:, None] - centered[None], axis=-1)
    dp = np.linalg.norm(m.points[:, None] - m.points[None], axis=-1)
    assert (dp <= dc + 1e-12).all()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1e4), min_size=6, max_size=6))
def test_positive_scaling_leaves_normalized_unchanged(scales):
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 5, size=(6, 10)).astype(float)
    raw[0, 0] = 1
    codes = [f"c{i}" for i in range(5)]
    a = normalize_and_project(raw, list("abcdef"), None, codes)
    b = normalize_and_project(raw * np.array(scales)[:, None], list("abcdef"), None, codes)
    np.testing.assert_allclose(a.normalized_vectors, b.normalized_vectors, atol=1e-12)


def test_identical_vectors_sit_at_origin():
    raw = np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 0.0]])
    m = normalize_and_project(raw, ["a", "b"], None, ["x", "y", "z"])
    np.testing.assert_allclose(m.points, 0, atol=1e-12)


def test_zero_vectors_flagged_and_at_origin():
    raw = np.array([[1.0, 0, 0], [0, 0, 0], [0, 1.0, 0]])
    m = normalize_and_project(raw, ["a", "b", "c"], {"a": 1, "b": 2, "c": 1}, ["x", "y", "z"])
    assert m.zero_vector.tolist() == [False, True, False]
    assert m.points[1].tolist() == [0, 0]
    np.testing.assert_allclose(m.centroids[2], m.points[1])


def test_all_zero_raises():
    with pytest.raises(ComputationError, match="no co-occurrence structure"):
        normalize_and_project(np.zeros((3, 3)), ["a", "b", "c"], None, ["x", "y", "z"])


def test_permuting_sequences_permutes_points(scheme):
    seqs, truth = planted_corpus(sizes=(4, 6, 4), seed=4)
    base = fit_ena(seqs, scheme, truth)
    order = np.random.default_rng(1).permutation(len(seqs))
    moved = fit_ena([seqs[i] for i in order], scheme, truth)
    np.testing.assert_allclose(moved.points, base.points[order], atol=1e-10)
    for c in base.centroids:
        np.testing.assert_allclose(moved.centroids[c], base.centroids[c], atol=1e-10)


def test_strong_edges(scheme):
    # every sequence pairs Int-C with OB at almost every stanza
    seqs = [
        MultichannelSequence.from_positions(
            f"s{k}",
            [("Int-C", None, None, "OB", None), (None, "KS", None, None, None)] * (3 + k)
            + [(None, None, "TU", None, "FC")],
            5,
        )
        for k in range(4)
    ]
    m = fit_ena(seqs, scheme, {s.session_id: 1 for s in seqs}, window=2)
    top = strong_edges(m, 1, 0.0)
    assert top[0][0] == ("Int-C", "OB")
    assert [w for _, w in top] == sorted((w for _, w in top), reverse=True)
    assert all(w > 0 for _, w in top)
    assert strong_edges(m, 1, 1.0) == []
