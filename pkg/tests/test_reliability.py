import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpsseq.errors import ValidationError
from cpsseq.reliability import RaterTable, channelwise_alpha, krippendorff_alpha, table_from_rows

from oracles import alpha_oracle


def test_perfect_agreement():
    labels = [["a", "b", "c"][i % 3] for i in range(50)]
    res = krippendorff_alpha(RaterTable(list(range(50)), [labels, labels[:]]))
    assert res.alpha == 1.0
    assert res.observed_disagreement == 0


def test_independent_uniform_raters_near_zero():
    rng = np.random.default_rng(0)
    r = rng.integers(0, 3, size=(2, 10_000)).tolist()
    res = krippendorff_alpha(RaterTable(list(range(10_000)), r))
    assert abs(res.alpha) < 0.05
    assert res.alpha == pytest.approx(alpha_oracle(r), abs=1e-12)


def test_total_disagreement_hand_value():
    # n = 4 binary units, raters always disagree, labels balanced:
    # o = [[0, 4], [4, 0]], n = 8, Do = 1, De = (64 - 32) / 56 = 4/7
    res = krippendorff_alpha(RaterTable([1, 2, 3, 4], [["x", "y", "x", "y"], ["y", "x", "y", "x"]]))
    assert res.coincidence.tolist() == [[0, 4], [4, 0]]
    assert res.observed_disagreement == 1
    assert res.expected_disagreement == pytest.approx(4 / 7)
    assert res.alpha == pytest.approx(-0.75)


def test_three_raters_with_gaps_against_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        r = [[None if rng.random() < 0.3 else "abcd"[int(rng.integers(4))] for _ in range(15)] for _ in range(3)]
        try:
            want = alpha_oracle(r)
        except ZeroDivisionError:
            continue
        assert krippendorff_alpha(RaterTable(list(range(15)), r)).alpha == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_all_identical_is_degenerate_one():
    res = krippendorff_alpha(RaterTable([1, 2], [["a", "a"], ["a", "a"]]))
    assert res.alpha == 1.0 and res.degenerate


def test_insufficient_overlap():
    with pytest.raises(ValidationError, match="insufficient overlap"):
        krippendorff_alpha(RaterTable([1, 2], [["a", None], [None, "b"]]))


def test_needs_two_raters():
    with pytest.raises(ValidationError):
        RaterTable([1], [["a"]])


ratings_strategy = st.lists(
    st.tuples(st.sampled_from("abc"), st.sampled_from("abc"), st.sampled_from(["a", "b", "c", None])),
    min_size=3,
    max_size=20,
)


def _alpha_or_none(rows):
    try:
        res = krippendorff_alpha(RaterTable(list(range(len(rows))), [list(c) for c in zip(*rows)]))
    except ValidationError:
        return None
    return res.alpha


@settings(max_examples=100, deadline=None)
@given(ratings_strategy, st.permutations([0, 1, 2]))
def test_rater_permutation_invariance(rows, perm):
    base = _alpha_or_none(rows)
    moved = _alpha_or_none([tuple(r[p] for p in perm) for r in rows])
    assert (base is None) == (moved is None)
    if base is not None:
        assert moved == pytest.approx(base, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(ratings_strategy)
def test_relabel_invariance(rows):
    mapping = {"a": "q", "b": "a", "c": "zz", None: None}
    base = _alpha_or_none(rows)
    moved = _alpha_or_none([tuple(mapping[v] for v in r) for r in rows])
    if base is not None:
        assert moved == pytest.approx(base, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(ratings_strategy, st.sampled_from("abc"))
def test_single_rated_unit_is_ignored(rows, label):
    base = _alpha_or_none(rows)
    moved = _alpha_or_none(rows + [(label, None, None)])
    if base is not None:
        assert moved == pytest.approx(base, abs=1e-12)


def test_channelwise_and_pooled():
    a = RaterTable([1, 2, 3, 4], [["KS", "KM", "KS", "KD"], ["KS", "KM", "KM", "KD"]])
    b = RaterTable([1, 2, 3], [["CM", "OB", "CM"], ["CM", "OB", "CM"]])
    out = channelwise_alpha({"Cognitive": a, "Behavioural": b})
    assert set(out) == {"Cognitive", "Behavioural", "pooled"}
    assert out["Behavioural"].alpha == 1.0
    pooled = alpha_oracle([a.ratings[0] + b.ratings[0], a.ratings[1] + b.ratings[1]])
    assert out["pooled"].alpha == pytest.approx(pooled)
    assert out["Cognitive"].alpha < out["pooled"].alpha < 1


def test_table_from_rows_blank_is_missing():
    t = table_from_rows([("u1", "a", "a", ""), ("u2", "b", "", "b")])
    assert t.ratings == [["a", "b"], ["a", None], [None, "b"]]
    assert krippendorff_alpha(t).alpha == 1.0
