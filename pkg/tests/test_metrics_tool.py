import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tools.metrics_tool import (MINORS, EvalConfig, accuracy, anls, anls_pair, evaluate, evaluate_by_group, f1,
                                f1_pair, levenshtein, merge_minor_groups, normalize, normalized_levenshtein,
                                precision_recall, score_pairs)


def dp_distance(a, b):
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def test_normalize():
    assert normalize("  Tiền   MẶT \n") == "tiền mặt"
    assert normalize("  A  ", EvalConfig(normalize_text=False)) == "  A  "


def test_f1_identity():
    assert f1_pair(("tiền mặt", "tiền mặt")) == 1.0


def test_f1_partial_overlap():
    assert precision_recall(("50", "50 000")) == (1.0, 0.5)
    assert f1_pair(("50", "50 000")) == pytest.approx(2 / 3)


def test_f1_multiset_counts():
    assert precision_recall(("a a b", "a b b")) == pytest.approx((2 / 3, 2 / 3))
    assert f1_pair(("a a b", "a b b")) == pytest.approx(2 / 3)


def test_f1_empty_sides():
    assert f1_pair(("", "")) == 1.0
    assert f1_pair(("", "x")) == 0.0
    assert f1_pair(("x", "")) == 0.0


def test_accuracy_counts_exact_matches():
    assert accuracy([("a", "a"), ("B", "b")]) == 1.0
    assert accuracy([("a", "x"), ("b", "y")]) == 0.0
    assert accuracy([("a", "a"), ("b", "c"), ("d", "e")]) == pytest.approx(1 / 3)


def test_anls_worked_examples():
    assert normalized_levenshtein(("", "")) == 0.0
    assert anls_pair(("", "")) == 1.0
    assert normalized_levenshtein(("abc", "abd")) == pytest.approx(1 / 3)
    assert anls_pair(("abc", "abd")) == pytest.approx(2 / 3)
    assert levenshtein("50.000", "50 000") == 1
    assert anls_pair(("50.000", "50 000")) == pytest.approx(5 / 6)
    assert anls_pair(("xyz", "abc")) == 0.0


def test_tau_threshold_zeroes_scores():
    pair = ("abcd", "abxy")  # NL = 0.5
    assert anls_pair(pair, EvalConfig(tau=0.5)) == 0.0
    assert anls_pair(pair, EvalConfig(tau=0.6)) == pytest.approx(0.5)
    assert anls_pair(("abc", "abc"), EvalConfig(tau=0.0)) == 0.0


def test_invalid_tau():
    with pytest.raises(ValueError):
        EvalConfig(tau=1.5)


@given(st.text(max_size=12), st.text(max_size=12))
def test_levenshtein_matches_dp(a, b):
    assert levenshtein(a, b) == dp_distance(a, b)


@given(st.text(alphabet="ab 0.", max_size=10), st.text(alphabet="ab 0.", max_size=10))
def test_scores_lie_in_unit_interval(a, b):
    for score in (f1_pair((a, b)), anls_pair((a, b)), normalized_levenshtein((a, b))):
        assert 0.0 <= score <= 1.0
    assert f1_pair((a, b)) == pytest.approx(f1_pair((b, a)))
    assert anls_pair((a, b)) == pytest.approx(anls_pair((b, a)))


@given(st.text(alphabet="abc ", max_size=10))
def test_identical_pairs_score_one(text):
    assert anls_pair((text, text)) == 1.0
    assert f1_pair((text, text)) == 1.0


def test_empty_pair_list_scores_zero():
    assert anls([]) == 0.0 and f1([]) == 0.0 and accuracy([]) == 0.0


def test_evaluate_report():
    report = evaluate([("50.000", "50.000"), ("tiền", "tiền mặt")])
    assert report.n == 2
    assert report.accuracy == 0.5
    assert report.f1 == pytest.approx((1 + 2 / 3) / 2)
    assert report.as_percentages()["accuracy"] == 50.0


def test_score_pairs_frame():
    frame = score_pairs([("a", "a"), ("b", "c")])
    assert list(frame["exact"]) == [1.0, 0.0]
    assert list(frame.columns) == ["prediction", "ground_truth", "nl", "anls", "f1", "exact"]


@pytest.mark.parametrize("label, group", [("Reason", MINORS), ("Manner", MINORS), ("Other", MINORS), (None, MINORS),
                                          ("Time", "Time"), ("Numeric", "Numeric")])
def test_merge_minor_groups(label, group):
    assert merge_minor_groups(label) == group


def test_evaluate_by_group():
    pairs = [("a", "a"), ("b", "x"), ("c", "c"), ("d", "d")]
    reports = evaluate_by_group(pairs, ["Time", "Time", "Reason", "Manner"])
    assert set(reports) == {"Time", MINORS}
    assert reports["Time"].accuracy == 0.5 and reports["Time"].n == 2
    assert reports[MINORS].accuracy == 1.0 and reports[MINORS].n == 2


def test_evaluate_by_group_length_mismatch():
    with pytest.raises(ValueError):
        evaluate_by_group([("a", "a")], [])


def test_anls_matches_dp_on_random_pairs():
    rng = np.random.default_rng(0)
    alphabet = list("ab0. ")
    for _ in range(1000):
        a = "".join(rng.choice(alphabet, size=rng.integers(0, 10)))
        b = "".join(rng.choice(alphabet, size=rng.integers(0, 10)))
        na, nb = normalize(a), normalize(b)
        longest = max(len(na), len(nb))
        nl = dp_distance(na, nb) / longest if longest else 0.0
        expected = 1.0 - nl if nl < 0.5 else 0.0
        assert abs(anls_pair((a, b)) - expected) <= 1e-12


words = st.text(alphabet="ab0. ", max_size=10)


@given(st.text(alphabet="abc", max_size=8), st.text(alphabet="abc", max_size=8), st.text(alphabet="abc", max_size=8))
def test_levenshtein_triangle_inequality(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


@given(words, words, st.sampled_from([0.1, 0.25, 0.5, 0.75]))
def test_anls_pair_is_zero_or_above_one_minus_tau(a, b, tau):
    score = anls_pair((a, b), EvalConfig(tau=tau))
    assert score == 0.0 or 1.0 - tau < score <= 1.0


@given(words, words)
def test_swapping_sides_swaps_precision_and_recall(a, b):
    p, r = precision_recall((a, b))
    assert precision_recall((b, a)) == (r, p)


@given(st.lists(st.tuples(words, words), max_size=12).flatmap(
    lambda pairs: st.tuples(st.just(pairs), st.permutations(pairs))))
def test_corpus_scores_ignore_pair_order(pairs_and_shuffled):
    pairs, shuffled = pairs_and_shuffled
    for score in (anls, f1, accuracy):
        assert score(shuffled) == pytest.approx(score(pairs))
