from itertools import product

import numpy as np
import pytest

from lbdkit.errors import EmptyIntersectionError, RankLookupError
from lbdkit.evalkit import (
    RankedList,
    RocCurve,
    auc,
    auc_trapezoid,
    export_roc_csv,
    position_of,
    rank_aggregate,
    render_roc_svg,
    roc_curve,
)


def brute_force_auc(scores, positives):
    pos = [s for k, s in scores.items() if k in positives]
    neg = [s for k, s in scores.items() if k not in positives]
    total = 0.0
    for p, n in product(pos, neg):
        total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def test_ranked_list_orders_by_score_then_key():
    ranked = RankedList.from_scores({"b": 1.0, "a": 1.0, "c": 3.0})
    assert ranked.keys() == ["c", "a", "b"]
    assert ranked.position_of("a") == 2
    assert position_of("b", ranked) == 3
    assert ranked.score_of("c") == 3.0
    with pytest.raises(RankLookupError):
        ranked.position_of("zzz")


def test_ascending_list_puts_lowest_first():
    ranked = RankedList.from_scores({"rare": 0.1, "common": 5.0}, ascending=True)
    assert ranked.keys() == ["rare", "common"]


def test_ranked_list_rejects_bad_order_and_duplicates():
    with pytest.raises(ValueError):
        RankedList(items=(("a", 1.0), ("b", 2.0)))
    with pytest.raises(ValueError):
        RankedList(items=(("a", 1.0), ("a", 0.5)))
    with pytest.raises(ValueError):
        RankedList(items=(("b", 1.0), ("a", 1.0)))


def test_restrict_top_and_frame():
    ranked = RankedList.from_scores({"a": 3.0, "b": 2.0, "c": 1.0})
    assert ranked.restrict(["c", "a"]).keys() == ["a", "c"]
    assert ranked.top(2).keys() == ["a", "b"]
    frame = ranked.to_frame()
    assert list(frame.columns) == ["key", "score", "rank"]
    assert frame["rank"].tolist() == [1, 2, 3]


def test_perfect_and_reversed_rankings():
    ranked = RankedList.from_scores({"p1": 4.0, "p2": 3.0, "n1": 2.0, "n2": 1.0})
    assert auc(ranked, {"p1", "p2"}) == 1.0
    assert auc(ranked, {"n1", "n2"}) == 0.0


def test_auc_matches_pairwise_count_with_ties():
    scores = {"a": 5.0, "b": 4.0, "c": 4.0, "d": 3.0, "e": 3.0, "f": 1.0, "g": 0.5}
    positives = {"b", "e", "g"}
    ranked = RankedList.from_scores(scores)
    assert auc(ranked, positives) == pytest.approx(brute_force_auc(scores, positives))


def random_tied_ranking(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(2, 30))
    scores = {f"k{i:02d}": float(rng.integers(0, 5)) for i in range(size)}
    shuffled = [str(key) for key in rng.permutation(sorted(scores))]
    return scores, set(shuffled[: int(rng.integers(1, size))])


@pytest.mark.parametrize("seed", range(200))
def test_auc_matches_pairwise_count_on_random_tied_rankings(seed):
    scores, positives = random_tied_ranking(seed)
    ranked = RankedList.from_scores(scores)
    expected = brute_force_auc(scores, positives)
    assert auc(ranked, positives) == pytest.approx(expected)
    assert auc_trapezoid(roc_curve(ranked, positives)) == pytest.approx(expected)


def test_trapezoid_area_agrees_with_mann_whitney():
    scores = {"a": 5.0, "b": 4.0, "c": 4.0, "d": 3.0, "e": 3.0, "f": 1.0, "g": 0.5}
    positives = {"a", "c", "f"}
    ranked = RankedList.from_scores(scores)
    curve = roc_curve(ranked, positives)
    assert auc_trapezoid(curve) == pytest.approx(auc(ranked, positives))


def test_roc_curve_steps_once_per_tie_group():
    ranked = RankedList.from_scores({"a": 2.0, "b": 1.0, "c": 1.0})
    curve = roc_curve(ranked, {"a", "c"})
    assert curve.points == ((0.0, 0.0), (0.0, 0.5), (1.0, 1.0))
    assert curve.fpr == [0.0, 0.0, 1.0]


def test_auc_needs_both_classes_and_ignores_unranked_positives():
    ranked = RankedList.from_scores({"a": 2.0, "b": 1.0})
    with pytest.raises(ValueError):
        auc(ranked, {"zzz"})
    with pytest.raises(ValueError):
        auc(ranked, {"a", "b"})
    assert auc(ranked, {"a", "zzz"}) == 1.0


def test_roc_curve_invariants():
    with pytest.raises(ValueError):
        RocCurve(points=((0.0, 0.0), (0.5, 0.4)))
    with pytest.raises(ValueError):
        RocCurve(points=((0.0, 0.0), (0.5, 0.6), (0.4, 0.7), (1.0, 1.0)))


def test_borda_aggregation_over_shared_keys():
    first = RankedList.from_scores({"a": 3.0, "b": 2.0, "c": 1.0, "only_first": 0.5})
    second = RankedList.from_scores({"b": 9.0, "a": 8.0, "c": 7.0})
    merged = rank_aggregate([first, second])
    assert merged.keys() == ["a", "b", "c"]
    assert merged.score_of("a") == 3.0
    assert merged.score_of("b") == 3.0
    assert merged.score_of("c") == 0.0


def test_borda_without_common_keys_raises():
    with pytest.raises(EmptyIntersectionError):
        rank_aggregate([RankedList.from_scores({"a": 1.0}), RankedList.from_scores({"b": 1.0})])
    with pytest.raises(EmptyIntersectionError):
        rank_aggregate([])


def test_roc_exports(tmp_path):
    curve = roc_curve(RankedList.from_scores({"a": 2.0, "b": 1.0}), {"a"})
    csv_path = export_roc_csv(curve, tmp_path / "roc.csv")
    assert csv_path.read_text(encoding="utf-8").splitlines() == ["fpr,tpr", "0,0", "0,1", "1,1"]
    svg = render_roc_svg(curve, tmp_path / "roc.svg", title="A & B").read_text(encoding="utf-8")
    assert svg.startswith("<svg")
    assert "A &amp; B" in svg
