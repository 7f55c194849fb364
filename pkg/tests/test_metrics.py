import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import roc_auc_score

from rumorlens.exceptions import DegenerateLabels, EmptyMatrix, MalformedCurve
from rumorlens.metrics import (
    ConfusionMatrix3,
    RocPoint,
    accumulate,
    accuracy,
    auc,
    f1,
    format_report,
    macro_precision,
    macro_recall,
    metrics_report,
    roc_curve,
)


def literal_metrics(F):
    """Straight transcription of the macro formulas, 0/0 -> 0."""
    F = [[int(v) for v in row] for row in F]
    p_terms, r_terms = [], []
    for c in range(3):
        col = sum(F[i][c] for i in range(3))
        row = sum(F[c][j] for j in range(3))
        p_terms.append(F[c][c] / col if col else 0.0)
        r_terms.append(F[c][c] / row if row else 0.0)
    P, R = sum(p_terms) / 3, sum(r_terms) / 3
    return P, R, (2 * P * R / (P + R) if P + R else 0.0)


def mann_whitney(pos, neg):
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


matrices = st.lists(st.integers(0, 50), min_size=9, max_size=9).filter(lambda v: sum(v) > 0).map(
    lambda v: np.array(v).reshape(3, 3))


class TestConfusion:
    def test_accumulate(self):
        m = accumulate([(1, 1), (1, 0), (2, 2)])
        assert m.to_list() == [[0, 0, 0], [1, 1, 0], [0, 0, 1]]
        assert m.N == 3

    def test_uniform(self):
        m = ConfusionMatrix3(np.ones((3, 3)))
        assert macro_precision(m) == pytest.approx(1 / 3)
        assert macro_recall(m) == pytest.approx(1 / 3)
        assert f1(m) == pytest.approx(1 / 3)

    def test_missing_class_counts_zero(self):
        m = ConfusionMatrix3([[5, 0, 0], [0, 0, 0], [0, 0, 5]])
        assert macro_precision(m) == pytest.approx(2 / 3)
        assert macro_recall(m) == pytest.approx(2 / 3)
        assert accuracy(m) == 1.0

    def test_empty(self):
        with pytest.raises(EmptyMatrix):
            accuracy(ConfusionMatrix3())

    @settings(max_examples=200)
    @given(matrices)
    def test_oracle(self, F):
        m = ConfusionMatrix3(F)
        P, R, F1 = literal_metrics(F)
        assert macro_precision(m) == pytest.approx(P, abs=1e-12)
        assert macro_recall(m) == pytest.approx(R, abs=1e-12)
        assert f1(m) == pytest.approx(F1, abs=1e-12)
        assert 0 <= f1(m) <= 1

    @settings(max_examples=100)
    @given(matrices)
    def test_binary_counts_partition(self, F):
        c = ConfusionMatrix3(F).binary_counts()
        assert c["tp"] + c["fp"] + c["tn"] + c["fn"] == int(F.sum())

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60), st.randoms())
    def test_order_free(self, pairs, rnd):
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        assert accumulate(pairs).to_list() == accumulate(shuffled).to_list()


class TestRoc:
    def test_example(self):
        scored = [(0.9, 1), (0.4, 1), (0.6, 0), (0.1, 2)]
        assert auc(roc_curve(scored)) == pytest.approx(0.75)

    def test_constant_scores(self):
        curve = roc_curve([(0.3, 1), (0.3, 0), (0.3, 2), (0.3, 1)])
        assert [(p.fpr, p.tpr) for p in curve] == [(0.0, 0.0), (1.0, 1.0)]
        assert auc(curve) == 0.5

    def test_reversed_below_diagonal(self):
        assert auc(roc_curve([(0.1, 1), (0.2, 1), (0.8, 0), (0.9, 2)])) == 0.0

    def test_endpoints(self):
        curve = roc_curve([(0.5, 1), (0.2, 0)])
        assert curve[0].threshold == float("inf")
        assert (curve[-1].fpr, curve[-1].tpr) == (1.0, 1.0)

    def test_degenerate(self):
        with pytest.raises(DegenerateLabels):
            roc_curve([(0.5, 1), (0.2, 1)])

    def test_malformed(self):
        with pytest.raises(MalformedCurve):
            auc([RocPoint(0, 0, 1.0)])
        with pytest.raises(MalformedCurve):
            auc([RocPoint(0, 0, 1.0), RocPoint(0.5, 0.2, 0.5), RocPoint(0.4, 1, 0.1), RocPoint(1, 1, 0.0)])

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.integers(0, 10).map(lambda v: v / 10), st.integers(0, 2)), min_size=2, max_size=40))
    def test_mann_whitney(self, scored):
        pos = [s for s, a in scored if a == 1]
        neg = [s for s, a in scored if a != 1]
        if not pos or not neg:
            return
        value = auc(roc_curve(scored))
        assert value == pytest.approx(mann_whitney(pos, neg), abs=1e-9)
        assert value == pytest.approx(roc_auc_score([a == 1 for _, a in scored], [s for s, _ in scored]), abs=1e-9)

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 2)), min_size=2, max_size=30), st.randoms())
    def test_permutation_invariant(self, scored, rnd):
        if len({a == 1 for _, a in scored}) < 2:
            return
        shuffled = list(scored)
        rnd.shuffle(shuffled)
        assert auc(roc_curve(scored)) == auc(roc_curve(shuffled))


def test_report():
    rep = metrics_report([0, 1, 2, 1], [0, 1, 1, 1], [0.1, 0.9, 0.7, 0.8])
    assert rep["n"] == 4 and rep["accuracy"] == 0.75 and rep["auc"] == 1.0
    assert rep["roc"][0]["threshold"] is None
    text = format_report(rep)
    assert "accuracy" in text and "debunk" in text


def test_report_single_class_has_no_auc():
    rep = metrics_report([1, 1], [1, 0], [0.4, 0.6])
    assert rep["auc"] is None and "n/a" in format_report(rep)
