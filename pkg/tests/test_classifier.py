import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from rumorlens.classifier import RetrievalVoteClassifier, evaluate_retrieval, predict, predict_many, vote
from rumorlens.core import EmbeddingRecord, Label
from rumorlens.exceptions import MissingEventTag
from rumorlens.hnsw import HnswParams, Neighbor, brute_force_knn, build_index
from synthetic import event_clusters, label_clusters, random_records, unit_vectors


def nb(sim, label, i=0):
    return Neighbor(f"n{i}", sim, Label(label), None)


def oracle_label(records, query, k):
    """Literal weighted vote over an exhaustive top-k."""
    by_id = {r.id: r for r in records}
    w = [0.0, 0.0, 0.0]
    for rid, sim in brute_force_knn(records, query, k):
        w[int(by_id[rid].label)] += max(sim, 0.0)
    best = max(w)
    return next(c for c in range(3) if w[c] == best)


class TestVote:
    def test_all_rumor(self):
        p = vote([nb(s, 1, i) for i, s in enumerate((0.9, 0.8, 0.7))])
        assert p.label == Label.RUMOR and p.rumor_score == 1.0

    def test_weights(self):
        p = vote([nb(0.9, 0), nb(0.5, 1, 1), nb(0.45, 1, 2)])
        assert p.weights == pytest.approx((0.9, 0.95, 0.0))
        assert p.label == Label.RUMOR
        assert p.rumor_score == pytest.approx(0.95 / 1.85)

    def test_tie_goes_to_lowest_label(self):
        assert vote([nb(0.5, 2), nb(0.5, 1, 1)]).label == Label.RUMOR
        assert vote([nb(0.5, 2), nb(0.5, 0, 1)]).label == Label.NON_RUMOR

    def test_negative_similarities_clamped(self):
        p = vote([nb(-0.9, 1), nb(0.1, 2, 1)])
        assert p.weights == (0.0, 0.0, 0.1) and p.label == Label.DEBUNK

    def test_unclamped(self):
        p = vote([nb(-0.9, 1), nb(0.1, 2, 1), nb(-0.2, 0, 2)], clamp_negative=False)
        assert p.label == Label.DEBUNK and p.rumor_score == pytest.approx(1 / 3)

    def test_zero_weight_score(self):
        p = vote([nb(-0.3, 1)])
        assert p.rumor_score == pytest.approx(1 / 3) and p.label == Label.NON_RUMOR

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.floats(-1, 1), st.integers(0, 2)), min_size=1, max_size=15))
    def test_score_in_unit_interval(self, pairs):
        p = vote([nb(s, l, i) for i, (s, l) in enumerate(pairs)])
        assert 0.0 <= p.rumor_score <= 1.0
        assert p.weights[int(p.label)] == max(p.weights)


class TestPredict:
    def test_matches_exhaustive_oracle(self):
        recs = random_records(400, 12, seed=21)
        idx = build_index(recs, HnswParams(M=8, ef_construction=40, ef_search=400))
        for q in unit_vectors(40, 12, seed=22):
            assert int(predict(idx, q, 10).label) == oracle_label(recs, q, 10)

    def test_scale_invariant(self):
        recs = random_records(200, 8, seed=3)
        idx = build_index(recs)
        for q in unit_vectors(10, 8, seed=4):
            a, b = predict(idx, q, 7), predict(idx, 42.0 * q, 7)
            assert a.label == b.label
            assert a.weights == pytest.approx(b.weights, abs=1e-12)

    def test_k_larger_than_index(self):
        idx = build_index(random_records(3, 4, seed=0))
        assert len(predict(idx, np.ones(4), 10).neighbors) == 3

    def test_parallel_order(self):
        idx = build_index(random_records(300, 8, seed=5))
        qs = unit_vectors(25, 8, seed=6)
        assert [p.to_dict() for p in predict_many(idx, qs, 5, jobs=4)] == \
            [p.to_dict() for p in predict_many(idx, qs, 5, jobs=1)]


class TestRetrieval:
    def test_clustered_events_hit(self):
        recs = event_clusters(n_events=8, members=5, dim=16, seed=1)
        idx = build_index(recs)
        assert evaluate_retrieval(idx, recs, 4) == 1.0

    def test_singleton_events_miss(self):
        recs = [EmbeddingRecord(r.id, r.label, r.vector, event=r.id) for r in random_records(30, 8, seed=2)]
        assert evaluate_retrieval(build_index(recs), recs, 5) == 0.0

    def test_missing_event(self):
        recs = random_records(5, 4, seed=0)
        with pytest.raises(MissingEventTag):
            evaluate_retrieval(build_index(recs), recs, 2)


class TestEstimator:
    def test_fit_predict_score(self):
        recs = label_clusters(per_label=60, dim=16, seed=3)
        X = np.stack([r.vector for r in recs])
        y = np.array([int(r.label) for r in recs])
        clf = clone(RetrievalVoteClassifier(n_neighbors=5)).fit(X[:150], y[:150])
        assert clf.score(X[150:], y[150:]) >= 0.95
        proba = clf.predict_proba(X[150:])
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)
        np.testing.assert_allclose(proba[:, 1], clf.rumor_score(X[150:]))

    def test_get_params(self):
        assert RetrievalVoteClassifier(n_neighbors=3).get_params()["n_neighbors"] == 3
