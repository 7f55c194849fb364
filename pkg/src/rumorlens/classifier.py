"""Similarity-weighted label voting over retrieved knowledge records.

Each of the top-k neighbours votes for its own label with its cosine
similarity as weight; the heaviest label wins (lowest label code on ties).
The normalised Rumor weight doubles as a continuous score for ROC analysis.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from rumorlens.core import N_LABELS, EmbeddingRecord, Label
from rumorlens.exceptions import DimensionMismatch, MissingEventTag
from rumorlens.hnsw import HnswIndex, HnswParams, Neighbor

DEFAULT_K = 10


@dataclass(frozen=True)
class Prediction:
    label: Label
    weights: tuple
    neighbors: tuple
    rumor_score: float

    def to_dict(self) -> dict:
        return {
            "label": int(self.label),
            "weights": list(self.weights),
            "rumor_score": self.rumor_score,
            "neighbors": [
                {"id": nb.id, "label": int(nb.label), "similarity": nb.similarity}
                for nb in self.neighbors
            ],
        }


def vote(neighbors: Sequence[Neighbor], clamp_negative: bool = True) -> Prediction:
    """Turn a ranked neighbour list into a :class:`Prediction`."""
    weights = [0.0] * N_LABELS
    for nb in neighbors:
        w = max(0.0, nb.similarity) if clamp_negative else nb.similarity
        weights[int(nb.label)] += w
    # first maximum = lowest label code on ties
    label = Label(max(range(N_LABELS), key=lambda c: (weights[c], -c)))
    total = sum(weights)
    rumor_score = weights[Label.RUMOR] / total if total > 0 else 1.0 / N_LABELS
    rumor_score = min(1.0, max(0.0, rumor_score))
    return Prediction(label, tuple(weights), tuple(neighbors), rumor_score)


def predict(index: HnswIndex, query, k: int = DEFAULT_K, clamp_negative: bool = True,
            ef_search: Optional[int] = None) -> Prediction:
    return vote(index.query(query, k, ef_search), clamp_negative)


def predict_many(index: HnswIndex, queries, k: int = DEFAULT_K, clamp_negative: bool = True,
                 jobs: int = 1) -> list[Prediction]:
    """Classify each query; results are in input order whatever ``jobs`` is."""
    queries = list(queries)
    if jobs <= 1:
        return [predict(index, q, k, clamp_negative) for q in queries]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda q: predict(index, q, k, clamp_negative), queries))


def evaluate_retrieval(index: HnswIndex, queries: Sequence[EmbeddingRecord], k: int = DEFAULT_K) -> float:
    """Fraction of queries whose top-k holds another record of the same event.

    A query's own id is excluded from its neighbour list.
    """
    queries = list(queries)
    if not queries:
        return 0.0
    for q in queries:
        if q.event is None:
            raise MissingEventTag(f"query {q.id!r} has no event tag")
    hits = 0
    for q in queries:
        found = [nb for nb in index.query(q.vector, k + 1) if nb.id != q.id][:k]
        if any(nb.event is None for nb in found):
            raise MissingEventTag("indexed record without an event tag")
        hits += any(nb.event == q.event for nb in found)
    return hits / len(queries)


class RetrievalVoteClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn classifier backed by an HNSW knowledge index.

    ``fit`` inserts every training row as a knowledge record; ``predict``
    retrieves the ``n_neighbors`` most similar rows and takes the
    similarity-weighted vote.  ``predict_proba`` returns the normalised vote
    weights, so column 1 is the rumour score.
    """

    def __init__(self, n_neighbors=DEFAULT_K, M=16, ef_construction=200, ef_search=100,
                 clamp_negative=True, random_state=0):
        self.n_neighbors = n_neighbors
        self.M = M
        self.ef_construction = ef_construction
        self.ef_search = ef_search
        self.clamp_negative = clamp_negative
        self.random_state = random_state

    def fit(self, X, y, ids=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        labels = [Label.coerce(v) for v in y]
        params = HnswParams(M=self.M, ef_construction=self.ef_construction,
                            ef_search=self.ef_search, rng_seed=self.random_state)
        index = HnswIndex(X.shape[1], params)
        ids = [str(i) for i in range(len(X))] if ids is None else [str(i) for i in ids]
        for rid, row, lab in zip(ids, X, labels):
            index.insert(EmbeddingRecord(rid, lab, row))
        self.index_ = index
        self.classes_ = np.arange(N_LABELS)
        self.n_features_in_ = X.shape[1]
        return self

    def _predictions(self, X):
        check_is_fitted(self, "index_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return [predict(self.index_, row, self.n_neighbors, self.clamp_negative) for row in X]

    def predict(self, X):
        return np.array([int(p.label) for p in self._predictions(X)])

    def predict_proba(self, X):
        out = []
        for p in self._predictions(X):
            w = np.maximum(np.asarray(p.weights), 0.0)
            total = w.sum()
            out.append(w / total if total > 0 else np.full(N_LABELS, 1.0 / N_LABELS))
        return np.array(out)

    def rumor_score(self, X):
        return np.array([p.rumor_score for p in self._predictions(X)])
