"""Hierarchical navigable small-world graph index over cosine distance.

Vectors are normalised on insert, so cosine distance ``1 - <u, v>`` orders
neighbours exactly like Euclidean distance would.  Each node lives on layers
``0..level``; upper layers are sparse "express lanes" that a query descends
greedily before running a beam search on the dense bottom layer.

Edges are kept symmetric: when a node's neighbour list overflows, the dropped
edge is removed from both endpoints.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from rumorlens.core import EmbeddingRecord, Label, validate_record
from rumorlens.embedding import normalize
from rumorlens.exceptions import (
    DimensionMismatch,
    DuplicateId,
    EmptyCorpus,
    EmptyIndex,
    EmptyIndexLayer,
    InvalidParams,
    OutOfRangeDraw,
)


@dataclass(frozen=True)
class HnswParams:
    M: int = 16
    ef_construction: int = 200
    ef_search: int = 100
    rng_seed: int = 0
    M0: Optional[int] = None
    level_multiplier: Optional[float] = None

    def __post_init__(self):
        if self.M < 2:
            raise InvalidParams(f"M must be at least 2, got {self.M}")
        if self.ef_construction < self.M:
            raise InvalidParams("ef_construction must be >= M")
        if self.ef_search < 1:
            raise InvalidParams("ef_search must be >= 1")
        if self.M0 is None:
            object.__setattr__(self, "M0", 2 * self.M)
        if self.level_multiplier is None:
            object.__setattr__(self, "level_multiplier", 1.0 / math.log(self.M))

    def to_dict(self) -> dict:
        return asdict(self)


def assign_level(u: float, mL: float) -> int:
    """Map a uniform draw in (0, 1] to a layer: ``floor(-ln(u) * mL)``."""
    if not (0.0 < u <= 1.0):
        raise OutOfRangeDraw(f"uniform draw must lie in (0, 1], got {u!r}")
    # -log(u) * mL can land a hair under an integer (u = 1/M); round before flooring
    return int(math.floor(round(-math.log(u) * mL, 12)))


@dataclass(frozen=True)
class Neighbor:
    id: str
    similarity: float
    label: Label
    event: Optional[str] = None


class HnswIndex:
    """Insert-only HNSW graph keyed by string record ids.

    Parameters
    ----------
    dim : int
        Vector dimension every record must match.
    params : HnswParams, optional
        Graph construction and search parameters.
    """

    def __init__(self, dim: int, params: Optional[HnswParams] = None):
        if dim < 1:
            raise InvalidParams(f"dim must be positive, got {dim}")
        self.dim = int(dim)
        self.params = params or HnswParams()
        self._rng = np.random.default_rng(self.params.rng_seed)
        self._vectors = np.empty((0, self.dim), dtype=np.float64)
        self._ids: list[str] = []
        self._node_of: dict[str, int] = {}
        self._labels: list[Label] = []
        self._events: list[Optional[str]] = []
        self._sources: list[Optional[str]] = []
        self._levels: list[int] = []
        # _links[node][layer] -> neighbour node numbers
        self._links: list[list[list[int]]] = []
        self.entry_point: Optional[int] = None
        self.max_level = -1
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def record(self, node: int) -> EmbeddingRecord:
        return EmbeddingRecord(
            self._ids[node], self._labels[node], self._vectors[node],
            self._events[node], self._sources[node],
        )

    def records(self) -> list[EmbeddingRecord]:
        return [self.record(i) for i in range(len(self))]

    def node_of(self, record_id: str) -> int:
        return self._node_of[record_id]

    def level_of(self, record_id: str) -> int:
        return self._levels[self._node_of[record_id]]

    def neighbors_of(self, record_id: str, layer: int = 0) -> list[str]:
        node = self._node_of[record_id]
        return [self._ids[j] for j in self._links[node][layer]]

    # -- search ---------------------------------------------------------

    def _distances(self, nodes, q) -> np.ndarray:
        return 1.0 - self._vectors[nodes] @ q

    def search_layer(self, query, entry: Sequence[int], ef: int, layer: int) -> list[tuple[float, int]]:
        """Best-first beam search on one layer.

        Returns up to ``ef`` ``(cosine distance, node)`` pairs, nearest first.
        ``query`` must already be unit length.
        """
        if layer < 0 or layer > self.max_level:
            raise EmptyIndexLayer(f"layer {layer} does not exist")
        entry = [e for e in entry if self._levels[e] >= layer]
        if not entry:
            raise EmptyIndexLayer(f"no entry node lives on layer {layer}")
        links = self._links
        vectors = self._vectors
        visited = set(entry)
        dists = (1.0 - vectors[entry] @ query).tolist()
        candidates = list(zip(dists, entry))
        heapq.heapify(candidates)
        results = [(-d, e) for d, e in candidates]
        heapq.heapify(results)
        while len(results) > ef:
            heapq.heappop(results)

        while candidates:
            dist_c, c = heapq.heappop(candidates)
            worst = -results[0][0]
            if dist_c > worst:
                break
            fresh = [n for n in links[c][layer] if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            for d, n in zip((1.0 - vectors[fresh] @ query).tolist(), fresh):
                if d < worst or len(results) < ef:
                    heapq.heappush(candidates, (d, n))
                    heapq.heappush(results, (-d, n))
                    if len(results) > ef:
                        heapq.heappop(results)
                    worst = -results[0][0]
        return sorted((-nd, n) for nd, n in results)

    def _descend(self, q, target_layer: int) -> list[int]:
        """Greedy ef=1 walk from the entry point down to ``target_layer``."""
        ep = [self.entry_point]
        for layer in range(self.max_level, target_layer, -1):
            ep = [self.search_layer(q, ep, 1, layer)[0][1]]
        return ep

    def search_knn(self, query, k: int = 10, ef_search: Optional[int] = None) -> list[tuple[str, float]]:
        """Approximate top-``k`` by cosine similarity, best first.

        Returns fewer than ``k`` results when the index holds fewer records.
        """
        return [(nb.id, nb.similarity) for nb in self.query(query, k, ef_search)]

    def query(self, query, k: int = 10, ef_search: Optional[int] = None) -> list[Neighbor]:
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        q = np.asarray(query, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise DimensionMismatch(f"query has {q.shape[0]} components, index expects {self.dim}")
        q = normalize(q)
        with self._lock:
            if self.entry_point is None:
                raise EmptyIndex("cannot search an empty index")
            ef = max(ef_search if ef_search is not None else self.params.ef_search, k)
            ep = self._descend(q, 0)
            found = self.search_layer(q, ep, ef, 0)
            hits = [
                (min(1.0, max(-1.0, 1.0 - d)), self._ids[n], n) for d, n in found
            ]
        hits.sort(key=lambda h: (-h[0], h[1]))
        return [
            Neighbor(rid, sim, self._labels[n], self._events[n]) for sim, rid, n in hits[:k]
        ]

    # -- construction ---------------------------------------------------

    def _draw_level(self) -> int:
        u = 1.0 - self._rng.random()
        return assign_level(u, self.params.level_multiplier)

    def _append_vector(self, vec):
        n = len(self._ids)
        if n == self._vectors.shape[0]:
            grown = np.empty((max(16, 2 * n), self.dim), dtype=np.float64)
            grown[:n] = self._vectors[:n]
            self._vectors = grown
        self._vectors[n] = vec

    def _shrink(self, node: int, layer: int, cap: int):
        """Drop the farthest edges of ``node`` until it has at most ``cap``.

        An edge whose other end would be left with no neighbours is skipped
        when another candidate exists, so pruning never strands a node.
        """
        links = self._links
        nbrs = links[node][layer]
        while len(nbrs) > cap:
            d = self._distances(nbrs, self._vectors[node])
            order = sorted(range(len(nbrs)), key=lambda i: (-d[i], nbrs[i]))
            victim = order[0]
            for i in order:
                if len(links[nbrs[i]][layer]) > 1:
                    victim = i
                    break
            dropped = nbrs.pop(victim)
            links[dropped][layer].remove(node)

    def insert(self, record: EmbeddingRecord) -> None:
        validate_record(record, self.dim)
        with self._lock:
            if record.id in self._node_of:
                raise DuplicateId(f"id {record.id!r} is already indexed")
            vec = normalize(record.vector)
            level = self._draw_level()
            node = len(self._ids)
            self._append_vector(vec)
            links: list[list[int]] = [[] for _ in range(level + 1)]

            if self.entry_point is None:
                self._commit(node, record, level, links)
                self.entry_point = node
                self.max_level = level
                return

            ep = self._descend(vec, level)
            layer_plan = []
            for layer in range(min(level, self.max_level), -1, -1):
                found = self.search_layer(vec, ep, self.params.ef_construction, layer)
                cap = self.params.M0 if layer == 0 else self.params.M
                layer_plan.append((layer, [n for _, n in found[:cap]], cap))
                ep = [n for _, n in found]

            # publish the node before wiring edges so pruning can see it
            self._commit(node, record, level, links)
            for layer, chosen, cap in layer_plan:
                links[layer].extend(chosen)
                for nb in chosen:
                    self._links[nb][layer].append(node)
                for nb in chosen:
                    if len(self._links[nb][layer]) > cap:
                        self._shrink(nb, layer, cap)
            if level > self.max_level:
                self.entry_point = node
                self.max_level = level

    def _commit(self, node, record, level, links):
        self._ids.append(record.id)
        self._node_of[record.id] = node
        self._labels.append(record.label)
        self._events.append(record.event)
        self._sources.append(record.source)
        self._levels.append(level)
        self._links.append(links)

    def extend(self, records: Iterable[EmbeddingRecord]) -> "HnswIndex":
        for r in records:
            self.insert(r)
        return self

    # -- diagnostics ----------------------------------------------------

    def structural_violations(self) -> list[str]:
        """List every broken graph invariant; an empty list means the graph is sound."""
        problems = []
        n = len(self)
        if n == 0:
            if self.entry_point is not None:
                problems.append("empty index has an entry point")
            return problems
        if self.entry_point is None:
            problems.append("non-empty index has no entry point")
        elif self._levels[self.entry_point] != max(self._levels):
            problems.append("entry point is not on the top level")
        if self.max_level != max(self._levels):
            problems.append("max_level is stale")
        for a in range(n):
            if len(self._links[a]) != self._levels[a] + 1:
                problems.append(f"node {a} has adjacency for {len(self._links[a])} layers, level {self._levels[a]}")
                continue
            for layer, nbrs in enumerate(self._links[a]):
                cap = self.params.M0 if layer == 0 else self.params.M
                if len(nbrs) > cap:
                    problems.append(f"node {a} layer {layer} degree {len(nbrs)} > {cap}")
                if len(set(nbrs)) != len(nbrs):
                    problems.append(f"node {a} layer {layer} has repeated neighbours")
                for b in nbrs:
                    if b == a:
                        problems.append(f"node {a} links to itself")
                    elif self._levels[b] < layer:
                        problems.append(f"node {a} links on layer {layer} to node {b} of level {self._levels[b]}")
                    elif a not in self._links[b][layer]:
                        problems.append(f"edge {a}->{b} on layer {layer} is not symmetric")
        return problems

    # -- persistence state ----------------------------------------------

    def rng_state(self) -> dict:
        return self._rng.bit_generator.state

    def set_rng_state(self, state: dict) -> None:
        self._rng.bit_generator.state = state

    @classmethod
    def _from_parts(cls, dim, params, records, levels, links, entry_point, rng_state=None):
        index = cls(dim, params)
        n = len(records)
        index._vectors = np.empty((max(n, 1), dim), dtype=np.float64)
        for i, r in enumerate(records):
            index._vectors[i] = r.vector
            index._ids.append(r.id)
            index._node_of[r.id] = i
            index._labels.append(r.label)
            index._events.append(r.event)
            index._sources.append(r.source)
        index._levels = list(levels)
        index._links = [[list(layer) for layer in node] for node in links]
        index.entry_point = entry_point
        index.max_level = max(levels) if levels else -1
        if rng_state is not None:
            index.set_rng_state(rng_state)
        return index


def brute_force_knn(records: Sequence[EmbeddingRecord], query, k: int = 10) -> list[tuple[str, float]]:
    """Exact top-``k`` by cosine similarity; ties go to the lexicographically smaller id."""
    if not records:
        raise EmptyCorpus("brute-force search needs at least one record")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    q = normalize(query)
    X = np.stack([r.vector for r in records])
    if X.shape[1] != q.shape[0]:
        raise DimensionMismatch(f"query has {q.shape[0]} components, corpus has {X.shape[1]}")
    sims = (X @ q) / np.linalg.norm(X, axis=1)
    sims = np.clip(sims, -1.0, 1.0)
    ranked = sorted(zip(sims.tolist(), (r.id for r in records)), key=lambda t: (-t[0], t[1]))
    return [(rid, s) for s, rid in ranked[:k]]


def build_index(records: Iterable[EmbeddingRecord], params: Optional[HnswParams] = None,
                dim: Optional[int] = None) -> HnswIndex:
    records = list(records)
    if dim is None:
        if not records:
            raise EmptyCorpus("cannot infer the dimension of an empty corpus")
        dim = records[0].dim
    return HnswIndex(dim, params).extend(records)


class HNSWNeighbors(BaseEstimator):
    """Approximate cosine nearest neighbours with a NearestNeighbors-like API.

    ``kneighbors`` returns ``(distances, indices)`` where distances are cosine
    distances and indices refer to rows of the ``X`` passed to ``fit``.
    """

    def __init__(self, n_neighbors=10, M=16, ef_construction=200, ef_search=100, random_state=0):
        self.n_neighbors = n_neighbors
        self.M = M
        self.ef_construction = ef_construction
        self.ef_search = ef_search
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        params = HnswParams(M=self.M, ef_construction=self.ef_construction,
                            ef_search=self.ef_search, rng_seed=self.random_state)
        index = HnswIndex(X.shape[1], params)
        for i, row in enumerate(X):
            index.insert(EmbeddingRecord(str(i), Label.NON_RUMOR, row))
        self.index_ = index
        self.n_features_in_ = X.shape[1]
        self.n_samples_fit_ = X.shape[0]
        return self

    def kneighbors(self, X, n_neighbors=None, return_distance=True):
        check_is_fitted(self, "index_")
        X = check_array(X, dtype=np.float64)
        k = n_neighbors or self.n_neighbors
        k = min(k, self.n_samples_fit_)
        dist = np.empty((len(X), k))
        ind = np.empty((len(X), k), dtype=np.intp)
        for i, row in enumerate(X):
            hits = self.index_.search_knn(row, k)
            ind[i] = [int(rid) for rid, _ in hits]
            dist[i] = [1.0 - s for _, s in hits]
        return (dist, ind) if return_distance else ind
