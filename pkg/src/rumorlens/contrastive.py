"""Pairwise contrastive loss on cosine distance, with online hard-pair mining.

For a pair at cosine distance ``d`` the loss is ``d**2`` when both samples
share a label (pair label 1) and ``max(0, margin - d)**2`` otherwise.  The
online variant keeps only the hard pairs of a batch: negatives closer than the
farthest positive and positives farther than the closest negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from rumorlens.core import EmbeddingRecord
from rumorlens.embedding import cosine_distance
from rumorlens.exceptions import (
    DimensionMismatch,
    InvalidParams,
    NonPositiveLearningRate,
    TooFewRecords,
    ZeroNorm,
)

DEFAULT_MARGIN = 0.5


@dataclass(frozen=True)
class LossConfig:
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not self.margin > 0:
            raise InvalidParams(f"margin must be positive, got {self.margin}")


@dataclass(frozen=True, eq=False)
class SamplePair:
    a: np.ndarray
    b: np.ndarray
    pair_label: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64).reshape(-1)
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if a.shape != b.shape:
            raise DimensionMismatch(f"pair vectors differ in length: {a.shape[0]} vs {b.shape[0]}")
        if self.pair_label not in (0, 1):
            raise InvalidParams(f"pair_label must be 0 or 1, got {self.pair_label!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "pair_label", int(self.pair_label))

    @property
    def distance(self) -> float:
        return cosine_distance(self.a, self.b)


def _pair_indices(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` ordered index pairs drawn uniformly from ``{(i, j): i != j}``."""
    first = rng.integers(0, n, size=count)
    second = rng.integers(0, n - 1, size=count)
    second = second + (second >= first)
    return np.stack([first, second], axis=1)


def make_pairs(records: Sequence[EmbeddingRecord], rng_seed: int, count: int) -> list[SamplePair]:
    if len(records) < 2:
        raise TooFewRecords("pairing needs at least two records")
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    idx = _pair_indices(len(records), count, np.random.default_rng(rng_seed))
    return [
        SamplePair(records[i].vector, records[j].vector, int(records[i].label == records[j].label))
        for i, j in idx
    ]


def _loss_from_distance(d, y, margin):
    d = np.asarray(d, dtype=np.float64)
    y = np.asarray(y)
    return np.where(y == 1, d ** 2, np.maximum(0.0, margin - d) ** 2)


def _dloss_dd(d, y, margin):
    d = np.asarray(d, dtype=np.float64)
    y = np.asarray(y)
    # subgradient 0 exactly at d == margin
    return np.where(y == 1, 2.0 * d, np.where(d < margin, -2.0 * (margin - d), 0.0))


def contrastive_loss(pair: SamplePair, config: LossConfig = LossConfig()) -> float:
    d = pair.distance
    return float(_loss_from_distance(d, pair.pair_label, config.margin))


def _cosine_grads(A, B):
    """Row-wise cosine similarity of ``A`` and ``B`` plus its gradients."""
    na = np.linalg.norm(A, axis=-1, keepdims=True)
    nb = np.linalg.norm(B, axis=-1, keepdims=True)
    if np.any(na == 0) or np.any(nb == 0):
        raise ZeroNorm("contrastive gradient is undefined for a zero vector")
    s = np.sum(A * B, axis=-1, keepdims=True) / (na * nb)
    ds_da = B / (na * nb) - s * A / na ** 2
    ds_db = A / (na * nb) - s * B / nb ** 2
    return s[..., 0], ds_da, ds_db


def loss_gradient(pair: SamplePair, config: LossConfig = LossConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of :func:`contrastive_loss` with respect to ``pair.a`` and ``pair.b``."""
    s, ds_da, ds_db = _cosine_grads(pair.a[None, :], pair.b[None, :])
    d = 1.0 - np.clip(s, -1.0, 1.0)
    scale = -_dloss_dd(d, pair.pair_label, config.margin)[0]  # dd/ds = -1
    return scale * ds_da[0], scale * ds_db[0]


def _hard_mask(dist, labels, margin) -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    neg = ~pos
    if not pos.any():
        return neg & (dist < margin)
    if not neg.any():
        return pos.copy()
    return (neg & (dist < dist[pos].max())) | (pos & (dist > dist[neg].min()))


def mine_hard_pairs(batch: Sequence[SamplePair], margin: float = DEFAULT_MARGIN) -> list[SamplePair]:
    """Select the hard pairs of a batch, preserving batch order.

    ``margin`` only matters when the batch has no positive pairs, in which case
    the negatives still inside the margin are returned.
    """
    if not batch:
        return []
    dist = [p.distance for p in batch]
    mask = _hard_mask(dist, [p.pair_label for p in batch], margin)
    return [p for p, keep in zip(batch, mask) if keep]


def batch_loss(batch: Sequence[SamplePair], config: LossConfig = LossConfig(), online: bool = False) -> float:
    pairs = mine_hard_pairs(batch, config.margin) if online else list(batch)
    if not pairs:
        return 0.0
    return float(np.mean([contrastive_loss(p, config) for p in pairs]))


# -- desk-scale training -------------------------------------------------


@dataclass
class TrainingRun:
    records: list
    initial_loss: float
    final_loss: float
    history: list = field(default_factory=list)
    best_epoch: int = 0


def _online_objective(X, pairs, y, margin):
    """Online batch loss over index pairs and its gradient with respect to ``X``."""
    A, B = X[pairs[:, 0]], X[pairs[:, 1]]
    s, ds_da, ds_db = _cosine_grads(A, B)
    d = 1.0 - np.clip(s, -1.0, 1.0)
    mask = _hard_mask(d, y, margin)
    G = np.zeros_like(X)
    n_hard = int(mask.sum())
    if n_hard == 0:
        return 0.0, G
    loss = float(_loss_from_distance(d[mask], y[mask], margin).mean())
    scale = (-_dloss_dd(d[mask], y[mask], margin) / n_hard)[:, None]
    np.add.at(G, pairs[mask, 0], scale * ds_da[mask])
    np.add.at(G, pairs[mask, 1], scale * ds_db[mask])
    return loss, G


def training_pairs(n: int, seed: int, max_pairs: int = 20000) -> np.ndarray:
    """Every unordered pair when there are at most ``max_pairs``, else a seeded sample."""
    total = n * (n - 1) // 2
    if total <= max_pairs:
        i, j = np.triu_indices(n, k=1)
        return np.stack([i, j], axis=1)
    return _pair_indices(n, max_pairs, np.random.default_rng(seed))


def train_embeddings(
    records: Sequence[EmbeddingRecord],
    config: LossConfig = LossConfig(),
    epochs: int = 200,
    lr: float = 0.5,
    seed: int = 0,
    max_pairs: int = 20000,
) -> TrainingRun:
    """Gradient descent on the stored vectors under the online contrastive loss.

    Vectors are renormalised after every step.  The returned records hold the
    lowest-loss iterate seen, so ``final_loss <= initial_loss`` always; if no
    step improved on the start, the input vectors come back untouched.
    """
    records = list(records)
    if len(records) < 2:
        raise TooFewRecords("training needs at least two records")
    if not lr > 0:
        raise NonPositiveLearningRate(f"learning rate must be positive, got {lr}")
    X0 = np.stack([r.vector for r in records]).astype(np.float64)
    norms = np.linalg.norm(X0, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroNorm("cannot train a zero vector")
    labels = np.array([int(r.label) for r in records])
    pairs = training_pairs(len(records), seed, max_pairs)
    y = (labels[pairs[:, 0]] == labels[pairs[:, 1]]).astype(int)

    X = X0 / norms
    loss, G = _online_objective(X, pairs, y, config.margin)
    initial = best = loss
    best_X, best_epoch = None, 0
    history = [loss]
    for epoch in range(1, epochs + 1):
        if not np.any(G):
            break
        X = X - lr * G
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        loss, G = _online_objective(X, pairs, y, config.margin)
        history.append(loss)
        if loss < best:
            best, best_X, best_epoch = loss, X.copy(), epoch

    out = records if best_X is None else [r.with_vector(v) for r, v in zip(records, best_X)]
    return TrainingRun(records=out, initial_loss=initial, final_loss=best,
                       history=history, best_epoch=best_epoch)
