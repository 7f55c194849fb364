"""Vector arithmetic shared by the loss, the index and the classifier.

Also holds the fusion-input bookkeeping: pooling a frame-feature matrix down to
``m`` video tokens, zero-padding it to the text embedding width, and splitting
the transformer's position budget between CLS/SEP, video and text tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from rumorlens.exceptions import (
    BudgetOverflow,
    DimensionMismatch,
    EmptyMatrix,
    NonFiniteComponent,
    ParseError,
    TargetTooSmall,
    TooManyTokens,
    ZeroNorm,
)


def _as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return arr


def cosine_similarity(a, b) -> float:
    a = _as_vector(a)
    b = _as_vector(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroNorm("cosine similarity is undefined for a zero vector")
    s = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, s))


def cosine_distance(a, b) -> float:
    return 1.0 - cosine_similarity(a, b)


def normalize(v) -> np.ndarray:
    v = _as_vector(v)
    n = np.linalg.norm(v)
    if n == 0 or not np.isfinite(n):
        raise ZeroNorm("cannot normalize a zero or non-finite vector")
    return v / n


def normalize_rows(X) -> np.ndarray:
    """Row-wise :func:`normalize` for a 2-D array."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ZeroNorm(f"row {int(np.argmax(norms == 0))} has zero norm")
    return X / norms[:, None]


def segment_bounds(n: int, m: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into ``m`` contiguous near-equal runs, longer runs first."""
    if m < 1:
        raise ValueError("m must be positive")
    if m > n:
        raise TooManyTokens(f"cannot pool {n} frames into {m} tokens")
    base, extra = divmod(n, m)
    bounds = []
    start = 0
    for i in range(m):
        size = base + (1 if i < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def _check_matrix(features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise EmptyMatrix(f"expected a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteComponent("feature matrix has non-finite entries")
    return X


def segment_pool(features, m: int) -> np.ndarray:
    """Average-pool ``N`` frame rows into ``m`` token rows.

    >>> segment_pool(np.arange(10.0).reshape(5, 2), 2)
    array([[2., 3.],
           [7., 8.]])
    """
    X = _check_matrix(features)
    bounds = segment_bounds(X.shape[0], m)
    return np.stack([X[s:e].mean(axis=0) for s, e in bounds])


def pad_width(matrix, target: int) -> np.ndarray:
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise EmptyMatrix(f"expected a 2-D matrix, got shape {X.shape}")
    d = X.shape[1]
    if target < d:
        raise TargetTooSmall(f"target width {target} is smaller than {d}")
    out = np.zeros((X.shape[0], target), dtype=np.float64)
    out[:, :d] = X
    return out


@dataclass(frozen=True)
class TokenBudget:
    total: int
    video_tokens: int
    text_tokens: int
    cls: int = 1
    sep: int = 1


def make_budget(total: int = 512, m: int = 25) -> TokenBudget:
    """Split ``total`` positions into CLS + SEP + ``m`` video + the remaining text."""
    if total < 1 or m < 1:
        raise BudgetOverflow(f"total and m must be positive (total={total}, m={m})")
    if m > total - 2:
        raise BudgetOverflow(f"{m} video tokens do not fit in {total} positions with CLS and SEP")
    return TokenBudget(total=total, video_tokens=m, text_tokens=total - 2 - m)


class SegmentPooler(TransformerMixin, BaseEstimator):
    """Pool a frame-feature matrix to ``n_tokens`` rows and pad to ``width`` columns.

    ``transform`` takes a single ``(n_frames, n_features)`` matrix; there is
    nothing to learn, so ``fit`` only records the input width.
    """

    def __init__(self, n_tokens=25, width=None):
        self.n_tokens = n_tokens
        self.width = width

    def fit(self, X, y=None):
        self.n_features_in_ = _check_matrix(X).shape[1]
        return self

    def transform(self, X):
        pooled = segment_pool(X, self.n_tokens)
        if self.width is not None:
            pooled = pad_width(pooled, self.width)
        return pooled


def load_feature_matrix(path) -> np.ndarray:
    """Read ``{"rows","cols","data"}`` JSON or a whitespace-delimited text matrix."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
            rows, cols = int(obj["rows"]), int(obj["cols"])
            data = np.asarray(obj["data"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad feature matrix JSON: {exc}", path=path) from None
        if data.size != rows * cols:
            raise ParseError(f"data has {data.size} values, expected {rows}x{cols}", path=path)
        return _check_matrix(data.reshape(rows, cols))
    try:
        data = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None
    return _check_matrix(data)
