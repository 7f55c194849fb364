import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rumorlens.embedding import (
    SegmentPooler,
    cosine_distance,
    cosine_similarity,
    load_feature_matrix,
    make_budget,
    normalize,
    pad_width,
    segment_pool,
)
from rumorlens.exceptions import (
    BudgetOverflow,
    DimensionMismatch,
    TargetTooSmall,
    TooManyTokens,
    ZeroNorm,
)

vec = arrays(np.float64, 6, elements=st.floats(-100, 100)).filter(lambda v: np.linalg.norm(v) > 1e-3)


class TestCosine:
    def test_examples(self):
        assert cosine_similarity([3, 4], [3, 4]) == pytest.approx(1.0)
        assert cosine_similarity([1, 0], [0, 1]) == 0.0
        assert cosine_similarity([1, 0], [1, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_distance(self):
        assert cosine_distance([2, 1], [2, 1]) == pytest.approx(0.0, abs=1e-15)
        assert cosine_distance([1, 0], [0, 5]) == 1.0
        assert cosine_distance([1, 2, 3], [-1, -2, -3]) == pytest.approx(2.0)

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity([1, 2], [1, 2, 3])
        with pytest.raises(ZeroNorm):
            cosine_similarity([0, 0], [1, 2])

    @given(vec, vec, st.floats(0.01, 100), st.floats(0.01, 100))
    def test_symmetric_and_scale_invariant(self, a, b, alpha, beta):
        s = cosine_similarity(a, b)
        assert -1.0 <= s <= 1.0
        assert s == pytest.approx(cosine_similarity(b, a), abs=1e-12)
        assert cosine_similarity(alpha * a, beta * b) == pytest.approx(s, abs=1e-9)


def test_normalize():
    np.testing.assert_allclose(normalize([3, 4]), [0.6, 0.8])
    np.testing.assert_array_equal(normalize([0.0, 1.0]), [0.0, 1.0])
    with pytest.raises(ZeroNorm):
        normalize([0, 0])


@given(vec)
def test_normalize_unit(v):
    assert abs(np.linalg.norm(normalize(v)) - 1) < 1e-12


class TestPooling:
    def test_default_shape(self):
        X = np.random.default_rng(0).normal(size=(100, 400))
        out = segment_pool(X, 25)
        assert out.shape == (25, 400)
        np.testing.assert_allclose(out[3], X[12:16].mean(axis=0))

    def test_identity_when_m_equals_n(self):
        X = np.random.default_rng(1).normal(size=(7, 3))
        np.testing.assert_allclose(segment_pool(X, 7), X)

    def test_uneven_split(self):
        X = np.arange(10.0).reshape(5, 2)
        out = segment_pool(X, 2)
        np.testing.assert_allclose(out, [X[0:3].mean(axis=0), X[3:5].mean(axis=0)])

    def test_too_many_tokens(self):
        with pytest.raises(TooManyTokens):
            segment_pool(np.ones((3, 2)), 4)

    @given(st.integers(1, 40), st.data())
    def test_weighted_mean_preserved(self, n, data):
        m = data.draw(st.integers(1, n))
        X = np.random.default_rng(n * 41 + m).normal(size=(n, 3))
        sizes = [n // m + (1 if i < n % m else 0) for i in range(m)]
        pooled = segment_pool(X, m)
        weighted = (pooled * np.array(sizes)[:, None]).sum(axis=0) / n
        np.testing.assert_allclose(weighted, X.mean(axis=0), atol=1e-9)
        assert sizes == sorted(sizes, reverse=True)


class TestPadding:
    def test_pad_400_to_768(self):
        X = np.random.default_rng(2).normal(size=(25, 400))
        out = pad_width(X, 768)
        assert out.shape == (25, 768)
        assert not out[:, 400:].any()
        np.testing.assert_array_equal(out[:, :400], X)
        np.testing.assert_allclose(out.sum(axis=1), X.sum(axis=1))

    def test_identity(self):
        X = np.ones((2, 3))
        np.testing.assert_array_equal(pad_width(X, 3), X)

    def test_too_small(self):
        with pytest.raises(TargetTooSmall):
            pad_width(np.ones((2, 3)), 2)


class TestBudget:
    def test_default_split(self):
        b = make_budget(512, 25)
        assert b.text_tokens == 485
        assert b.cls + b.sep + b.video_tokens + b.text_tokens == 512

    def test_boundary(self):
        assert make_budget(512, 510).text_tokens == 0

    def test_overflow(self):
        with pytest.raises(BudgetOverflow):
            make_budget(512, 511)


def test_segment_pooler_estimator():
    X = np.random.default_rng(4).normal(size=(100, 400))
    pooler = SegmentPooler(n_tokens=25, width=768)
    out = pooler.fit_transform(X)
    assert out.shape == (25, 768)
    assert pooler.get_params() == {"n_tokens": 25, "width": 768}


def test_load_feature_matrix(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"rows": 2, "cols": 3, "data": [1, 2, 3, 4, 5, 6]}))
    np.testing.assert_array_equal(load_feature_matrix(p), [[1, 2, 3], [4, 5, 6]])
    t = tmp_path / "m.txt"
    t.write_text("1 2\n3 4\n")
    np.testing.assert_array_equal(load_feature_matrix(t), [[1, 2], [3, 4]])
