import numpy as np
import pytest
from hypothesis import given, strategies as st

from rumorlens.core import EmbeddingRecord, Label, summarize, validate_record
from rumorlens.exceptions import DimensionMismatch, EmptyId, InvalidLabel, NonFiniteComponent


def _rec(dim=768, label=1, rid="a"):
    return EmbeddingRecord(rid, label, np.linspace(-1, 1, dim))


def test_valid_record_passes_through():
    rec = _rec()
    assert validate_record(rec, 768) is rec


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        validate_record(_rec(dim=767), 768)


def test_nan_component():
    vec = np.ones(768)
    vec[100] = np.nan
    with pytest.raises(NonFiniteComponent):
        validate_record(EmbeddingRecord("a", 0, vec), 768)


def test_empty_id():
    with pytest.raises(EmptyId):
        validate_record(_rec(rid=""), 768)


@pytest.mark.parametrize("bad", [3, -1, "maybe", 1.5, True])
def test_invalid_label(bad):
    with pytest.raises(InvalidLabel):
        validate_record(EmbeddingRecord("a", bad, [1.0]), 1)


def test_label_names_and_codes():
    assert Label.coerce("rumor") is Label.RUMOR
    assert Label.coerce("non-rumor") is Label.NON_RUMOR
    assert Label.coerce("2") is Label.DEBUNK
    assert [int(x) for x in Label] == [0, 1, 2]


def test_record_vector_is_read_only():
    rec = _rec(dim=4)
    with pytest.raises(ValueError):
        rec.vector[0] = 5.0


def test_summarize_table_counts():
    labels = [1] * 872 + [0] * 810 + [2] * 993
    recs = [EmbeddingRecord(str(i), lab, [1.0]) for i, lab in enumerate(labels)]
    s = summarize(recs)
    assert s.total == 2675
    assert s.counts == {Label.NON_RUMOR: 810, Label.RUMOR: 872, Label.DEBUNK: 993}


def test_summarize_empty():
    s = summarize([])
    assert s.total == 0
    assert all(v == 0 for v in s.counts.values())


def test_summarize_small():
    recs = [EmbeddingRecord(str(i), lab, [1.0]) for i, lab in enumerate([0, 0, 2])]
    assert summarize(recs).counts == {Label.NON_RUMOR: 2, Label.RUMOR: 0, Label.DEBUNK: 1}


@given(st.lists(st.integers(0, 2), max_size=200))
def test_summarize_total_is_length(labels):
    recs = [EmbeddingRecord(str(i), lab, [1.0]) for i, lab in enumerate(labels)]
    s = summarize(recs)
    assert s.total == len(labels) == sum(s.counts.values())


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=16), st.integers(0, 2))
def test_validate_idempotent(vec, label):
    rec = EmbeddingRecord("x", label, vec)
    once = validate_record(rec, len(vec))
    assert validate_record(once, len(vec)) is once is rec
