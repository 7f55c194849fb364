"""Shared domain types: the three-way label, embedding records and corpus summaries."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from rumorlens.exceptions import (
    DimensionMismatch,
    EmptyId,
    InvalidLabel,
    NonFiniteComponent,
)


class Label(enum.IntEnum):
    NON_RUMOR = 0
    RUMOR = 1
    DEBUNK = 2

    @classmethod
    def coerce(cls, value) -> "Label":
        """Convert an int-like or name string into a Label, raising InvalidLabel."""
        if isinstance(value, Label):
            return value
        if isinstance(value, str):
            key = value.strip().upper().replace("-", "_")
            if key in cls.__members__:
                return cls[key]
            try:
                value = int(key)
            except ValueError:
                raise InvalidLabel(f"unknown label {value!r}") from None
        if isinstance(value, (bool, np.bool_)):
            raise InvalidLabel(f"label must be 0, 1 or 2, got {value!r}")
        if isinstance(value, (float, np.floating)) and not float(value).is_integer():
            raise InvalidLabel(f"label must be 0, 1 or 2, got {value!r}")
        try:
            return cls(int(value))
        except (TypeError, ValueError):
            raise InvalidLabel(f"label must be 0, 1 or 2, got {value!r}") from None


N_LABELS = len(Label)


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    """One labelled feature vector in a knowledge corpus.

    The vector is copied into a read-only float64 array so records can be
    shared freely between threads.
    """

    id: str
    label: Label
    vector: np.ndarray
    event: Optional[str] = None
    source: Optional[str] = None

    def __post_init__(self):
        vec = np.array(self.vector, dtype=np.float64).reshape(-1)
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)
        if isinstance(self.label, Label):
            return
        try:
            object.__setattr__(self, "label", Label.coerce(self.label))
        except InvalidLabel:
            # keep the raw value; validate_record reports it
            pass

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def with_vector(self, vector) -> "EmbeddingRecord":
        return EmbeddingRecord(self.id, self.label, vector, self.event, self.source)

    def to_dict(self) -> dict:
        out = {"id": self.id, "label": int(self.label), "vector": self.vector.tolist()}
        if self.event is not None:
            out["event"] = self.event
        if self.source is not None:
            out["source"] = self.source
        return out


@dataclass(frozen=True)
class DatasetSummary:
    counts: dict = field(default_factory=lambda: {lab: 0 for lab in Label})
    total: int = 0

    def to_dict(self) -> dict:
        return {
            "counts": {lab.name.lower(): n for lab, n in self.counts.items()},
            "total": self.total,
        }


def validate_record(record: EmbeddingRecord, expected_dim: int) -> EmbeddingRecord:
    """Check a record against the corpus invariants and return it unchanged."""
    if expected_dim <= 0:
        raise ValueError(f"expected_dim must be positive, got {expected_dim}")
    if not isinstance(record.id, str) or not record.id:
        raise EmptyId("record id must be a non-empty string")
    if not isinstance(record.label, Label):
        raise InvalidLabel(f"record {record.id!r}: label must be 0, 1 or 2, got {record.label!r}")
    if record.vector.shape[0] != expected_dim:
        raise DimensionMismatch(
            f"record {record.id!r}: vector has {record.vector.shape[0]} components, "
            f"expected {expected_dim}"
        )
    if not np.all(np.isfinite(record.vector)):
        raise NonFiniteComponent(f"record {record.id!r}: vector has non-finite components")
    return record


def summarize(records: Iterable[EmbeddingRecord]) -> DatasetSummary:
    tally = Counter(Label.coerce(r.label) for r in records)
    counts = {lab: tally.get(lab, 0) for lab in Label}
    return DatasetSummary(counts=counts, total=sum(counts.values()))
