"""Deterministic core of a retrieval-augmented short-video rumour classifier."""

__version__ = "0.1.0"

from rumorlens.core import DatasetSummary, EmbeddingRecord, Label, summarize, validate_record
from rumorlens.hnsw import HnswIndex, HnswParams, HNSWNeighbors, brute_force_knn
from rumorlens.classifier import Prediction, RetrievalVoteClassifier, evaluate_retrieval, predict

__all__ = [
    "DatasetSummary",
    "EmbeddingRecord",
    "HNSWNeighbors",
    "HnswIndex",
    "HnswParams",
    "Label",
    "Prediction",
    "RetrievalVoteClassifier",
    "brute_force_knn",
    "evaluate_retrieval",
    "predict",
    "summarize",
    "validate_record",
]
