"""Python bindings for the mtdetect core."""

from ._mtdetect import (
    Corpus,
    DistanceMetric,
    EmbeddingTable,
    Error,
    FeatureLayout,
    FeatureSet,
    IoError,
    LayoutMismatch,
    Model,
    Optimizer,
    ParseError,
    Statistic,
    Tagset,
    compute_eer,
    cross_validate,
    distance,
    extract,
    load_corpus,
    load_embeddings,
    load_feature_set,
    load_model,
    match_paragraph,
    predict,
    rank,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
