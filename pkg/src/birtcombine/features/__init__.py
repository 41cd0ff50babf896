"""Language-independent essay features."""

from __future__ import annotations

from .config import ConnectiveLexicon, FeatureConfig
from .corpus import (
    EssayRecord,
    FeatureMatrix,
    FeatureTable,
    featurize_corpus,
    read_corpus,
    read_feature_csv,
    write_feature_csv,
)
from .extract import FAMILIES, FeatureRegistry, FeatureVector, extract_features, syllables
from .tokenize import TokenizedEssay, tokenize

__all__ = [
    "ConnectiveLexicon", "EssayRecord", "FAMILIES", "FeatureConfig", "FeatureMatrix",
    "FeatureRegistry", "FeatureTable", "FeatureVector", "TokenizedEssay", "extract_features",
    "featurize_corpus", "read_corpus", "read_feature_csv", "syllables", "tokenize",
    "write_feature_csv",
]
