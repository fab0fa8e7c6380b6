"""Distribution-aware polymer representations.

A polymer sample is described by its molar-mass distribution, sampled into
a weighted ensemble of discrete chains, and embedded as the weighted sum of
per-chain feature vectors.
"""
from .dataset import DatasetConfig, PolymerRecord, generate_corpus, read_corpus, split_records, write_records
from .encode import EncoderConfig, Embedding, baseline_embed, polyset_embed
from .ensemble import PolySetEnsemble, empirical_moments, sample
from .errors import (CapabilityError, CorpusError, DomainError, FitError, NumericError, PolySetError, ShapeError,
                     TrainingError, VocabularyError)
from .mwd import Family, MomentSet, MwdSpec, analytic_moments, fit_mwd

__version__ = "0.1.0"

__all__ = [
    "DatasetConfig", "PolymerRecord", "generate_corpus", "read_corpus", "split_records", "write_records",
    "EncoderConfig", "Embedding", "baseline_embed", "polyset_embed",
    "PolySetEnsemble", "empirical_moments", "sample",
    "CapabilityError", "CorpusError", "DomainError", "FitError", "NumericError", "PolySetError", "ShapeError",
    "TrainingError", "VocabularyError",
    "Family", "MomentSet", "MwdSpec", "analytic_moments", "fit_mwd",
]
