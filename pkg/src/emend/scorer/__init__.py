from .base import (
    AttentionPayload,
    BackendInfo,
    CandidateScore,
    CapabilityError,
    ContextWindowError,
    MaskResponse,
    ScorerBackend,
    ScorerError,
    ScorerTransportError,
    TokenScore,
    punctuation_window,
    select_mask_model,
)
from .beam import SpanHypothesis, WordDistribution, beam_search, word_distribution
from .metrics import ScorerEval, eval_scorer
from .ngram import NgramScorer
from .remote import RemoteScorer

__all__ = [
    "AttentionPayload",
    "BackendInfo",
    "CandidateScore",
    "CapabilityError",
    "ContextWindowError",
    "MaskResponse",
    "NgramScorer",
    "RemoteScorer",
    "ScorerBackend",
    "ScorerError",
    "ScorerEval",
    "ScorerTransportError",
    "SpanHypothesis",
    "TokenScore",
    "WordDistribution",
    "beam_search",
    "eval_scorer",
    "punctuation_window",
    "select_mask_model",
    "word_distribution",
]
