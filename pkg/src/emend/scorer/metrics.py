"""Scorer quality metrics: masked single-token accuracy and pseudo-perplexity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..textcore import Document, NormalizedText, normalize, token_offsets
from .base import CapabilityError, ScorerBackend


@dataclass(frozen=True)
class ScorerEval:
    top1_accuracy: float
    top5_accuracy: float
    pseudo_perplexity: float
    token_count: int


def eval_scorer(
    backend: ScorerBackend,
    test_corpus: Iterable[NormalizedText | Document | str],
    max_tokens: int | None = None,
) -> ScorerEval:
    """Mask each token in turn and measure prediction quality.

    Pseudo-perplexity is exp(-mean log p(token | context)).  Requires a
    backend with a local tokenizer; remote models report their own metrics.
    """
    tokenizer = getattr(backend, "tokenizer", None)
    if tokenizer is None:
        raise CapabilityError("eval_scorer needs a backend with a local tokenizer")
    vocab_size = backend.info().vocab_size
    hits1 = hits5 = n = 0
    nll = 0.0
    for doc in test_corpus:
        text = doc.text if isinstance(doc, Document) else doc
        if isinstance(text, str):
            text = normalize(text)
        tok = tokenizer.tokenize(text)
        offsets = token_offsets(tok)
        for i, truth in enumerate(tok.tokens):
            if max_tokens is not None and n >= max_tokens:
                break
            resp = backend.score(
                text.normalized, [offsets[i]], top_k=vocab_size, mask_counts=[1]
            )
            ranked = resp.per_mask[0]
            if ranked[0].token == truth:
                hits1 += 1
            if any(ts.token == truth for ts in ranked[:5]):
                hits5 += 1
            truth_lp = next((ts.logprob for ts in ranked if ts.token == truth), None)
            if truth_lp is None:
                raise ValueError(f"true token {truth!r} missing from full-vocabulary response")
            nll -= truth_lp
            n += 1
        if max_tokens is not None and n >= max_tokens:
            break
    if n == 0:
        raise ValueError("empty test corpus")
    import math

    return ScorerEval(
        top1_accuracy=hits1 / n,
        top5_accuracy=hits5 / n,
        pseudo_perplexity=math.exp(nll / n),
        token_count=n,
    )
