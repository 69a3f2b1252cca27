"""Backend contract for masked scoring: types, errors, windowing."""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..textcore import NormalizedText, normalize

Span = tuple[int, int]


class ScorerError(Exception):
    pass


class ScorerTransportError(ScorerError):
    """Remote backend unreachable or protocol-level failure."""


class ContextWindowError(ScorerError):
    """Query exceeds the backend context limit; the caller must window."""


class CapabilityError(ScorerError):
    """Backend does not support the requested operation (e.g. attention)."""


@dataclass(frozen=True)
class TokenScore:
    token: str
    logprob: float


@dataclass(frozen=True)
class CandidateScore:
    text: str
    logprob: float
    token_count: int


@dataclass(frozen=True)
class MaskResponse:
    """Ranked per-mask token distributions plus optional candidate chains.

    per_mask holds one descending-sorted list per mask token, left to right
    across all requested spans.  tail_logmass is the log of the probability
    mass not covered by the returned top-k (-inf when exhaustive).
    """

    per_mask: tuple[tuple[TokenScore, ...], ...]
    tail_logmass: tuple[float, ...]
    model_id: str
    consecutive_mask_model: int
    candidates: tuple[CandidateScore, ...] | None = None

    def candidate_logprob(self, text: str) -> float:
        for c in self.candidates or ():
            if c.text == text:
                return c.logprob
        raise KeyError(text)


@dataclass(frozen=True)
class BackendInfo:
    model_id: str
    vocab_size: int
    context_limit: int
    mask_models: tuple[int, ...]
    joiner: str = "whitespace"
    attention_layers: int = 0
    attention_heads_per_layer: int = 0

    @property
    def total_attention_heads(self) -> int:
        return self.attention_layers * self.attention_heads_per_layer


@dataclass(frozen=True)
class AttentionPayload:
    """Raw head weights (layers, heads, tokens, tokens) with tokenization."""

    weights: np.ndarray
    tokens: tuple[str, ...]
    offsets: tuple[Span, ...]


def select_mask_model(count: int, available: Sequence[int]) -> int:
    """Pick the consecutive-mask model for a mask count.

    Exact match wins; otherwise the largest available count below, so runs
    of five or more masked tokens route to the 5-mask model when present.
    """
    if count < 1:
        raise ValueError("mask count must be >= 1")
    opts = sorted(available)
    if not opts:
        return 1
    below = [m for m in opts if m <= count]
    return below[-1] if below else opts[0]


class ScorerBackend(abc.ABC):
    """A conditional token distribution queried over text with masked spans."""

    model_id: str = "backend"
    context_limit: int = 512
    mask_models: tuple[int, ...] = (1,)
    joiner: str = "whitespace"
    hard_mask_limit: int | None = None

    @abc.abstractmethod
    def info(self) -> BackendInfo:
        ...

    @abc.abstractmethod
    def score(
        self,
        text: str,
        mask_spans: Sequence[Span],
        top_k: int = 10,
        mask_counts: Sequence[int] | None = None,
        candidates: Sequence[str] | None = None,
    ) -> MaskResponse:
        """Distribution over tokens for each masked slot.

        Each span is replaced by mask_counts[i] mask tokens (defaulting to the
        tokens currently occupying it); zero-width spans are insertion points
        and require an explicit count.  Named candidates are teacher-forced
        with their own token counts and returned with chained log-probability.
        """

    def attention(self, text: str) -> AttentionPayload:
        raise CapabilityError(f"{self.model_id} does not expose attention weights")


def check_probabilities(per_mask: Sequence[Sequence[TokenScore]], tol: float = 1e-6) -> None:
    """Contract check: each returned list is sorted and never exceeds unit mass."""
    for ranked in per_mask:
        probs = [math.exp(ts.logprob) for ts in ranked]
        if any(b.logprob - a.logprob > 1e-12 for a, b in zip(ranked, ranked[1:])):
            raise ScorerError("per-mask list not sorted by descending log-probability")
        if sum(probs) > 1.0 + tol:
            raise ScorerError("per-mask probabilities exceed 1")


def punctuation_window(
    text: NormalizedText | str, span: Span, max_words: int
) -> tuple[str, Span, int]:
    """Clip a document to at most max_words words centered on a span.

    Edges prefer punctuation boundaries within the outer quarter of the
    window, so queries carry maximal punctuation-separated context.  Returns
    the window text, the translated span, and the window's char offset.
    """
    if isinstance(text, str):
        text = normalize(text)
    spans = text.word_spans
    if len(spans) <= max_words:
        return text.normalized, span, 0
    touching = [w.word_index for w in spans if w.end > span[0] and w.start < span[1]]
    if touching:
        center_lo, center_hi = touching[0], touching[-1]
    else:
        center_lo = center_hi = min(
            range(len(spans)), key=lambda i: abs(spans[i].start - span[0])
        )
    lo, hi = center_lo, center_hi + 1
    while hi - lo < max_words and (lo > 0 or hi < len(spans)):
        if lo > 0:
            lo -= 1
        if hi - lo < max_words and hi < len(spans):
            hi += 1

    def has_punct(a: int, b: int) -> bool:
        return any(text.punctuation_mask[i] for i in range(a, b))

    quarter = max(1, (hi - lo) // 4)
    for i in range(lo, min(lo + quarter, center_lo)):
        if has_punct(spans[i].end, spans[i + 1].start):
            lo = i + 1
            break
    for i in range(hi - 1, max(hi - 1 - quarter, center_hi), -1):
        if has_punct(spans[i - 1].end, spans[i].start):
            hi = i
            break
    start = spans[lo].start
    end = spans[hi - 1].end
    window = text.normalized[start:end]
    return window, (span[0] - start, span[1] - start), start
