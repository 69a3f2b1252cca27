"""Beam search over masked slots, extending token scores to span scores."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from ..textcore import CONTINUATION_PREFIX, NormalizedText
from .base import MaskResponse, ScorerBackend, Span


@dataclass(frozen=True)
class SpanHypothesis:
    tokens: tuple[str, ...]
    logprob: float
    detokenized: str


def _render(tokens: Sequence[str], joiner: str) -> str:
    if joiner == "wordpiece":
        parts: list[str] = []
        for t in tokens:
            if t.startswith(CONTINUATION_PREFIX):
                parts.append(t[len(CONTINUATION_PREFIX):])
            else:
                if parts:
                    parts.append(" ")
                parts.append(t)
        return "".join(parts)
    return " ".join(tokens)


def _splice(text: str, span: Span, fills: dict[int, str], mask_count: int, joiner: str):
    """Rebuild the query text with committed slot fills as literal text.

    Unfilled slots become zero-width insertion spans grouped into runs, so
    backends see exactly the committed prefix as ordinary context.  Returns
    the new text, the run spans, their mask counts, and the slot order the
    per-mask responses will arrive in.
    """
    prefix, suffix = text[: span[0]], text[span[1] :]
    body_parts: list[str] = []
    spans: list[Span] = []
    counts: list[int] = []
    slot_order: list[int] = []
    pos = len(prefix)
    run = 0
    pending: list[int] = []

    def flush_run():
        nonlocal run
        if run:
            spans.append((pos, pos))
            counts.append(run)
            slot_order.extend(pending)
            run = 0
            pending.clear()

    for slot in range(mask_count):
        if slot in fills:
            flush_run()
            rendered = fills[slot]
            if rendered.startswith(CONTINUATION_PREFIX):
                rendered = rendered[len(CONTINUATION_PREFIX):]
            elif body_parts:
                rendered = " " + rendered
            body_parts.append(rendered)
            pos += len(rendered)
        else:
            run += 1
            pending.append(slot)
    flush_run()
    new_text = prefix + "".join(body_parts) + suffix
    return new_text, spans, counts, slot_order


def beam_search(
    backend: ScorerBackend,
    text: str | NormalizedText,
    span: Span,
    mask_count: int,
    beam_width: int,
    top_k: int | None = None,
    fill_order: str = "left-to-right",
) -> list[SpanHypothesis]:
    """Top hypotheses for a masked span of mask_count tokens.

    Fills slots one at a time, re-querying the backend with committed tokens
    substituted in; hypotheses are ranked by summed log-probability.  With a
    width of vocab**mask_count the result equals exhaustive enumeration.
    """
    if mask_count < 1:
        raise ValueError("mask_count must be >= 1")
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if fill_order not in ("left-to-right", "lowest-entropy-first"):
        raise ValueError(f"unknown fill order {fill_order!r}")
    if fill_order == "lowest-entropy-first" and backend.joiner == "wordpiece":
        # Out-of-order commits can land inside a sub-word, which the text
        # protocol cannot express.
        raise ValueError("lowest-entropy-first requires a whitespace-joined backend")
    if isinstance(text, NormalizedText):
        text = text.normalized
    vocab_size = backend.info().vocab_size
    expand = min(beam_width, vocab_size) if top_k is None else top_k

    beams: list[tuple[float, dict[int, str]]] = [(0.0, {})]
    for _ in range(mask_count):
        extended: list[tuple[float, dict[int, str]]] = []
        for logprob, fills in beams:
            new_text, spans, counts, slot_order = _splice(
                text, span, fills, mask_count, backend.joiner
            )
            resp = backend.score(new_text, spans, top_k=expand, mask_counts=counts)
            if fill_order == "left-to-right":
                slot = slot_order[0]
                ranked = resp.per_mask[0]
            else:
                slot_pos, ranked = _lowest_entropy(resp, slot_order)
                slot = slot_pos
            for ts in ranked:
                nf = dict(fills)
                nf[slot] = ts.token
                extended.append((logprob + ts.logprob, nf))
        extended.sort(key=lambda h: (-h[0], tuple(sorted(h[1].items()))))
        seen: set[tuple] = set()
        beams = []
        for h in extended:
            key = tuple(sorted(h[1].items()))
            if key in seen:
                continue
            seen.add(key)
            beams.append(h)
            if len(beams) >= beam_width:
                break
    out = []
    for logprob, fills in beams:
        toks = tuple(fills[i] for i in range(mask_count))
        out.append(
            SpanHypothesis(tokens=toks, logprob=logprob, detokenized=_render(toks, backend.joiner))
        )
    out.sort(key=lambda h: (-h.logprob, h.tokens))
    return out


def _lowest_entropy(resp: MaskResponse, slot_order: Sequence[int]):
    best = None
    for i, ranked in enumerate(resp.per_mask):
        probs = [math.exp(ts.logprob) for ts in ranked]
        tail = math.exp(resp.tail_logmass[i]) if resp.tail_logmass[i] > -math.inf else 0.0
        ent = -sum(p * math.log(p) for p in probs if p > 0)
        if tail > 0:
            ent -= tail * math.log(tail)
        if best is None or ent < best[0]:
            best = (ent, slot_order[i], ranked)
    return best[1], best[2]


@dataclass(frozen=True)
class WordDistribution:
    """Chained candidate probabilities at one word position."""

    word: str
    raw: dict[str, float]
    token_counts: dict[str, int]
    skipped: tuple[str, ...]

    def normalized(self) -> dict[str, float]:
        total = sum(self.raw.values())
        if total <= 0:
            return {w: 0.0 for w in self.raw}
        return {w: p / total for w, p in self.raw.items()}


def word_distribution(
    backend: ScorerBackend,
    sentence: NormalizedText,
    word_index: int,
    candidates: Sequence[str],
) -> WordDistribution:
    """Probability of each candidate word at a position, per the backend.

    Every candidate is masked with its own token count and its per-token
    probabilities are chained; values are raw (unnormalized) chained
    probabilities, with a normalized view over the candidate set available.
    """
    span = sentence.word_spans[word_index]
    word = sentence.word(word_index)
    ordered = sorted(set(candidates))
    resp = backend.score(
        sentence.normalized,
        [(span.start, span.end)],
        top_k=1,
        candidates=ordered,
    )
    raw: dict[str, float] = {}
    counts: dict[str, int] = {}
    skipped: list[str] = []
    for cs in resp.candidates or ():
        counts[cs.text] = cs.token_count
        if cs.token_count == 0 or (
            backend.hard_mask_limit is not None and cs.token_count > backend.hard_mask_limit
        ):
            skipped.append(cs.text)
            continue
        raw[cs.text] = math.exp(cs.logprob) if cs.logprob > -math.inf else 0.0
    if skipped:
        warnings.warn(f"skipped candidates beyond mask limit: {skipped}")
    return WordDistribution(word=word, raw=raw, token_counts=counts, skipped=tuple(skipped))
