"""Offline reference scorer: interpolated bidirectional word n-gram."""

from __future__ import annotations

import hashlib
import math
import warnings
from typing import Iterable, Sequence

import numpy as np

from ..textcore import (
    Document,
    NormalizedText,
    WordTokenizer,
    normalize,
    token_offsets,
)
from .base import (
    BackendInfo,
    CandidateScore,
    ContextWindowError,
    MaskResponse,
    ScorerBackend,
    Span,
    TokenScore,
    select_mask_model,
)

BOS = "\x02"
EOS = "\x03"
_MASK = None  # masked slot marker in query token lists

_LOG_FLOOR = -745.0  # below exp() underflow


def _freeze(counter: dict) -> tuple[np.ndarray, np.ndarray, float]:
    ids = np.fromiter(counter.keys(), dtype=np.int64, count=len(counter))
    vals = np.fromiter(counter.values(), dtype=np.float64, count=len(counter))
    return ids, vals, float(vals.sum())


class NgramScorer(ScorerBackend):
    """Bidirectional add-lambda n-gram over the tokenizer's vocabulary.

    The conditional at a slot averages the smoothed unigram, bigram and
    trigram estimates available on each side; masked neighbours drop the
    affected orders, and punctuation (or a document edge) truncates context
    to boundary sentinels, so every distribution sums to one by construction.
    """

    def __init__(self, tokenizer=None, smoothing: float = 0.01, context_limit: int = 512):
        self.tokenizer = tokenizer or WordTokenizer()
        self.smoothing = smoothing
        self.context_limit = context_limit
        self.mask_models = (1, 2, 3, 4, 5)
        self.joiner = self.tokenizer.joiner
        self.vocab: list[str] = []
        self.token_id: dict[str, int] = {}
        self._unigram: np.ndarray | None = None
        self._tables: dict[str, dict] = {"l1": {}, "l2": {}, "r1": {}, "r2": {}}
        self._cache: dict[str, tuple] = {}
        self.model_id = "ngram-untrained"

    # ------------------------------------------------------------- training

    @classmethod
    def train(
        cls,
        corpus: Iterable[NormalizedText | Document | str],
        tokenizer=None,
        smoothing: float = 0.01,
        context_limit: int = 512,
    ) -> "NgramScorer":
        self = cls(tokenizer=tokenizer, smoothing=smoothing, context_limit=context_limit)
        segments: list[list[str]] = []
        vocab: set[str] = set()
        for doc in corpus:
            text = doc.text if isinstance(doc, Document) else doc
            for seg in self._segments(self._prepare_text(text)):
                segments.append(seg)
                vocab.update(seg)
        self.vocab = sorted(vocab)
        self.token_id = {t: i for i, t in enumerate(self.vocab)}
        v = len(self.vocab)
        unigram = np.zeros(v)
        raw: dict[str, dict] = {"l1": {}, "l2": {}, "r1": {}, "r2": {}}
        for seg in segments:
            ids = [self.token_id[t] for t in seg]
            n = len(seg)
            for i in range(n):
                tid = ids[i]
                unigram[tid] += 1
                l1 = seg[i - 1] if i >= 1 else BOS
                l2 = seg[i - 2] if i >= 2 else BOS
                r1 = seg[i + 1] if i + 1 < n else EOS
                r2 = seg[i + 2] if i + 2 < n else EOS
                for table, key in (
                    ("l1", l1),
                    ("l2", (l2, l1)),
                    ("r1", r1),
                    ("r2", (r1, r2)),
                ):
                    slot = raw[table].setdefault(key, {})
                    slot[tid] = slot.get(tid, 0) + 1
        for table, entries in raw.items():
            self._tables[table] = {k: _freeze(c) for k, c in entries.items()}
        self._unigram_counts = unigram
        lam = self.smoothing
        self._unigram = (unigram + lam) / (unigram.sum() + lam * v)
        digest = hashlib.sha256()
        digest.update("\x00".join(self.vocab).encode("utf-8"))
        digest.update(unigram.tobytes())
        self.model_id = f"ngram-o3-{smoothing}-{digest.hexdigest()[:12]}"
        return self

    def _prepare_text(self, text: NormalizedText | str) -> NormalizedText:
        return normalize(text) if isinstance(text, str) else text

    def _segments(self, text: NormalizedText) -> list[list[str]]:
        tok = self.tokenizer.tokenize(text)
        segs: list[list[str]] = []
        cur: list[str] = []
        for i, t in enumerate(tok.tokens):
            if i > 0 and self._sep_breaks(tok.separators[i]):
                if cur:
                    segs.append(cur)
                cur = []
            cur.append(t)
        if cur:
            segs.append(cur)
        return segs

    @staticmethod
    def _sep_breaks(sep: str) -> bool:
        import unicodedata

        return any(unicodedata.category(c).startswith(("P", "S")) for c in sep)

    # -------------------------------------------------------------- scoring

    def info(self) -> BackendInfo:
        return BackendInfo(
            model_id=self.model_id,
            vocab_size=len(self.vocab),
            context_limit=self.context_limit,
            mask_models=self.mask_models,
            joiner=self.joiner,
        )

    def vocabulary(self) -> list[str]:
        return list(self.vocab)

    def _tokenize_cached(self, text: str):
        hit = self._cache.get(text)
        if hit is not None:
            return hit
        nt = normalize(text)
        tok = self.tokenizer.tokenize(nt)
        offsets = token_offsets(tok)
        breaks = [False] * (len(tok.tokens) + 1)
        breaks[0] = breaks[-1] = True
        for i in range(1, len(tok.tokens)):
            breaks[i] = self._sep_breaks(tok.separators[i])
        entry = (tok, offsets, breaks)
        if len(self._cache) >= 16:
            self._cache.pop(next(iter(self._cache)))
        self._cache[text] = entry
        return entry

    def _build_query(
        self, text: str, mask_spans: Sequence[Span], mask_counts: Sequence[int] | None
    ) -> tuple[list, list[bool], list[list[int]]]:
        """Token list with masked slots, break flags, and slot indices per span."""
        tok, offsets, breaks = self._tokenize_cached(text)
        spans = sorted(range(len(mask_spans)), key=lambda i: mask_spans[i])
        covered: list[tuple[int, int, int]] = []  # (tok_start, tok_end, span_idx)
        for si in spans:
            s, e = mask_spans[si]
            if s > e or s < 0 or e > len(text):
                raise ValueError(f"mask span ({s}, {e}) out of range")
            if e > s:
                hit = [i for i, (ts, te) in enumerate(offsets) if ts < e and te > s]
                if not hit:
                    raise ValueError(f"mask span ({s}, {e}) covers no token")
                covered.append((hit[0], hit[-1] + 1, si))
            else:
                boundary = sum(1 for ts, te in offsets if te <= s)
                if boundary < len(offsets) and offsets[boundary][0] < s:
                    raise ValueError(f"insertion point {s} falls inside a token")
                covered.append((boundary, boundary, si))
        for (a0, a1, _), (b0, b1, _) in zip(covered, covered[1:]):
            if b0 < a1:
                raise ValueError("mask spans overlap")
        counts = {}
        for pos, si in enumerate(spans):
            t0, t1, _ = covered[pos]
            if mask_counts is not None:
                counts[si] = mask_counts[si]
            else:
                if t1 == t0:
                    raise ValueError("zero-width mask span requires an explicit mask count")
                counts[si] = t1 - t0
            if counts[si] < 1:
                raise ValueError("mask count must be >= 1")
        out_tokens: list = []
        out_breaks: list[bool] = [False]
        slot_map: dict[int, list[int]] = {si: [] for si in range(len(mask_spans))}
        cursor = 0
        for t0, t1, si in covered:
            for i in range(cursor, t0):
                out_tokens.append(tok.tokens[i])
                out_breaks.append(breaks[i + 1])
            for _ in range(counts[si]):
                slot_map[si].append(len(out_tokens))
                out_tokens.append(_MASK)
                out_breaks.append(False)
            if t1 > t0:
                out_breaks[-1] = breaks[t1]
            cursor = t1
        for i in range(cursor, len(tok.tokens)):
            out_tokens.append(tok.tokens[i])
            out_breaks.append(breaks[i + 1])
        out_breaks[0] = True
        out_breaks[-1] = True
        if len(out_tokens) > self.context_limit:
            raise ContextWindowError(
                f"query of {len(out_tokens)} tokens exceeds context limit {self.context_limit}"
            )
        return out_tokens, out_breaks, [slot_map[i] for i in range(len(mask_spans))]

    def _neighbor(self, toks: list, brk: list[bool], pos: int, step: int, dist: int):
        """Token string, boundary sentinel, or None when a mask intervenes."""
        j = pos
        for _ in range(dist):
            if step < 0:
                if brk[j]:
                    return BOS
                j -= 1
            else:
                if brk[j + 1]:
                    return EOS
                j += 1
        t = toks[j]
        return None if t is _MASK else t

    def _smoothed(self, table: str, key) -> np.ndarray:
        v = len(self.vocab)
        lam = self.smoothing
        entry = self._tables[table].get(key)
        if entry is None:
            return np.full(v, 1.0 / v)
        ids, vals, tot = entry
        arr = np.full(v, lam / (tot + lam * v))
        arr[ids] += vals / (tot + lam * v)
        return arr

    def _slot_distribution(self, toks: list, brk: list[bool], pos: int) -> np.ndarray:
        comps = [self._unigram]
        l1 = self._neighbor(toks, brk, pos, -1, 1)
        if l1 is not None:
            comps.append(self._smoothed("l1", l1))
            l2 = self._neighbor(toks, brk, pos, -1, 2)
            if l2 is not None:
                comps.append(self._smoothed("l2", (l2, l1)))
        r1 = self._neighbor(toks, brk, pos, +1, 1)
        if r1 is not None:
            comps.append(self._smoothed("r1", r1))
            r2 = self._neighbor(toks, brk, pos, +1, 2)
            if r2 is not None:
                comps.append(self._smoothed("r2", (r1, r2)))
        return sum(comps) / len(comps)

    def score(
        self,
        text: str,
        mask_spans: Sequence[Span],
        top_k: int = 10,
        mask_counts: Sequence[int] | None = None,
        candidates: Sequence[str] | None = None,
    ) -> MaskResponse:
        if self._unigram is None:
            raise RuntimeError("scorer is untrained")
        if not mask_spans:
            raise ValueError("at least one mask span required")
        toks, brk, slots = self._build_query(text, mask_spans, mask_counts)
        per_mask: list[tuple[TokenScore, ...]] = []
        tails: list[float] = []
        total_masks = 0
        for span_slots in slots:
            total_masks = max(total_masks, len(span_slots))
            for pos in span_slots:
                dist = self._slot_distribution(toks, brk, pos)
                k = min(top_k, len(dist))
                order = np.argsort(-dist, kind="stable")[:k]
                ranked = tuple(
                    TokenScore(self.vocab[i], float(np.log(dist[i]))) for i in order
                )
                per_mask.append(ranked)
                covered = float(dist[order].sum())
                tails.append(math.log(1.0 - covered) if covered < 1.0 - 1e-12 else -math.inf)
        cand_scores = None
        if candidates is not None:
            if len(mask_spans) != 1:
                raise ValueError("candidate scoring requires exactly one mask span")
            cand_scores = tuple(
                self._score_candidate(text, mask_spans[0], c) for c in candidates
            )
        return MaskResponse(
            per_mask=tuple(per_mask),
            tail_logmass=tuple(tails),
            model_id=self.model_id,
            consecutive_mask_model=select_mask_model(max(total_masks, 1), self.mask_models),
            candidates=cand_scores,
        )

    def _score_candidate(self, text: str, span: Span, candidate: str) -> CandidateScore:
        """Chained probability of a candidate filling the mask span."""
        pieces = tuple(self.tokenizer.tokenize(candidate).tokens)
        if not pieces:
            return CandidateScore(text=candidate, logprob=-math.inf, token_count=0)
        m = len(pieces)
        if self.hard_mask_limit is not None and m > self.hard_mask_limit:
            warnings.warn(f"candidate {candidate!r} needs {m} masks; limit {self.hard_mask_limit}")
            return CandidateScore(text=candidate, logprob=-math.inf, token_count=m)
        toks, brk, slots = self._build_query(text, [span], [m])
        positions = slots[0]
        logprob = 0.0
        for j, pos in enumerate(positions):
            tid = self.token_id.get(pieces[j])
            if tid is None:
                logprob = -math.inf
                break
            dist = self._slot_distribution(toks, brk, pos)
            logprob += float(np.log(dist[tid]))
            toks[pos] = pieces[j]
        return CandidateScore(
            text=candidate, logprob=max(logprob, _LOG_FLOOR) if logprob > -math.inf else -math.inf,
            token_count=m,
        )
