"""Corpus ingestion, Greek Unicode normalization, author dictionaries and tokenizers."""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

# Elision marks that attach to the preceding word (δ' is a form of δέ).
ELISION_MARKS = frozenset({"ʼ", "’", "'"})

CONTINUATION_PREFIX = "##"


class IngestionError(ValueError):
    """Raised when corpus bytes cannot be ingested."""

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class NormalizationPolicy:
    """Controls optional views; NFC canonicalization always applies."""

    strip_diacritics: bool = False
    fold_case: bool = False

    def apply(self, s: str) -> str:
        if self.strip_diacritics:
            s = strip_diacritics(s)
        if self.fold_case:
            s = s.casefold()
        return unicodedata.normalize("NFC", s)


#: Comparison view used for scribal distances and dictionary identity.
COMPARISON_POLICY = NormalizationPolicy(strip_diacritics=True, fold_case=True)


@lru_cache(maxsize=65536)
def strip_diacritics(s: str) -> str:
    """Remove combining marks: NFD decompose, drop marks, NFC recompose."""
    decomposed = unicodedata.normalize("NFD", s)
    return unicodedata.normalize(
        "NFC", "".join(c for c in decomposed if not unicodedata.combining(c))
    )


def comparison_form(word: str) -> str:
    return COMPARISON_POLICY.apply(word)


def _is_word_char(c: str) -> bool:
    cat = unicodedata.category(c)
    return cat.startswith("L") or cat.startswith("M") or cat == "Nd"


def _is_punctuation(c: str) -> bool:
    cat = unicodedata.category(c)
    return cat.startswith("P") or cat.startswith("S")


@dataclass(frozen=True)
class WordSpan:
    start: int
    end: int
    word_index: int


@dataclass(frozen=True)
class NormalizedText:
    """NFC-canonical text with word alignment.

    word_spans are non-overlapping, strictly increasing, and cover every
    character that is neither whitespace nor punctuation.  Elision marks
    directly following a letter belong to the preceding word and are not
    treated as punctuation.
    """

    raw: str
    normalized: str
    word_spans: tuple[WordSpan, ...]
    punctuation_mask: tuple[bool, ...]

    def words(self) -> list[str]:
        return [self.normalized[s.start : s.end] for s in self.word_spans]

    def word(self, index: int) -> str:
        span = self.word_spans[index]
        return self.normalized[span.start : span.end]

    def comparison_words(self) -> list[str]:
        return [comparison_form(w) for w in self.words()]

    def word_at_offset(self, offset: int) -> int | None:
        for span in self.word_spans:
            if span.start <= offset < span.end:
                return span.word_index
        return None


def _segment_words(normalized: str) -> tuple[WordSpan, ...]:
    spans: list[WordSpan] = []
    start = None
    i = 0
    n = len(normalized)
    while i < n:
        c = normalized[i]
        if _is_word_char(c):
            if start is None:
                start = i
            i += 1
        elif c in ELISION_MARKS and start is not None:
            # Elision mark closes the word it attaches to.
            spans.append(WordSpan(start, i + 1, len(spans)))
            start = None
            i += 1
        else:
            if start is not None:
                spans.append(WordSpan(start, i, len(spans)))
                start = None
            i += 1
    if start is not None:
        spans.append(WordSpan(start, n, len(spans)))
    return tuple(spans)


def normalize(raw: str | bytes, policy: NormalizationPolicy | None = None) -> NormalizedText:
    """Canonicalize text and segment it into words.

    Accepts bytes for file ingestion; invalid UTF-8 raises IngestionError
    carrying the offending byte offset.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise IngestionError(
                f"invalid UTF-8 at byte {e.start}: {e.reason}", byte_offset=e.start
            ) from e
    policy = policy or NormalizationPolicy()
    normalized = policy.apply(raw)
    spans = _segment_words(normalized)
    in_span = bytearray(len(normalized))
    for s in spans:
        for i in range(s.start, s.end):
            in_span[i] = 1
    mask = tuple(
        _is_punctuation(c) and not in_span[i] for i, c in enumerate(normalized)
    )
    return NormalizedText(
        raw=raw if isinstance(raw, str) else raw.decode("utf-8"),
        normalized=normalized,
        word_spans=spans,
        punctuation_mask=mask,
    )


def count_gap_characters(text: NormalizedText, start: int, end: int) -> int:
    """Letters in normalized[start:end]; punctuation, spaces and marks excluded.

    Reproduces the convention of the worked editorial example: a span holding
    an 8-letter word, a raised dot, a space and a 2-letter word counts 10.
    """
    if start < 0 or end > len(text.normalized) or start > end:
        raise ValueError(f"span [{start}, {end}) out of range for text of length {len(text.normalized)}")
    return sum(
        1 for c in text.normalized[start:end] if unicodedata.category(c).startswith("L")
    )


def count_letters(s: str) -> int:
    """Letters-only length of an arbitrary string, same convention as gaps."""
    return sum(1 for c in s if unicodedata.category(c).startswith("L"))


@dataclass
class AuthorDictionary:
    """Word occurrence counts keyed by comparison form.

    surface_forms maps each key to the counted surface spellings, so that
    candidate words can be rendered back with diacritics when scoring.
    """

    counts: dict[str, int] = field(default_factory=dict)
    surface_forms: dict[str, Counter] = field(default_factory=dict)
    min_count: int = 1

    def total(self) -> int:
        return sum(self.counts.values())

    def contains(self, word: str, min_count: int | None = None) -> bool:
        t = self.min_count if min_count is None else min_count
        return self.counts.get(comparison_form(word), 0) >= t

    def count(self, word: str) -> int:
        return self.counts.get(comparison_form(word), 0)

    def surface(self, word: str) -> str:
        """Most frequent surface spelling for a comparison-form key."""
        forms = self.surface_forms.get(comparison_form(word))
        if not forms:
            return word
        # Deterministic: highest count, then lexicographic.
        return min(forms.items(), key=lambda kv: (-kv[1], kv[0]))[0]

    def words(self, min_count: int | None = None) -> list[str]:
        t = self.min_count if min_count is None else min_count
        return sorted(w for w, c in self.counts.items() if c >= t)


def build_dictionary(
    corpus: Iterable[NormalizedText], min_count: int = 1
) -> AuthorDictionary:
    """Count every word occurrence across the corpus.

    An empty corpus yields an empty dictionary (callers may warn); the sum of
    counts always equals the total number of word spans ingested.
    """
    counts: Counter = Counter()
    surfaces: dict[str, Counter] = {}
    for text in corpus:
        for w in text.words():
            key = comparison_form(w)
            counts[key] += 1
            surfaces.setdefault(key, Counter())[w] += 1
    return AuthorDictionary(counts=dict(counts), surface_forms=surfaces, min_count=min_count)


@dataclass(frozen=True)
class Tokenization:
    """Token sequence aligned to words.

    separators hold the inter-token text (whitespace, punctuation); token i
    corresponds to the slice between separators i and i+1, so the original
    normalized string can be reconstructed exactly.
    """

    tokens: tuple[str, ...]
    token_to_word: tuple[int, ...]
    vocab_id: str
    separators: tuple[str, ...]

    def reconstruct(self) -> str:
        parts = []
        for sep, tok in zip(self.separators, self.tokens):
            parts.append(sep)
            parts.append(tok[len(CONTINUATION_PREFIX):] if tok.startswith(CONTINUATION_PREFIX) else tok)
        parts.append(self.separators[-1])
        return "".join(parts)


def token_offsets(tok: Tokenization) -> list[tuple[int, int]]:
    """Char span of each token's surface within the reconstructed string."""
    offsets = []
    pos = 0
    for sep, t in zip(tok.separators, tok.tokens):
        pos += len(sep)
        surface = t[len(CONTINUATION_PREFIX):] if t.startswith(CONTINUATION_PREFIX) else t
        offsets.append((pos, pos + len(surface)))
        pos += len(surface)
    return offsets


class WordTokenizer:
    """One token per word; punctuation and whitespace live in separators."""

    joiner = "whitespace"

    def __init__(self, vocab_id: str = "words"):
        self.vocab_id = vocab_id

    def tokenize(self, text: NormalizedText | str) -> Tokenization:
        if isinstance(text, str):
            text = normalize(text)
        tokens: list[str] = []
        seps: list[str] = []
        prev_end = 0
        for span in text.word_spans:
            seps.append(text.normalized[prev_end : span.start])
            tokens.append(text.normalized[span.start : span.end])
            prev_end = span.end
        seps.append(text.normalized[prev_end:])
        return Tokenization(
            tokens=tuple(tokens),
            token_to_word=tuple(range(len(tokens))),
            vocab_id=self.vocab_id,
            separators=tuple(seps),
        )

    def detokenize(self, tokens: Sequence[str]) -> str:
        return " ".join(tokens)

    def token_count(self, word: str) -> int:
        return 1


class PieceTokenizer:
    """Greedy longest-match sub-word tokenizer over a fixed piece inventory.

    Continuation pieces are prefixed with '##'.  Every character appearing in
    the input must be coverable, so inventories normally include all single
    letters of the alphabet.
    """

    joiner = "wordpiece"

    def __init__(self, pieces: Iterable[str], vocab_id: str = "pieces"):
        self.pieces = frozenset(pieces)
        self.vocab_id = vocab_id
        self._longest = max((len(p) for p in self.pieces), default=1)

    def _split_word(self, word: str) -> list[str]:
        out: list[str] = []
        i = 0
        while i < len(word):
            for ln in range(min(self._longest, len(word) - i), 0, -1):
                cand = word[i : i + ln]
                if cand in self.pieces:
                    out.append(cand if not out else CONTINUATION_PREFIX + cand)
                    i += ln
                    break
            else:
                raise ValueError(f"cannot tokenize {word!r}: no piece covers {word[i]!r}")
        return out

    def tokenize(self, text: NormalizedText | str) -> Tokenization:
        if isinstance(text, str):
            text = normalize(text)
        tokens: list[str] = []
        word_ids: list[int] = []
        seps: list[str] = []
        prev_end = 0
        for span in text.word_spans:
            pieces = self._split_word(text.normalized[span.start : span.end])
            for j, p in enumerate(pieces):
                seps.append(text.normalized[prev_end : span.start] if j == 0 else "")
                tokens.append(p)
                word_ids.append(span.word_index)
            prev_end = span.end
        seps.append(text.normalized[prev_end:])
        return Tokenization(
            tokens=tuple(tokens),
            token_to_word=tuple(word_ids),
            vocab_id=self.vocab_id,
            separators=tuple(seps),
        )

    def detokenize(self, tokens: Sequence[str]) -> str:
        parts: list[str] = []
        for tok in tokens:
            if tok.startswith(CONTINUATION_PREFIX):
                parts.append(tok[len(CONTINUATION_PREFIX):])
            else:
                if parts:
                    parts.append(" ")
                parts.append(tok)
        return "".join(parts)

    def token_count(self, word: str) -> int:
        return len(self._split_word(comparison_form(word) if word not in self.pieces else word))


@dataclass(frozen=True)
class Document:
    doc_id: str
    author: str
    work: str
    text: NormalizedText


def load_manifest(
    manifest_path: str | Path, policy: NormalizationPolicy | None = None
) -> list[Document]:
    """Read a corpus manifest: one `<relative-path>\\t<author>\\t<work>` per line."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    docs: list[Document] = []
    for lineno, line in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise IngestionError(
                f"{manifest_path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
            )
        rel, author, work = fields
        payload = (base / rel).read_bytes()
        try:
            text = normalize(payload, policy)
        except IngestionError as e:
            raise IngestionError(f"{rel}: {e}", byte_offset=e.byte_offset) from e
        docs.append(Document(doc_id=rel, author=author, work=work, text=text))
    return docs


def write_manifest(
    out_dir: str | Path, documents: Sequence[tuple[str, str, str, str]]
) -> Path:
    """Write documents as (relpath, author, work, text) plus a manifest file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for rel, author, work, content in documents:
        path = out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        lines.append(f"{rel}\t{author}\t{work}")
    manifest = out_dir / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def split_corpus(
    docs: Sequence[Document], test_fraction: float = 0.1, seed: int = 0
) -> tuple[list[Document], list[Document]]:
    """Deterministic by-document train/test split via a seeded shuffle."""
    import numpy as np

    order = np.random.default_rng(seed).permutation(len(docs))
    n_test = int(round(len(docs) * test_fraction))
    test_idx = set(order[:n_test].tolist())
    train = [d for i, d in enumerate(docs) if i not in test_idx]
    test = [d for i, d in enumerate(docs) if i in test_idx]
    return train, test
