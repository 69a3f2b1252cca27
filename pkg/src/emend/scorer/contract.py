"""Protocol conformance checks runnable against any scorer backend."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .base import CapabilityError, ScorerBackend, Span, select_mask_model


@dataclass
class ContractResult:
    name: str
    ok: bool
    detail: str = ""


def run_contract_suite(
    backend: ScorerBackend,
    probe_text: str,
    probe_span: Span,
    candidates: Sequence[str],
    full_vocab_limit: int = 5000,
) -> list[ContractResult]:
    """Exercise the scoring contract on a probe query; returns per-check results."""
    results: list[ContractResult] = []

    def check(name: str, fn: Callable[[], str | None]) -> None:
        try:
            detail = fn() or ""
            results.append(ContractResult(name, True, detail))
        except AssertionError as e:
            results.append(ContractResult(name, False, str(e)))
        except Exception as e:  # noqa: BLE001 - report, do not mask, backend faults
            results.append(ContractResult(name, False, f"{type(e).__name__}: {e}"))

    info = backend.info()

    def info_shape():
        assert info.vocab_size > 0, "vocab_size must be positive"
        assert info.context_limit > 0, "context_limit must be positive"
        assert len(info.mask_models) >= 1, "mask_models must be non-empty"
        assert info.model_id, "model_id must be non-empty"

    check("info_shape", info_shape)

    def ranked_sorted():
        resp = backend.score(probe_text, [probe_span], top_k=3)
        assert len(resp.per_mask) >= 1
        for ranked in resp.per_mask:
            assert len(ranked) <= 3
            lps = [ts.logprob for ts in ranked]
            assert lps == sorted(lps, reverse=True), "not sorted by descending logprob"

    check("ranked_sorted", ranked_sorted)

    def logprobs_valid():
        resp = backend.score(probe_text, [probe_span], top_k=5)
        for ranked in resp.per_mask:
            for ts in ranked:
                assert math.isfinite(ts.logprob), f"non-finite logprob for {ts.token!r}"
                assert ts.logprob <= 1e-9, f"positive logprob for {ts.token!r}"

    check("logprobs_valid", logprobs_valid)

    def normalization():
        if info.vocab_size > full_vocab_limit:
            return "skipped: vocabulary too large for exhaustive check"
        resp = backend.score(probe_text, [probe_span], top_k=info.vocab_size)
        for ranked in resp.per_mask:
            total = sum(math.exp(ts.logprob) for ts in ranked)
            assert abs(total - 1.0) <= 1e-6, f"probabilities sum to {total}"
        return None

    check("full_vocab_normalization", normalization)

    def tail_mass():
        resp = backend.score(probe_text, [probe_span], top_k=3)
        for ranked, tail in zip(resp.per_mask, resp.tail_logmass):
            covered = sum(math.exp(ts.logprob) for ts in ranked)
            tail_p = math.exp(tail) if tail > -math.inf else 0.0
            assert covered + tail_p <= 1.0 + 1e-6, "top-k plus tail exceeds 1"

    check("tail_mass_consistent", tail_mass)

    def deterministic():
        a = backend.score(probe_text, [probe_span], top_k=5)
        b = backend.score(probe_text, [probe_span], top_k=5)
        assert a.per_mask == b.per_mask, "repeated query differs"

    check("deterministic_repeat", deterministic)

    def mask_counts():
        resp = backend.score(probe_text, [probe_span], top_k=3, mask_counts=[2])
        assert len(resp.per_mask) == 2, f"expected 2 per-mask lists, got {len(resp.per_mask)}"
        expected = select_mask_model(2, info.mask_models)
        assert resp.consecutive_mask_model == expected, (
            f"routed to {resp.consecutive_mask_model}, expected {expected}"
        )

    check("mask_counts_respected", mask_counts)

    def candidate_scoring():
        resp = backend.score(probe_text, [probe_span], top_k=3, candidates=list(candidates))
        assert resp.candidates is not None, "candidates absent from response"
        got = {c.text for c in resp.candidates}
        assert got == set(candidates), f"candidate echo mismatch: {got}"
        for c in resp.candidates:
            assert c.token_count >= 1, f"{c.text!r} has token_count {c.token_count}"
            assert c.logprob <= 1e-9, f"{c.text!r} has positive logprob"

    check("candidates_scored", candidate_scoring)

    def attention_rows():
        try:
            payload = backend.attention(probe_text)
        except CapabilityError:
            return "skipped: attention not supported"
        w = payload.weights
        assert w.ndim == 4, f"expected 4-d weights, got {w.shape}"
        sums = w.sum(axis=-1)
        assert abs(sums - 1.0).max() <= 1e-4, "attention rows do not sum to 1"
        assert len(payload.tokens) == w.shape[-1], "tokenization length mismatch"
        return None

    check("attention_row_stochastic", attention_rows)

    return results


def assert_contract(
    backend: ScorerBackend, probe_text: str, probe_span: Span, candidates: Sequence[str]
) -> list[ContractResult]:
    results = run_contract_suite(backend, probe_text, probe_span, candidates)
    failures = [r for r in results if not r.ok]
    if failures:
        lines = "; ".join(f"{r.name}: {r.detail}" for r in failures)
        raise AssertionError(f"scorer contract violations: {lines}")
    return results
