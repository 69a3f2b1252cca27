"""HTTP client for the scorer wire protocol."""

from __future__ import annotations

import json
import math
from typing import Any, Sequence

import httpx
import numpy as np

from .base import (
    AttentionPayload,
    BackendInfo,
    CandidateScore,
    ContextWindowError,
    MaskResponse,
    ScorerBackend,
    ScorerTransportError,
    Span,
    TokenScore,
)


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )


def encode_score_request(
    text: str,
    mask_spans: Sequence[Span],
    top_k: int,
    mask_counts: Sequence[int] | None = None,
    candidates: Sequence[str] | None = None,
) -> dict:
    req: dict = {"text": text, "mask_spans": [list(s) for s in mask_spans], "top_k": top_k}
    if mask_counts is not None:
        req["mask_counts"] = list(mask_counts)
    if candidates is not None:
        req["candidates"] = list(candidates)
    return req


def encode_score_response(resp: MaskResponse) -> dict:
    out: dict = {
        "per_mask": [
            [{"token": ts.token, "logprob": ts.logprob} for ts in ranked]
            for ranked in resp.per_mask
        ],
        "tail_logmass": [t if t > -math.inf else None for t in resp.tail_logmass],
        "model_id": resp.model_id,
        "consecutive_mask_model": resp.consecutive_mask_model,
    }
    if resp.candidates is not None:
        out["candidates"] = [
            {
                "text": c.text,
                "logprob": c.logprob if c.logprob > -math.inf else None,
                "tokens": c.token_count,
            }
            for c in resp.candidates
        ]
    return out


def decode_score_response(payload: dict) -> MaskResponse:
    try:
        per_mask = tuple(
            tuple(TokenScore(e["token"], float(e["logprob"])) for e in ranked)
            for ranked in payload["per_mask"]
        )
        tails = tuple(
            -math.inf if t is None else float(t) for t in payload["tail_logmass"]
        )
        cands = None
        if "candidates" in payload and payload["candidates"] is not None:
            cands = tuple(
                CandidateScore(
                    text=c["text"],
                    logprob=-math.inf if c["logprob"] is None else float(c["logprob"]),
                    token_count=int(c["tokens"]),
                )
                for c in payload["candidates"]
            )
        resp = MaskResponse(
            per_mask=per_mask,
            tail_logmass=tails,
            model_id=payload["model_id"],
            consecutive_mask_model=int(payload["consecutive_mask_model"]),
            candidates=cands,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ScorerTransportError(f"malformed score response: {e}") from e
    for ranked in per_mask:
        for ts in ranked:
            if not (ts.logprob <= 1e-9) or math.isnan(ts.logprob):
                raise ScorerTransportError(
                    f"log-probability for {ts.token!r} not finite and <= 0: {ts.logprob}"
                )
    return resp


def decode_info(payload: dict) -> BackendInfo:
    att = payload.get("attention") or {}
    try:
        return BackendInfo(
            model_id=payload["model_id"],
            vocab_size=int(payload["vocab_size"]),
            context_limit=int(payload["context_limit"]),
            mask_models=tuple(int(m) for m in payload["mask_models"]),
            joiner=payload.get("joiner", "whitespace"),
            attention_layers=int(att.get("layers", 0)),
            attention_heads_per_layer=int(att.get("heads_per_layer", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ScorerTransportError(f"malformed info response: {e}") from e


def decode_attention_response(payload: dict) -> AttentionPayload:
    try:
        weights = np.asarray(payload["weights"], dtype=np.float64)
        tokenization = payload["tokenization"]
        tokens = tuple(tokenization["tokens"])
        offsets = tuple((int(a), int(b)) for a, b in tokenization["offsets"])
    except (KeyError, TypeError, ValueError) as e:
        raise ScorerTransportError(f"malformed attention response: {e}") from e
    if weights.ndim != 4:
        raise ScorerTransportError(f"attention weights must be 4-d, got shape {weights.shape}")
    return AttentionPayload(weights=weights, tokens=tokens, offsets=offsets)


class RemoteScorer(ScorerBackend):
    """Client for a scorer service speaking the versioned HTTP protocol."""

    def __init__(
        self,
        base_url: str | None = None,
        client: httpx.Client | None = None,
        timeout: float = 60.0,
    ):
        if client is None:
            if base_url is None:
                raise ValueError("base_url or client required")
            client = httpx.Client(base_url=base_url, timeout=timeout)
        self._client = client
        self._info = self.info(refresh=True)
        self.model_id = self._info.model_id
        self.context_limit = self._info.context_limit
        self.mask_models = self._info.mask_models
        self.joiner = self._info.joiner

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        try:
            r = self._client.request(method, path, json=payload)
        except httpx.HTTPError as e:
            raise ScorerTransportError(f"scorer unreachable: {e}") from e
        if r.status_code == 413:
            raise ContextWindowError(r.text)
        if r.status_code >= 400:
            raise ScorerTransportError(f"{path} -> HTTP {r.status_code}: {r.text[:300]}")
        try:
            return r.json()
        except json.JSONDecodeError as e:
            raise ScorerTransportError(f"{path}: invalid JSON body") from e

    def info(self, refresh: bool = False) -> BackendInfo:
        if not refresh and getattr(self, "_info", None) is not None:
            return self._info
        info = decode_info(self._request("GET", "/v1/info"))
        self._info = info
        return info

    def score(
        self,
        text: str,
        mask_spans: Sequence[Span],
        top_k: int = 10,
        mask_counts: Sequence[int] | None = None,
        candidates: Sequence[str] | None = None,
    ) -> MaskResponse:
        payload = encode_score_request(text, mask_spans, top_k, mask_counts, candidates)
        return decode_score_response(self._request("POST", "/v1/score", payload))

    def attention(self, text: str) -> AttentionPayload:
        return decode_attention_response(
            self._request("POST", "/v1/attention", {"text": text})
        )

    def close(self) -> None:
        self._client.close()
