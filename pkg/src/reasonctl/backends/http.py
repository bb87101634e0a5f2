"""Generic JSON chat-completion client.

Transport-level retries do not consume budget: the budget counts model
calls, and a call is one successfully issued completion. Retries are
tallied separately on the backend for later inspection.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import requests

from .base import (AuthenticationError, Backend, BackendResponse, GenerationRequest,
                   TransportError, estimate_tokens)
from .prompts import render_messages

_RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


@dataclass
class HttpBackendConfig:
    endpoint: str  # base URL; /chat/completions is appended
    model: str
    api_key_env: str = "CHAT_API_KEY"
    timeout: float = 60.0
    transport_retries: int = 3
    retry_backoff: float = 0.5
    extra_headers: dict[str, str] = field(default_factory=dict)


class HttpBackend(Backend):
    def __init__(self, config: HttpBackendConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self.transport_retry_count = 0

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        headers.update(self.config.extra_headers)
        return headers

    def _respond(self, request: GenerationRequest) -> BackendResponse:
        payload = {
            "model": self.config.model,
            "messages": render_messages(request),
            "temperature": request.decoding.temperature,
            "top_p": request.decoding.top_p,
            "max_tokens": request.decoding.max_tokens,
        }
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.config.transport_retries + 1):
            if attempt:
                self.transport_retry_count += 1
                time.sleep(self.config.retry_backoff * attempt)
            try:
                reply = self.session.post(url, json=payload, headers=self._headers(),
                                          timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if reply.status_code in (401, 403):
                raise AuthenticationError(f"backend rejected credentials ({reply.status_code})")
            if reply.status_code in _RETRYABLE_STATUS:
                last_error = TransportError(f"status {reply.status_code}")
                continue
            if reply.status_code != 200:
                raise TransportError(f"unexpected status {reply.status_code}: {reply.text[:200]}")
            return self._parse(reply.json())
        raise TransportError(f"transport failed after "
                             f"{self.config.transport_retries} retries: {last_error}")

    def _parse(self, body: dict) -> BackendResponse:
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc
        usage = body.get("usage") or {}
        tokens_in = usage.get("prompt_tokens")
        tokens_out = usage.get("completion_tokens")
        estimated = tokens_in is None or tokens_out is None
        return BackendResponse(
            text=text,
            tokens_in=int(tokens_in) if tokens_in is not None else estimate_tokens(str(body)),
            tokens_out=int(tokens_out) if tokens_out is not None else estimate_tokens(text),
            tokens_estimated=estimated,
        )
