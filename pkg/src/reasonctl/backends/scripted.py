"""Scripted backend: canned responses per request kind, for tests and demos."""

from __future__ import annotations

from collections import deque

from .base import Backend, BackendResponse, GenerationRequest, RequestKind, estimate_tokens


class ScriptExhausted(RuntimeError):
    pass


class ScriptedBackend(Backend):
    """Pops pre-seeded replies per kind, in FIFO order."""

    def __init__(self, script: dict[RequestKind, list[str]] | None = None):
        self.queues: dict[RequestKind, deque[str]] = {
            kind: deque(script.get(kind, [])) if script else deque() for kind in RequestKind
        }
        self.seen: list[GenerationRequest] = []

    def push(self, kind: RequestKind, *texts: str) -> "ScriptedBackend":
        self.queues[kind].extend(texts)
        return self

    def _respond(self, request: GenerationRequest) -> BackendResponse:
        self.seen.append(request)
        queue = self.queues[request.kind]
        if not queue:
            raise ScriptExhausted(f"no scripted reply left for {request.kind.value}")
        text = queue.popleft()
        return BackendResponse(text=text, tokens_in=8, tokens_out=estimate_tokens(text),
                               tokens_estimated=True)
