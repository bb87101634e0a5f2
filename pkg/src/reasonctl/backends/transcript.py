"""Record/replay backends keyed by request fingerprint.

Recording wraps any backend and logs one JSON line per call; replay serves
the logged responses and fails loudly on any fingerprint it never saw,
which is what makes golden-trace regression possible.
"""

from __future__ import annotations

import json
from pathlib import Path

from .base import Backend, BackendResponse, GenerationRequest


class ReplayMismatch(RuntimeError):
    def __init__(self, fingerprint: str, kind: str, problem_id: str):
        self.fingerprint = fingerprint
        super().__init__(
            f"no transcript entry for fingerprint {fingerprint} "
            f"(kind={kind}, problem={problem_id})"
        )


class TranscriptRecorder(Backend):
    """Pass-through backend that appends every exchange to a JSONL file."""

    def __init__(self, inner: Backend, path: str | Path, append: bool = False):
        self.inner = inner
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "a" if append else "w", encoding="utf-8")

    def _respond(self, request: GenerationRequest) -> BackendResponse:
        response = self.inner._respond(request)
        record = {
            "fingerprint": request.fingerprint(),
            "kind": request.kind.value,
            "problem_id": request.problem_id,
            "attempt": request.attempt,
            "text": response.text,
            "tokens_in": response.tokens_in,
            "tokens_out": response.tokens_out,
            "tokens_estimated": response.tokens_estimated,
        }
        self._handle.write(json.dumps(record) + "\n")
        self._handle.flush()
        return response

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "TranscriptRecorder":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def load_transcript(path: str | Path) -> dict[str, dict]:
    entries: dict[str, dict] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            existing = entries.get(record["fingerprint"])
            if existing is not None and existing["text"] != record["text"]:
                raise ValueError(
                    f"transcript has conflicting entries for {record['fingerprint']}"
                )
            entries[record["fingerprint"]] = record
    return entries


class TranscriptReplayBackend(Backend):
    """Serves recorded responses; unknown fingerprints raise ReplayMismatch."""

    def __init__(self, path: str | Path):
        self.entries = load_transcript(path)

    def _respond(self, request: GenerationRequest) -> BackendResponse:
        record = self.entries.get(request.fingerprint())
        if record is None:
            raise ReplayMismatch(request.fingerprint(), request.kind.value,
                                 request.problem_id)
        return BackendResponse(
            text=record["text"],
            tokens_in=record["tokens_in"],
            tokens_out=record["tokens_out"],
            tokens_estimated=record.get("tokens_estimated", False),
        )
