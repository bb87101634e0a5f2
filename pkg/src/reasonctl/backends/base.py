"""Backend interface: requests, decoding parameters, responses, fingerprints.

Every invocation requires a :class:`~reasonctl.budget.ChargeToken`, which is
how the ledger guarantees no hidden compute. Token usage is recorded on the
token exactly once per call, even when the backend raises.
"""

from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

from ..budget import ChargeToken
from ..tree import Strategy


class RequestKind(str, Enum):
    GENERATE = "generate"
    ORACLE_SCORE = "oracle_score"
    VERIFY_CONFIDENCE = "verify_confidence"
    REPAIR_SUFFIX = "repair_suffix"
    FALLBACK_SAMPLE = "fallback_sample"


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.4
    top_p: float = 0.95
    max_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be > 0")

    @classmethod
    def object_level(cls) -> "DecodingParams":
        """Sampled decoding for thought generation."""
        return cls(temperature=0.4, top_p=0.95, max_tokens=2048)

    @classmethod
    def meta_level(cls) -> "DecodingParams":
        """Deterministic decoding for oracle and verification calls."""
        return cls(temperature=0.0, top_p=1.0, max_tokens=512)

    @classmethod
    def greedy(cls) -> "DecodingParams":
        """Deterministic decoding for the single-chain baseline."""
        return cls(temperature=0.0, top_p=1.0, max_tokens=2048)


@dataclass(frozen=True)
class GenerationRequest:
    """One model-side request; ``kind`` selects the prompt template.

    ``attempt`` disambiguates repeats that must sample fresh text: re-prompts
    after a parse failure, independent chain samples, and re-expansions of a
    node. ``seed`` is the episode's sampling seed so a shared backend can
    serve many episodes deterministically.
    """

    kind: RequestKind
    problem_id: str
    problem: str
    trajectory_context: str = ""
    strategy: Strategy | None = None
    decoding: DecodingParams = DecodingParams()
    expected_steps: int | None = None
    attempt: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind is RequestKind.GENERATE and self.strategy is None:
            raise ValueError("generate requests must carry a strategy tag")
        if self.kind is RequestKind.ORACLE_SCORE and not self.expected_steps:
            raise ValueError("oracle requests must carry expected_steps")
        if self.attempt < 1:
            raise ValueError("attempt counter starts at 1")

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "kind": self.kind.value,
                "problem_id": self.problem_id,
                "context": self.trajectory_context,
                "strategy": self.strategy.value if self.strategy else None,
                "decoding": [self.decoding.temperature, self.decoding.top_p,
                             self.decoding.max_tokens],
                "expected_steps": self.expected_steps,
                "attempt": self.attempt,
                "seed": self.seed,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:32]


@dataclass(frozen=True)
class BackendResponse:
    text: str
    tokens_in: int
    tokens_out: int
    tokens_estimated: bool = False


class TransportError(RuntimeError):
    """Backend could not produce a response after its own retry policy."""


class AuthenticationError(TransportError):
    pass


def estimate_tokens(text: str) -> int:
    """Whitespace token count, used when the backend reports no usage."""
    return len(text.split())


class Backend(ABC):
    """Pluggable generator/oracle provider."""

    def invoke(self, request: GenerationRequest, token: ChargeToken) -> BackendResponse:
        """Issue one charged call. Token usage is recorded even on failure."""
        try:
            response = self._respond(request)
        except BaseException:
            if not token.recorded:
                token.record_tokens(0, 0)
            raise
        token.record_tokens(response.tokens_in, response.tokens_out)
        return response

    @abstractmethod
    def _respond(self, request: GenerationRequest) -> BackendResponse:
        ...
