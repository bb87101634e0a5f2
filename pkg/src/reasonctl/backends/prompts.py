"""Render chat messages from the packaged prompt template assets."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .base import GenerationRequest, RequestKind
from ..tree import Strategy

_TEMPLATE_FILES: dict[tuple[RequestKind, int], str] = {
    (RequestKind.ORACLE_SCORE, 1): "oracle_score.txt",
    (RequestKind.ORACLE_SCORE, 2): "oracle_reprompt.txt",
    (RequestKind.VERIFY_CONFIDENCE, 1): "verify_confidence.txt",
    (RequestKind.VERIFY_CONFIDENCE, 2): "verify_reprompt.txt",
    (RequestKind.REPAIR_SUFFIX, 1): "repair_suffix.txt",
    (RequestKind.FALLBACK_SAMPLE, 1): "fallback_sample.txt",
}

_GENERATE_FILES = {
    Strategy.DIRECT: "generate_direct.txt",
    Strategy.DECOMPOSE: "generate_decompose.txt",
    Strategy.VERIFY: "generate_verify.txt",
}


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("reasonctl.prompts").joinpath(name).read_text(encoding="utf-8")


def template_for(request: GenerationRequest) -> str:
    if request.kind is RequestKind.GENERATE:
        return load_template(_GENERATE_FILES[request.strategy])
    # retries beyond the first attempt reuse the constrained re-prompt wording
    attempt = 2 if request.attempt > 1 and (request.kind, 2) in _TEMPLATE_FILES else 1
    return load_template(_TEMPLATE_FILES[(request.kind, attempt)])


def render_prompt(request: GenerationRequest) -> str:
    """Fill the template slots; plain replace keeps literal braces intact."""
    text = template_for(request)
    text = text.replace("{problem}", request.problem)
    text = text.replace("{trajectory}", request.trajectory_context or "(empty)")
    if request.expected_steps is not None:
        text = text.replace("{expected_steps}", str(request.expected_steps))
    return text


def render_messages(request: GenerationRequest) -> list[dict[str, str]]:
    """System/user message pair; the template's first block is the system role."""
    rendered = render_prompt(request)
    head, _, body = rendered.partition("\n\n")
    if body:
        return [{"role": "system", "content": head.strip()},
                {"role": "user", "content": body.strip()}]
    return [{"role": "user", "content": rendered.strip()}]


def render_trajectory(thoughts: list[str]) -> str:
    """Canonical step-numbered layout shared by every prompt slot."""
    return "\n".join(f"Step {i}: {thought}" for i, thought in enumerate(thoughts, start=1))
