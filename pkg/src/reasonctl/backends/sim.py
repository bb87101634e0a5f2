"""Deterministic simulated reasoning world.

Each problem hides a ground-truth chain of steps ending in a boxed answer.
Generated steps are correct with probability ``1 - step_error_prob``;
defective steps carry a recognizable deviation marker and, at the end of a
chain, a wrong answer drawn from a small per-problem distractor set. Oracle
and verifier replies are derived from fixed score bases plus seeded noise,
so identical (seed, request fingerprint) pairs always produce identical
responses and whole episodes replay byte-for-byte.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass

from .base import Backend, BackendResponse, GenerationRequest, RequestKind, estimate_tokens
from .prompts import render_prompt
from ..answers import AnswerKind, Problem

_STEP_LINE = re.compile(r"^Step \d+: (.*)$")
_DEFECT_MARK = "(deviation"
_REPAIR_MARK = "Corrected continuation"
_ANSWER_MARK = "Final answer:"
_BOXED = re.compile(r"\\boxed\{(\d+)\}")
_COVERS = re.compile(r"\(covers (\d+) steps?\)")


@dataclass
class SimWorldConfig:
    seed: int = 0
    step_error_prob: float = 0.2
    oracle_noise: float = 0.02
    repairable_fraction: float = 0.7
    min_chain_len: int = 1
    max_chain_len: int = 3
    malform_prob: float = 0.0  # chance a first-attempt oracle/verify reply is garbled
    # score bases: healthy steps sit above the repair health threshold, defects below
    correct_base: tuple[float, float, float] = (0.85, 0.9, 0.1)
    defect_base: tuple[float, float, float] = (0.6, 0.3, 0.1)
    repair_fix_base: float = 0.8
    conf_correct: float = 0.9
    conf_wrong: float = 0.25
    conf_partial: float = 0.4

    def __post_init__(self) -> None:
        if not 0 <= self.step_error_prob <= 1:
            raise ValueError("step_error_prob must be in [0, 1]")
        if not 0 <= self.repairable_fraction <= 1:
            raise ValueError("repairable_fraction must be in [0, 1]")
        if self.min_chain_len < 1 or self.max_chain_len < self.min_chain_len:
            raise ValueError("chain length bounds out of order")


def _digest(*parts) -> int:
    joined = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(joined.encode("utf-8")).digest()[:8], "big")


class SimWorld:
    """Hidden per-problem solution chains plus all stochastic draws."""

    def __init__(self, config: SimWorldConfig | None = None):
        self.config = config or SimWorldConfig()

    def chain_length(self, problem_id: str) -> int:
        cfg = self.config
        span = cfg.max_chain_len - cfg.min_chain_len + 1
        return cfg.min_chain_len + _digest(cfg.seed, problem_id, "len") % span

    def gold_answer(self, problem_id: str) -> int:
        return 10 + _digest(self.config.seed, problem_id, "gold") % 90

    def distractor(self, problem_id: str, slot: int) -> int:
        gold = self.gold_answer(problem_id)
        value = 10 + _digest(self.config.seed, problem_id, "distractor", slot) % 90
        if value == gold:
            value = 10 + (value - 9) % 90
        return value

    def chain_steps(self, problem_id: str) -> list[str]:
        length = self.chain_length(problem_id)
        gold = self.gold_answer(problem_id)
        steps = []
        for j in range(1, length + 1):
            rule = _digest(self.config.seed, problem_id, "rule", j) % 97
            inter = _digest(self.config.seed, problem_id, "inter", j) % 1000
            if j < length:
                steps.append(f"Apply rule R{rule} to reach intermediate value {inter}.")
            else:
                steps.append(
                    f"Combine the intermediate results to obtain {gold}. "
                    f"Final answer: \\boxed{{{gold}}}"
                )
        return steps

    def make_problems(self, count: int) -> list[Problem]:
        problems = []
        for i in range(count):
            pid = f"sim-{i:04d}"
            problems.append(Problem(
                id=pid,
                prompt=(f"Work out the target value for configuration C-{i}. "
                        "Reason step by step and finish with a boxed integer."),
                kind=AnswerKind.MATH,
                gold=str(self.gold_answer(pid)),
            ))
        return problems


def parse_context_steps(context: str) -> list[str]:
    """Thoughts from the canonical 'Step i: ...' trajectory layout."""
    steps = []
    for line in context.splitlines():
        match = _STEP_LINE.match(line)
        if match:
            steps.append(match.group(1))
    return steps


def _positions_covered(step: str) -> int:
    """A repaired span stands for several solution positions; others for one."""
    match = _COVERS.search(step)
    return int(match.group(1)) if match else 1


def _chain_position(steps: list[str]) -> int:
    """1-based solution position the next generated step would occupy."""
    return 1 + sum(_positions_covered(step) for step in steps)


class SimBackend(Backend):
    """Serves all request kinds from a :class:`SimWorld`, deterministically."""

    def __init__(self, world: SimWorld):
        self.world = world

    def _rng(self, request: GenerationRequest, *salt) -> random.Random:
        return random.Random(_digest(self.world.config.seed, request.fingerprint(), *salt))

    def _respond(self, request: GenerationRequest) -> BackendResponse:
        handler = {
            RequestKind.GENERATE: self._generate,
            RequestKind.ORACLE_SCORE: self._oracle_score,
            RequestKind.VERIFY_CONFIDENCE: self._verify,
            RequestKind.REPAIR_SUFFIX: self._repair,
            RequestKind.FALLBACK_SAMPLE: self._full_chain,
        }[request.kind]
        text = handler(request)
        return BackendResponse(text=text, tokens_in=estimate_tokens(render_prompt(request)),
                               tokens_out=estimate_tokens(text), tokens_estimated=True)

    # -- object level --------------------------------------------------------

    def _defect_text(self, request: GenerationRequest, position: int, length: int,
                     rng: random.Random) -> str:
        deviation = rng.randrange(1000)
        text = f"Apply an inapplicable shortcut here (deviation {deviation})."
        if position >= length:
            wrong = self.world.distractor(request.problem_id, rng.randrange(2))
            text += f" Final answer: \\boxed{{{wrong}}}"
        return text

    def _generate(self, request: GenerationRequest) -> str:
        rng = self._rng(request)
        chain = self.world.chain_steps(request.problem_id)
        prior = parse_context_steps(request.trajectory_context)
        position = _chain_position(prior)
        if any(_ANSWER_MARK in step for step in prior):
            return "The solution above is already complete."
        derailed = any(_DEFECT_MARK in step for step in prior)
        if derailed or rng.random() < self.world.config.step_error_prob:
            return self._defect_text(request, position, len(chain), rng)
        return chain[position - 1]

    def _repair(self, request: GenerationRequest) -> str:
        rng = self._rng(request)
        chain = self.world.chain_steps(request.problem_id)
        prefix = parse_context_steps(request.trajectory_context)
        start = _chain_position(prefix) - 1  # 0-based index of the first regenerated step
        span = request.expected_steps or (len(chain) - start)
        span = max(1, min(span, len(chain) - start))
        head = f"{_REPAIR_MARK} (covers {span} steps):"
        prefix_clean = not any(_DEFECT_MARK in step for step in prefix)
        if prefix_clean and rng.random() < self.world.config.repairable_fraction:
            return f"{head} " + " ".join(chain[start:start + span])
        deviation = rng.randrange(1000)
        text = f"{head} Re-derive the affected quantities (deviation {deviation})."
        if start + span >= len(chain):
            wrong = self.world.distractor(request.problem_id, rng.randrange(2))
            text += f" Final answer: \\boxed{{{wrong}}}"
        return text

    def _full_chain(self, request: GenerationRequest) -> str:
        rng = self._rng(request)
        chain = self.world.chain_steps(request.problem_id)
        error_at = None
        for j in range(1, len(chain) + 1):
            if rng.random() < self.world.config.step_error_prob:
                error_at = j
                break
        if error_at is None:
            return "\n".join(chain)
        lines = chain[:error_at - 1]
        lines.append(self._defect_text(request, error_at, len(chain), rng))
        if error_at < len(chain):
            wrong = self.world.distractor(request.problem_id, rng.randrange(2))
            lines.append(f"The remaining derivation inherits the deviation. "
                         f"Final answer: \\boxed{{{wrong}}}")
        return "\n".join(lines)

    # -- meta level ----------------------------------------------------------

    def _garble(self, clean: str, rng: random.Random) -> str:
        mode = rng.randrange(3)
        if mode == 0:
            return clean.replace("Logical=", "Logical is ", 1)
        if mode == 1:
            first_line = clean.splitlines()[0]
            return first_line.split(",")[0]  # drops fields and steps
        return "I would rate these steps quite highly overall."

    def _oracle_score(self, request: GenerationRequest) -> str:
        cfg = self.world.config
        rng = self._rng(request)
        steps = parse_context_steps(request.trajectory_context)
        lines = []
        for i, step in enumerate(steps, start=1):
            defective = _DEFECT_MARK in step
            base = cfg.defect_base if defective else cfg.correct_base
            fix_base = cfg.repair_fix_base if step.startswith(_REPAIR_MARK) else base[2]
            sem = _clamp(base[0] + rng.gauss(0, cfg.oracle_noise))
            log = _clamp(base[1] + rng.gauss(0, cfg.oracle_noise))
            fix = _clamp(fix_base + rng.gauss(0, cfg.oracle_noise))
            lines.append(f"Step {i}: Semantic={sem:.2f}, Logical={log:.2f}, Fix={fix:.2f}")
        clean = "\n".join(lines)
        if request.attempt == 1 and rng.random() < cfg.malform_prob:
            return self._garble(clean, rng)
        return clean

    def _verify(self, request: GenerationRequest) -> str:
        cfg = self.world.config
        rng = self._rng(request)
        context = request.trajectory_context
        boxed = _BOXED.findall(context)
        if boxed:
            correct = int(boxed[-1]) == self.world.gold_answer(request.problem_id)
            base = cfg.conf_correct if correct else cfg.conf_wrong
        else:
            base = cfg.conf_partial
        value = _clamp(base + rng.gauss(0, cfg.oracle_noise))
        if request.attempt == 1 and rng.random() < cfg.malform_prob:
            return "fairly sure about this one"
        return f"{value:.2f}"


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))
