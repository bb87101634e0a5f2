"""Parsing and aggregation of structured process-oracle output.

The oracle replies one line per reasoning step::

    Step 1: Semantic=0.90, Logical=0.80, Fix=0.00

Each field must be numeric and inside [0, 1], and the number of step lines
must match the controller's segmentation of the trajectory. On a parse
failure the caller issues exactly one constrained re-prompt; if that fails
too, unparseable fields fall back to the conservative default 0 and are
recorded as defaulted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from .budget import BudgetExceeded

# (semantic, logical, fix) weights for the per-step reward
REWARD_WEIGHTS = (0.2, 0.5, 0.3)

_FIELD_NAMES = ("semantic", "logical", "fix")
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_STEP_LINE = re.compile(r"^\s*step\s*(\d+)\s*[:.\-]?\s*(.*)$", re.IGNORECASE)
_FIELD_VALUE = {
    name: re.compile(rf"{name}\s*=\s*({_NUM})", re.IGNORECASE) for name in _FIELD_NAMES
}
_FIELD_PRESENT = {
    name: re.compile(rf"{name}\s*=", re.IGNORECASE) for name in _FIELD_NAMES
}
_ANY_NUM = re.compile(_NUM)


class ParseFailure(Exception):
    """Oracle or confidence output could not be parsed.

    Carries the first offending line/field so the failure is attributable.
    """

    def __init__(self, reason: str, line: str | None = None, field_name: str | None = None):
        self.reason = reason
        self.line = line
        self.field_name = field_name
        detail = reason
        if field_name:
            detail += f" (field: {field_name})"
        if line is not None:
            detail += f" [line: {line.strip()!r}]"
        super().__init__(detail)


@dataclass(frozen=True)
class StepScores:
    """Per-step oracle triple; ``defaulted`` names fields substituted with 0."""

    semantic: float
    logical: float
    fix: float
    defaulted: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for name in _FIELD_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} score {value} outside [0, 1]")
            if name in self.defaulted and value != 0.0:
                raise ValueError(f"defaulted field {name} must be exactly 0")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.semantic, self.logical, self.fix)


@dataclass
class OracleReport:
    """Scored trajectory: per-step triples, step rewards, and their mean."""

    steps: list[StepScores]
    step_rewards: list[float]
    process_value: float
    parse_attempts: int

    @classmethod
    def from_steps(cls, steps: list[StepScores], parse_attempts: int,
                   weights: tuple[float, float, float] = REWARD_WEIGHTS) -> "OracleReport":
        rewards = [step_reward(s, weights) for s in steps]
        return cls(steps=steps, step_rewards=rewards,
                   process_value=process_value(rewards), parse_attempts=parse_attempts)

    @property
    def defaulted_fraction(self) -> float:
        total = 3 * len(self.steps)
        if total == 0:
            return 0.0
        return sum(len(s.defaulted) for s in self.steps) / total


def step_reward(scores: StepScores,
                weights: tuple[float, float, float] = REWARD_WEIGHTS) -> float:
    """Convex combination of the semantic/logical/fix triple."""
    w_sem, w_log, w_fix = weights
    return w_sem * scores.semantic + w_log * scores.logical + w_fix * scores.fix


def process_value(rewards: list[float]) -> float:
    """Arithmetic mean of the step rewards."""
    if not rewards:
        raise ValueError("cannot average an empty reward list")
    return sum(rewards) / len(rewards)


def _scan_step_lines(raw: str) -> list[tuple[int, str]]:
    """(step number, line) pairs for every line that looks like a step entry."""
    found = []
    for line in raw.splitlines():
        match = _STEP_LINE.match(line)
        if match:
            found.append((int(match.group(1)), line))
    return found


def _parse_fields(line: str, step_no: int) -> StepScores:
    values = {}
    for name in _FIELD_NAMES:
        if not _FIELD_PRESENT[name].search(line):
            raise ParseFailure(f"step {step_no}: missing field", line=line, field_name=name)
        match = _FIELD_VALUE[name].search(line)
        if not match:
            raise ParseFailure(f"step {step_no}: non-numeric value", line=line, field_name=name)
        value = float(match.group(1))
        if not 0.0 <= value <= 1.0:
            raise ParseFailure(f"step {step_no}: value {value} out of [0, 1]",
                               line=line, field_name=name)
        values[name] = value
    return StepScores(**values)


def parse_step_scores(raw: str, expected_steps: int) -> list[StepScores]:
    """Strict parse of oracle output into exactly ``expected_steps`` score triples.

    Lines that do not start with a step marker are ignored; step lines must be
    numbered 1..expected_steps in order and carry all three valid fields.
    """
    if expected_steps < 1:
        raise ValueError("expected_steps must be >= 1")
    lines = _scan_step_lines(raw)
    if len(lines) != expected_steps:
        raise ParseFailure(
            f"step count mismatch: got {len(lines)}, expected {expected_steps}",
            line=lines[0][1] if lines else None,
        )
    steps = []
    for position, (step_no, line) in enumerate(lines, start=1):
        if step_no != position:
            raise ParseFailure(
                f"steps out of order: expected step {position}, saw step {step_no}",
                line=line,
            )
        steps.append(_parse_fields(line, step_no))
    return steps


def salvage_step_scores(raw: str, expected_steps: int) -> list[StepScores]:
    """Best-effort extraction used after the re-prompt also fails.

    Valid in-range fields are kept; anything missing or invalid becomes 0 and
    is recorded in ``defaulted``. Always returns ``expected_steps`` entries.
    """
    by_number: dict[int, str] = {}
    for step_no, line in _scan_step_lines(raw):
        by_number.setdefault(step_no, line)
    steps = []
    for step_no in range(1, expected_steps + 1):
        line = by_number.get(step_no)
        values = {}
        defaulted = set()
        for name in _FIELD_NAMES:
            value = None
            if line is not None:
                match = _FIELD_VALUE[name].search(line)
                if match:
                    candidate = float(match.group(1))
                    if 0.0 <= candidate <= 1.0:
                        value = candidate
            if value is None:
                value = 0.0
                defaulted.add(name)
            values[name] = value
        steps.append(StepScores(defaulted=frozenset(defaulted), **values))
    return steps


def parse_confidence(raw: str) -> float:
    """First numeric token inside [0, 1]; anything else is a parse failure."""
    for match in _ANY_NUM.finditer(raw):
        value = float(match.group(0))
        if 0.0 <= value <= 1.0:
            return value
    raise ParseFailure("no bounded numeric confidence found", line=raw[:120] or None)


def score_with_retry(issue: Callable[[int], str], expected_steps: int,
                     weights: tuple[float, float, float] = REWARD_WEIGHTS) -> OracleReport:
    """Parse an oracle reply, re-prompting once and defaulting on a second failure.

    ``issue(attempt)`` performs the charged backend call: attempt 1 renders the
    normal scoring prompt, attempt 2 the constrained re-prompt. At most two
    calls are made. If the budget cannot cover the re-prompt, the first reply
    is salvaged directly.
    """
    first = issue(1)
    try:
        return OracleReport.from_steps(parse_step_scores(first, expected_steps), 1, weights)
    except ParseFailure:
        pass
    try:
        second = issue(2)
    except BudgetExceeded:
        return OracleReport.from_steps(salvage_step_scores(first, expected_steps), 1, weights)
    try:
        steps = parse_step_scores(second, expected_steps)
    except ParseFailure:
        steps = salvage_step_scores(second, expected_steps)
    return OracleReport.from_steps(steps, 2, weights)


@dataclass
class ConfidenceReport:
    """Outcome of verify-style confidence extraction."""

    value: float
    parse_attempts: int
    defaulted: bool = False


def confidence_with_retry(issue: Callable[[int], str]) -> ConfidenceReport:
    """Same re-prompt protocol as scoring, applied to terminal confidence."""
    first = issue(1)
    try:
        return ConfidenceReport(parse_confidence(first), 1)
    except ParseFailure:
        pass
    try:
        second = issue(2)
    except BudgetExceeded:
        return ConfidenceReport(0.0, 1, defaulted=True)
    try:
        return ConfidenceReport(parse_confidence(second), 2)
    except ParseFailure:
        return ConfidenceReport(0.0, 2, defaulted=True)
