"""Final-answer extraction, normalization, and problem records.

Problems come in two views: the offline :class:`Problem` carries the gold
answer for scoring, while the online :class:`ProblemView` (the only form the
controller and backends ever see) does not.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class AnswerKind(str, Enum):
    MATH = "math"
    MULTIPLE_CHOICE = "multiple_choice"
    CODE_TEXT = "code_text"


@dataclass(frozen=True)
class ProblemView:
    """Online view of a problem: no gold answer, by construction."""

    id: str
    prompt: str
    kind: AnswerKind = AnswerKind.MATH
    choices: tuple[tuple[str, str], ...] = ()  # (label, option text)


@dataclass(frozen=True)
class Problem:
    """Offline problem record; ``gold`` never crosses into the online path."""

    id: str
    prompt: str
    kind: AnswerKind = AnswerKind.MATH
    choices: tuple[tuple[str, str], ...] = ()
    gold: str | None = None

    def view(self) -> ProblemView:
        return ProblemView(id=self.id, prompt=self.prompt, kind=self.kind,
                           choices=self.choices)


def load_problems(path: str | Path) -> list[Problem]:
    """One JSON object per line: id, prompt, kind, optional gold/choices."""
    problems = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            choices = tuple(
                (str(label), str(text)) for label, text in row.get("choices", [])
            )
            problems.append(Problem(
                id=str(row["id"]),
                prompt=row["prompt"],
                kind=AnswerKind(row.get("kind", "math")),
                choices=choices,
                gold=str(row["gold"]) if row.get("gold") is not None else None,
            ))
    return problems


def save_problems(problems: list[Problem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for p in problems:
            handle.write(json.dumps({
                "id": p.id, "prompt": p.prompt, "kind": p.kind.value,
                "choices": [list(c) for c in p.choices], "gold": p.gold,
            }) + "\n")


_BOXED = re.compile(r"\\boxed\s*\{")
_FINAL_MARKER = re.compile(
    r"(?:final\s+answer|the\s+answer\s+is|answer)\s*[:=]?\s*(.+)", re.IGNORECASE
)
_NUMERIC = re.compile(r"[-+]?\d+(?:,\d{3})*(?:\.\d+)?(?:\s*/\s*[-+]?\d+(?:\.\d+)?)?")
_LETTER = re.compile(r"\b([A-Z])\b")
_FRACTION = re.compile(r"^([-+]?\d+(?:\.\d+)?)\s*/\s*([-+]?\d+(?:\.\d+)?)$")


def _boxed_content(text: str) -> str | None:
    """Content of the last \\boxed{...}, honoring nested braces."""
    last = None
    for match in _BOXED.finditer(text):
        depth = 1
        start = match.end()
        pos = start
        while pos < len(text) and depth:
            if text[pos] == "{":
                depth += 1
            elif text[pos] == "}":
                depth -= 1
            pos += 1
        if depth == 0:
            last = text[start:pos - 1]
    return last


def normalize_answer(answer: str) -> str:
    """Lowercase, strip wrapping punctuation, canonicalize simple numeric forms."""
    out = answer.strip().strip(".,;:!？?")
    out = out.strip("$ ")
    out = out.replace("\\%", "").replace("%", "")
    compact = out.replace(",", "").replace(" ", "")
    frac = _FRACTION.match(compact)
    if frac and float(frac.group(2)) != 0:
        value = float(frac.group(1)) / float(frac.group(2))
        return _format_number(value)
    try:
        return _format_number(float(compact))
    except ValueError:
        return " ".join(out.lower().split())


def _format_number(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def _last_numeric(segment: str) -> str | None:
    matches = _NUMERIC.findall(segment)
    return matches[-1] if matches else None


def _last_segment(chain: str) -> str:
    parts = [p for p in re.split(r"\n\s*\n|\n", chain) if p.strip()]
    return parts[-1] if parts else chain


def _extract_math(chain: str) -> str | None:
    boxed = _boxed_content(chain)
    if boxed is not None:
        return normalize_answer(boxed)
    marker = None
    for match in _FINAL_MARKER.finditer(chain):
        marker = match.group(1).splitlines()[0]
    if marker:
        boxed = _boxed_content(marker)
        if boxed is not None:
            return normalize_answer(boxed)
        numeric = _last_numeric(marker)
        return normalize_answer(numeric if numeric else marker)
    numeric = _last_numeric(_last_segment(chain))
    return normalize_answer(numeric) if numeric else None


def _extract_choice(chain: str, choices: tuple[tuple[str, str], ...]) -> str | None:
    labels = {label.upper() for label, _ in choices} if choices else set("ABCDE")
    marker = None
    for match in _FINAL_MARKER.finditer(chain):
        marker = match.group(1).splitlines()[0]
    for scope in (marker, _last_segment(chain)):
        if not scope:
            continue
        for letter in reversed(_LETTER.findall(scope)):
            if letter in labels:
                return letter
        # map an option's text span back to its label
        lowered = scope.lower()
        hits = [label for label, text in choices if text and text.lower() in lowered]
        if len(hits) == 1:
            return hits[0].upper()
    return None


def _extract_code_text(chain: str) -> str | None:
    marker = None
    for match in _FINAL_MARKER.finditer(chain):
        marker = match.group(1).splitlines()[0]
    if marker:
        return normalize_answer(marker)
    segment = _last_segment(chain).strip()
    return normalize_answer(segment) if segment else None


def extract_answer(chain: str, kind: AnswerKind = AnswerKind.MATH,
                   choices: tuple[tuple[str, str], ...] = ()) -> str | None:
    """Normalized final answer pulled from a reasoning chain, or None.

    Math answers prefer boxed expressions, then explicit final-answer
    markers, then the last numeric expression of the last segment.
    Multiple-choice maps both option letters and option text spans to the
    canonical label.
    """
    if not chain or not chain.strip():
        return None
    if kind is AnswerKind.MULTIPLE_CHOICE:
        return _extract_choice(chain, choices)
    if kind is AnswerKind.CODE_TEXT:
        return _extract_code_text(chain)
    return _extract_math(chain)


_FINAL_HINT = re.compile(r"final\s+answer|\\boxed\s*\{|the\s+answer\s+is", re.IGNORECASE)


def looks_final(text: str) -> bool:
    """True when a thought carries an explicit final-answer marker."""
    return bool(_FINAL_HINT.search(text))
