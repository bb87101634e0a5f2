"""Reliability, efficiency, repair, audit, and failure-triage analytics.

All functions are pure batch analytics over immutable episode records.
Calibration and selective-risk metrics are computed over scored records
(non-abstained, confidence present); accuracy counts abstentions as
incorrect whenever gold is known.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class PredictionRecord:
    episode_id: str
    answer: str | None
    abstained: bool
    confidence: float | None
    correct: bool | None
    calls: int = 0
    tokens: int = 0

    def __post_init__(self) -> None:
        if not self.abstained and self.correct is not None and self.confidence is None:
            raise ValueError(f"{self.episode_id}: non-abstained record needs a confidence")

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id, "answer": self.answer,
            "abstained": self.abstained, "confidence": self.confidence,
            "correct": self.correct, "calls": self.calls, "tokens": self.tokens,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "PredictionRecord":
        return cls(episode_id=row["episode_id"], answer=row.get("answer"),
                   abstained=row["abstained"], confidence=row.get("confidence"),
                   correct=row.get("correct"), calls=row.get("calls", 0),
                   tokens=row.get("tokens", 0))


def scored_records(records: Sequence[PredictionRecord]) -> list[PredictionRecord]:
    return [r for r in records
            if not r.abstained and r.confidence is not None and r.correct is not None]


def accuracy(records: Sequence[PredictionRecord]) -> float:
    graded = [r for r in records if r.correct is not None]
    if not graded:
        return 0.0
    return sum(1 for r in graded if r.correct and not r.abstained) / len(graded)


def coverage(records: Sequence[PredictionRecord]) -> float:
    if not records:
        return 0.0
    return sum(1 for r in records if not r.abstained) / len(records)


def ece(records: Sequence[PredictionRecord], bins: int = 15) -> float:
    """Expected calibration error over equal-width confidence bins."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    rows = scored_records(records)
    if not rows:
        return 0.0
    conf = np.array([r.confidence for r in rows], dtype=float)
    hit = np.array([1.0 if r.correct else 0.0 for r in rows])
    index = np.minimum((conf * bins).astype(int), bins - 1)
    total = 0.0
    for b in range(bins):
        mask = index == b
        count = int(mask.sum())
        if count == 0:
            continue
        total += (count / len(rows)) * abs(hit[mask].mean() - conf[mask].mean())
    return float(total)


def brier(records: Sequence[PredictionRecord]) -> float:
    """Mean squared gap between confidence and correctness."""
    rows = scored_records(records)
    if not rows:
        return 0.0
    conf = np.array([r.confidence for r in rows], dtype=float)
    hit = np.array([1.0 if r.correct else 0.0 for r in rows])
    return float(np.mean((conf - hit) ** 2))


def _by_confidence(rows: list[PredictionRecord]) -> list[PredictionRecord]:
    return sorted(rows, key=lambda r: (-r.confidence, r.episode_id))


def aurc(records: Sequence[PredictionRecord]) -> float:
    """Area under the risk-coverage curve, trapezoid over coverage k/n.

    The curve is anchored at coverage 0 with the risk of the single most
    confident record, so a fully wrong set scores exactly 1.
    """
    rows = _by_confidence(scored_records(records))
    n = len(rows)
    if n == 0:
        return 0.0
    risks = []
    errors = 0
    for k, row in enumerate(rows, start=1):
        errors += 0 if row.correct else 1
        risks.append(errors / k)
    area = risks[0] / n
    for k in range(1, n):
        area += (risks[k] + risks[k - 1]) / 2 / n
    return float(area)


def selective_curve(records: Sequence[PredictionRecord]) -> list[tuple[float, float]]:
    """(coverage, selective accuracy) at every confidence-ranked cut."""
    rows = _by_confidence(scored_records(records))
    n = len(rows)
    points = []
    hits = 0
    for k, row in enumerate(rows, start=1):
        hits += 1 if row.correct else 0
        points.append((k / n, hits / k))
    return points


def bootstrap_ci(metric: Callable[[list[PredictionRecord]], float],
                 records: Sequence[PredictionRecord], resamples: int = 1000,
                 level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Seeded percentile interval from resamples with replacement."""
    if not records:
        raise ValueError("cannot bootstrap an empty record set")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    rng = random.Random(seed)
    rows = list(records)
    n = len(rows)
    stats = []
    for _ in range(resamples):
        sample = [rows[rng.randrange(n)] for _ in range(n)]
        stats.append(metric(sample))
    tail = (1.0 - level) / 2.0 * 100.0
    lo, hi = np.percentile(np.array(stats, dtype=float), [tail, 100.0 - tail])
    return float(lo), float(hi)


@dataclass(frozen=True)
class RepairOutcome:
    """Rates over repair-triggered trajectories; absent when nothing was repaired."""

    rescue_rate: float | None
    hurt_rate: float | None
    net_gain: int | None


def rescue_hurt(pairs: Sequence[tuple[bool, bool]]) -> RepairOutcome:
    """Pairs of (correct before repair, correct after repair).

    Rescue rate is the fixed fraction of the initially wrong; hurt rate the
    corrupted fraction of the initially right. An empty denominator reports
    0 for that side; no repairs at all reports absent rates.
    """
    if not pairs:
        return RepairOutcome(None, None, None)
    rescued = sum(1 for pre, post in pairs if not pre and post)
    harmed = sum(1 for pre, post in pairs if pre and not post)
    wrong_before = sum(1 for pre, _ in pairs if not pre)
    right_before = len(pairs) - wrong_before
    return RepairOutcome(
        rescue_rate=rescued / wrong_before if wrong_before else 0.0,
        hurt_rate=harmed / right_before if right_before else 0.0,
        net_gain=rescued - harmed,
    )


def normalized_entropy(labels: Sequence[str]) -> float:
    """Shannon entropy of the label distribution, normalized by log(len)."""
    if len(labels) <= 1:
        return 0.0
    counts = Counter(labels)
    total = len(labels)
    entropy = -sum((c / total) * math.log(c / total) for c in counts.values())
    return entropy / math.log(total)


@dataclass(frozen=True)
class AuditRecord:
    """One pruned branch judged in hindsight by the relaxed-pruning shadow run."""

    episode_id: str
    node_id: int
    hindsight_productive: bool
    original_rank: int | None = None
    hindsight_rank: int | None = None


def rank_agreement_gap(correct_by_rank: Sequence[bool]) -> float | None:
    """Normalized Kendall-tau distance between a value ranking and hindsight.

    Input is correctness ordered by the controller's ranking (best first).
    Distance is the fraction of cross-outcome pairs the controller ordered
    wrong way around; None when every outcome agrees.
    """
    discordant = 0
    comparable = 0
    flags = list(correct_by_rank)
    for i in range(len(flags)):
        for j in range(i + 1, len(flags)):
            if flags[i] == flags[j]:
                continue
            comparable += 1
            if not flags[i] and flags[j]:
                discordant += 1
    if comparable == 0:
        return None
    return discordant / comparable


@dataclass(frozen=True)
class AuditSummary:
    prune_precision: float | None
    false_prune_rate: float
    oracle_gap: float | None
    pruned_count: int


def pruning_audit(records: Sequence[AuditRecord],
                  topk_correctness: Sequence[Sequence[bool]] = ()) -> AuditSummary:
    """Prune precision, false-prune rate, and the rank-agreement oracle gap.

    With no pruned branches at all the false-prune rate is 0 by vacuity and
    precision is reported absent.
    """
    pruned = len(records)
    if pruned == 0:
        precision: float | None = None
        false_rate = 0.0
    else:
        productive = sum(1 for r in records if r.hindsight_productive)
        precision = (pruned - productive) / pruned
        false_rate = productive / pruned
    gaps = [g for g in (rank_agreement_gap(flags) for flags in topk_correctness)
            if g is not None]
    gap = sum(gaps) / len(gaps) if gaps else None
    return AuditSummary(prune_precision=precision, false_prune_rate=false_rate,
                        oracle_gap=gap, pruned_count=pruned)


TRIAGE_CATEGORIES = ("F1", "F2", "F3", "F4")


@dataclass(frozen=True)
class TriageCase:
    """Signals needed to label one failed episode."""

    episode_id: str
    failed: bool
    budget_exhausted: bool = False
    best_below_stop: bool = True
    topk_answers: tuple[str, ...] = ()
    shadow_solved_and_pruned: bool = False   # shadow run succeeds where a branch was cut
    outranked_correct: bool = False          # a wrong leaf beat a generated correct one
    baselines_all_failed: bool = False


def triage_label(case: TriageCase, entropy_threshold: float = 0.8) -> str | None:
    """First-match assignment in order F3, F2, F1, F4; F4 absorbs the rest."""
    if not case.failed:
        return None
    if case.shadow_solved_and_pruned:
        return "F3"
    if case.outranked_correct:
        return "F2"
    if (case.budget_exhausted and case.best_below_stop
            and normalized_entropy(case.topk_answers) > entropy_threshold):
        return "F1"
    return "F4"


def failure_triage(cases: Sequence[TriageCase],
                   entropy_threshold: float = 0.8) -> dict[str, int]:
    """Counts per failure category; categories partition the failed episodes."""
    counts = {name: 0 for name in TRIAGE_CATEGORIES}
    for case in cases:
        label = triage_label(case, entropy_threshold)
        if label is not None:
            counts[label] += 1
    return counts


@dataclass(frozen=True)
class TokenEfficiency:
    acc_per_1k_tokens: float
    delta_tokens_per_point: float | None  # extra tokens per +1 accuracy point vs greedy


def token_efficiency(accuracy_pct: float, avg_tokens: float,
                     greedy_accuracy_pct: float | None = None,
                     greedy_avg_tokens: float | None = None) -> TokenEfficiency:
    per_1k = accuracy_pct / (avg_tokens / 1000.0) if avg_tokens > 0 else 0.0
    delta = None
    if greedy_accuracy_pct is not None and greedy_avg_tokens is not None:
        gain = accuracy_pct - greedy_accuracy_pct
        if gain > 0:
            delta = (avg_tokens - greedy_avg_tokens) / gain
    return TokenEfficiency(acc_per_1k_tokens=per_1k, delta_tokens_per_point=delta)
