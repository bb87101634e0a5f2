"""Budget-matched comparison policies.

Greedy CoT spends exactly one call; Best-of-N spends exactly N; vanilla
tree search spends the whole budget on blind expansion plus one final
verify call; the hybrid cascade runs a primary policy and routes abstained
or low-confidence episodes to a fallback pass under an extended budget.
"""

from __future__ import annotations

from collections import Counter
from typing import Callable, Protocol

from .answers import ProblemView, extract_answer, looks_final
from .backends.base import Backend, DecodingParams, GenerationRequest, RequestKind
from .backends.prompts import render_trajectory
from .budget import BudgetLedger, Category
from .controller import EpisodeResult
from .oracle import ParseFailure, parse_confidence
from .trace import EventKind, TraceWriter
from .tree import STRATEGY_ORDER


class Policy(Protocol):
    def __call__(self, problem: ProblemView, backend: Backend, ledger: BudgetLedger,
                 trace: TraceWriter | None = None, episode_id: str = "",
                 seed: int = 0) -> EpisodeResult: ...


def _trace_or_null(trace: TraceWriter | None, episode_id: str,
                   problem: ProblemView) -> TraceWriter:
    return trace if trace is not None else TraceWriter(episode_id or problem.id)


def _sample_chain(problem: ProblemView, backend: Backend, ledger: BudgetLedger,
                  trace: TraceWriter, decoding: DecodingParams, attempt: int,
                  seed: int, category: Category = Category.GENERATION) -> str:
    request = GenerationRequest(kind=RequestKind.FALLBACK_SAMPLE, problem_id=problem.id,
                                problem=problem.prompt, decoding=decoding,
                                attempt=attempt, seed=seed)
    token = ledger.charge(category)
    response = backend.invoke(request, token)
    trace.emit(EventKind.GENERATE, {
        "sample": attempt, "fingerprint": request.fingerprint(), "text": response.text,
    })
    return response.text


def greedy_cot(problem: ProblemView, backend: Backend, ledger: BudgetLedger,
               trace: TraceWriter | None = None, episode_id: str = "",
               seed: int = 0) -> EpisodeResult:
    """Single deterministic chain; exactly one budgeted call."""
    trace = _trace_or_null(trace, episode_id, problem)
    text = _sample_chain(problem, backend, ledger, trace,
                         DecodingParams.greedy(), attempt=1, seed=seed)
    answer = extract_answer(text, problem.kind, problem.choices)
    trace.emit(EventKind.STOP, {"reason": "single_chain", "answer": answer})
    return EpisodeResult(trace.episode_id, answer=answer, abstained=False,
                         candidate_answer=answer, final_chain=text)


def best_of_n(problem: ProblemView, backend: Backend, ledger: BudgetLedger,
              trace: TraceWriter | None = None, episode_id: str = "", seed: int = 0,
              n: int = 16, category: Category = Category.GENERATION) -> EpisodeResult:
    """N independent sampled chains, majority vote over normalized answers.

    Ties go to the answer sampled first; chains with no extractable answer do
    not vote.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    trace = _trace_or_null(trace, episode_id, problem)
    chains: list[str] = []
    answers: list[str | None] = []
    for sample in range(1, n + 1):
        text = _sample_chain(problem, backend, ledger, trace,
                             DecodingParams.object_level(), attempt=sample,
                             seed=seed, category=category)
        chains.append(text)
        answers.append(extract_answer(text, problem.kind, problem.choices))
    votes = Counter(a for a in answers if a is not None)
    if not votes:
        trace.emit(EventKind.ABSTAIN, {"reason": "no_parseable_answer"})
        return EpisodeResult(trace.episode_id, answer=None, abstained=True)
    top = max(votes.values())
    winner_index = next(i for i, a in enumerate(answers)
                        if a is not None and votes[a] == top)
    winner = answers[winner_index]
    trace.emit(EventKind.STOP, {"reason": "majority_vote", "answer": winner,
                                "votes": dict(votes)})
    return EpisodeResult(trace.episode_id, answer=winner, abstained=False,
                         candidate_answer=winner, final_chain=chains[winner_index])


def vanilla_tot(problem: ProblemView, backend: Backend, ledger: BudgetLedger,
                trace: TraceWriter | None = None, episode_id: str = "", seed: int = 0,
                fanout: int = 3, beam: int = 2, max_depth: int = 12) -> EpisodeResult:
    """Breadth-limited blind tree expansion; no oracle, no pruning thresholds.

    The whole budget goes to generation except one final verify-style call
    that supplies the reported confidence for the chosen leaf. Beam selection
    is blind (creation order), which is exactly what separates this baseline
    from the controller.
    """
    trace = _trace_or_null(trace, episode_id, problem)
    beams: list[list[str]] = [[]]
    complete: list[list[str]] = []
    deepest: list[str] = []
    depth = 0
    while beams and ledger.remaining > 1 and depth < max_depth:
        next_level: list[list[str]] = []
        for path in beams:
            for slot in range(fanout):
                if ledger.remaining <= 1:
                    break
                strategy = STRATEGY_ORDER[slot % len(STRATEGY_ORDER)]
                request = GenerationRequest(
                    kind=RequestKind.GENERATE, problem_id=problem.id,
                    problem=problem.prompt,
                    trajectory_context=render_trajectory(path),
                    strategy=strategy, decoding=DecodingParams.object_level(),
                    attempt=1 + slot // len(STRATEGY_ORDER), seed=seed)
                token = ledger.charge(Category.GENERATION)
                text = backend.invoke(request, token).text.strip()
                trace.emit(EventKind.GENERATE, {
                    "depth": depth + 1, "strategy": strategy.value, "text": text,
                })
                child = path + [text]
                if len(child) > len(deepest):
                    deepest = child
                if looks_final(text):
                    complete.append(child)
                else:
                    next_level.append(child)
        beams = next_level[:beam]
        depth += 1
    chosen = complete[0] if complete else deepest
    confidence = None
    if chosen and ledger.remaining >= 1:
        request = GenerationRequest(kind=RequestKind.VERIFY_CONFIDENCE,
                                    problem_id=problem.id, problem=problem.prompt,
                                    trajectory_context=render_trajectory(chosen),
                                    decoding=DecodingParams.meta_level(), seed=seed)
        token = ledger.charge(Category.VERIFY)
        raw = backend.invoke(request, token).text
        trace.emit(EventKind.VERIFY, {"raw": raw})
        try:
            confidence = parse_confidence(raw)
        except ParseFailure:
            confidence = 0.0
    if not chosen:
        trace.emit(EventKind.ABSTAIN, {"reason": "nothing_generated"})
        return EpisodeResult(trace.episode_id, answer=None, abstained=True)
    answer = extract_answer("\n".join(chosen), problem.kind, problem.choices)
    trace.emit(EventKind.STOP, {"reason": "beam_select", "answer": answer,
                                "confidence": confidence})
    return EpisodeResult(trace.episode_id, answer=answer, abstained=False,
                         confidence=confidence, candidate_answer=answer,
                         final_chain="\n".join(chosen))


def hybrid_cascade(problem: ProblemView, backend: Backend, ledger: BudgetLedger,
                   primary: Policy, fallback: Policy | None = None,
                   abstain_below: float = 0.6, fallback_calls: int = 16,
                   trace: TraceWriter | None = None, episode_id: str = "",
                   seed: int = 0) -> EpisodeResult:
    """Primary policy with a budget-extended fallback pass on low confidence.

    When the primary emits an answer at or above ``abstain_below`` it is
    returned unchanged; otherwise capacity grows once and the fallback's
    answer is final. Fallback defaults to a Best-of-16 vote whose calls are
    charged to the fallback category.
    """
    trace = _trace_or_null(trace, episode_id, problem)
    result = primary(problem, backend, ledger, trace=trace,
                     episode_id=trace.episode_id, seed=seed)
    if result.error is not None:
        return result
    routed = result.abstained or result.confidence is None \
        or result.confidence < abstain_below
    if not routed:
        return result
    ledger.extend_for_fallback(fallback_calls)
    trace.emit(EventKind.FALLBACK_START, {
        "primary_confidence": result.confidence,
        "primary_abstained": result.abstained,
        "capacity": ledger.capacity,
    })
    if fallback is None:
        fb = best_of_n(problem, backend, ledger, trace=trace,
                       episode_id=trace.episode_id, seed=seed,
                       n=fallback_calls, category=Category.FALLBACK)
    else:
        fb = fallback(problem, backend, ledger, trace=trace,
                      episode_id=trace.episode_id, seed=seed)
    return EpisodeResult(trace.episode_id, answer=fb.answer, abstained=fb.abstained,
                         best_value=result.best_value, confidence=fb.confidence,
                         candidate_answer=fb.candidate_answer,
                         final_chain=fb.final_chain, fallback_used=True,
                         error=fb.error)


__all__ = ["Policy", "greedy_cot", "best_of_n", "vanilla_tot", "hybrid_cascade"]
