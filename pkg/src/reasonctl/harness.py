"""Run orchestration: configs, episode execution, replay, audit, and reports.

A run writes one trace file and one backend transcript per episode plus an
aggregate ``results.json``. Replay re-executes an episode against the
recorded transcript and checks that the final answer, value, and ledger
summary come out identical. The audit re-runs episodes with pruning relaxed
(the shadow run) to judge pruned branches in hindsight, and triage labels
failed episodes with the F1-F4 taxonomy.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .answers import (AnswerKind, Problem, ProblemView, extract_answer, load_problems,
                      looks_final)
from .backends.base import Backend, DecodingParams, GenerationRequest, RequestKind
from .backends.http import HttpBackend, HttpBackendConfig
from .backends.sim import SimBackend, SimWorld, SimWorldConfig
from .backends.transcript import TranscriptRecorder, TranscriptReplayBackend
from .baselines import best_of_n, greedy_cot, hybrid_cascade, vanilla_tot
from .budget import BudgetLedger, Category, Charge
from .controller import ControllerConfig, EpisodeResult, run_episode
from .evaluation import (AuditRecord, PredictionRecord, TriageCase, accuracy, aurc,
                         bootstrap_ci, brier, coverage, ece, failure_triage,
                         pruning_audit, rescue_hurt, selective_curve, token_efficiency,
                         triage_label)
from .oracle import ParseFailure, parse_confidence
from .trace import EventKind, TraceEvent, TraceWriter, read_trace

POLICIES = ("controller", "greedy_cot", "best_of_n", "vanilla_tot", "cascade")
BACKENDS = ("sim", "http", "replay")


@dataclass
class RunConfig:
    """Everything a run needs; controller hyperparameters default to the
    standard operating point and are stored machine-readable in config.json."""

    policy: str = "controller"
    backend: str = "sim"
    output_dir: str = "runs/latest"
    dataset: str | None = None          # JSONL problems; None = sim-generated set
    n_problems: int = 20
    seeds: tuple[int, ...] = (0,)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    sim: SimWorldConfig = field(default_factory=SimWorldConfig)
    http: HttpBackendConfig | None = None
    replay_transcripts: str | None = None
    best_of: int = 16
    tot_fanout: int = 3
    tot_beam: int = 2
    fallback_enabled: bool = False
    fallback_calls: int = 16
    confidence_probe: bool = True
    record_transcripts: bool = True
    workers: int = 1
    deterministic_time: bool = True

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if self.backend == "http" and self.http is None:
            raise ValueError("http backend requires endpoint settings")
        if self.backend == "replay" and self.replay_transcripts is None:
            raise ValueError("replay backend requires a transcript directory")
        self.seeds = tuple(int(s) for s in self.seeds)

    def to_dict(self) -> dict:
        row = {
            "policy": self.policy,
            "backend": self.backend,
            "output_dir": self.output_dir,
            "dataset": self.dataset,
            "n_problems": self.n_problems,
            "seeds": list(self.seeds),
            "controller": self.controller.to_dict(),
            "sim": vars(self.sim).copy(),
            "best_of": self.best_of,
            "tot_fanout": self.tot_fanout,
            "tot_beam": self.tot_beam,
            "fallback_enabled": self.fallback_enabled,
            "fallback_calls": self.fallback_calls,
            "confidence_probe": self.confidence_probe,
            "record_transcripts": self.record_transcripts,
            "workers": self.workers,
            "deterministic_time": self.deterministic_time,
            "replay_transcripts": self.replay_transcripts,
        }
        if self.http is not None:
            row["http"] = {
                "endpoint": self.http.endpoint, "model": self.http.model,
                "api_key_env": self.http.api_key_env, "timeout": self.http.timeout,
                "transport_retries": self.http.transport_retries,
            }
        return row

    @classmethod
    def from_dict(cls, row: dict) -> "RunConfig":
        data = dict(row)
        if "controller" in data and isinstance(data["controller"], dict):
            data["controller"] = ControllerConfig.from_dict(data["controller"])
        if "sim" in data and isinstance(data["sim"], dict):
            sim_row = dict(data["sim"])
            for key in ("correct_base", "defect_base"):
                if key in sim_row:
                    sim_row[key] = tuple(sim_row[key])
            data["sim"] = SimWorldConfig(**sim_row)
        if "http" in data and isinstance(data["http"], dict):
            data["http"] = HttpBackendConfig(**data["http"])
        if "seeds" in data:
            data["seeds"] = tuple(data["seeds"])
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def episode_key(problem_id: str, seed: int) -> str:
    return f"{problem_id}-s{seed}"


def _resolve_problems(config: RunConfig) -> list[Problem]:
    if config.dataset is not None:
        return load_problems(config.dataset)
    if config.backend != "sim":
        raise ValueError("a dataset file is required for non-sim backends")
    return SimWorld(config.sim).make_problems(config.n_problems)


def _base_backend(config: RunConfig) -> Backend:
    if config.backend == "sim":
        return SimBackend(SimWorld(config.sim))
    if config.backend == "http":
        return HttpBackend(config.http)
    raise ValueError("replay runs construct their backend per episode")


def _policy_call(config: RunConfig, view: ProblemView, backend: Backend,
                 ledger: BudgetLedger, trace: TraceWriter, episode_id: str,
                 seed: int) -> EpisodeResult:
    name = config.policy
    fallback = config.fallback_enabled or name == "cascade"
    if name == "cascade":
        name = "controller"

    def primary(problem, be, led, trace=None, episode_id="", seed=0):
        if name == "controller":
            return run_episode(problem, be, config.controller, led, trace=trace,
                               episode_id=episode_id, seed=seed)
        if name == "greedy_cot":
            return greedy_cot(problem, be, led, trace=trace,
                              episode_id=episode_id, seed=seed)
        if name == "best_of_n":
            return best_of_n(problem, be, led, trace=trace, episode_id=episode_id,
                             seed=seed, n=config.best_of)
        return vanilla_tot(problem, be, led, trace=trace, episode_id=episode_id,
                           seed=seed, fanout=config.tot_fanout, beam=config.tot_beam,
                           max_depth=config.controller.max_depth)

    if fallback:
        return hybrid_cascade(view, backend, ledger, primary,
                              abstain_below=config.controller.abstain_below,
                              fallback_calls=config.fallback_calls,
                              trace=trace, episode_id=episode_id, seed=seed)
    return primary(view, backend, ledger, trace=trace, episode_id=episode_id, seed=seed)


def _probe_confidence(view: ProblemView, chain: str, backend: Backend,
                      seed: int) -> float:
    """Offline verify-style confidence for policies that report none.

    Charged to a one-call diagnostics ledger so episode budget parity is
    untouched; a second constrained attempt is not issued here.
    """
    ledger = BudgetLedger(1)
    request = GenerationRequest(kind=RequestKind.VERIFY_CONFIDENCE, problem_id=view.id,
                                problem=view.prompt, trajectory_context=chain,
                                decoding=DecodingParams.meta_level(), seed=seed)
    raw = backend.invoke(request, ledger.charge(Category.VERIFY)).text
    try:
        return parse_confidence(raw)
    except ParseFailure:
        return 0.0


@dataclass
class EpisodeRow:
    episode_id: str
    problem_id: str
    seed: int
    result: EpisodeResult
    ledger_summary: dict

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id, "problem_id": self.problem_id,
            "seed": self.seed, "result": self.result.to_dict(),
            "ledger": self.ledger_summary,
        }


@dataclass
class SuiteResult:
    run_dir: Path
    records: list[PredictionRecord]
    episodes: list[EpisodeRow]

    @property
    def results_path(self) -> Path:
        return self.run_dir / "results.json"


def _run_one(config: RunConfig, problem: Problem, seed: int,
             shared_backend: Backend | None, run_dir: Path) -> tuple[PredictionRecord, EpisodeRow]:
    episode_id = episode_key(problem.id, seed)
    trace_path = run_dir / "traces" / f"{episode_id}.ndjson"
    backend: Backend
    if config.backend == "replay":
        backend = TranscriptReplayBackend(
            Path(config.replay_transcripts) / f"{episode_id}.jsonl")
    else:
        backend = shared_backend
    recorder = None
    if config.record_transcripts and config.backend != "replay":
        recorder = TranscriptRecorder(backend, run_dir / "transcripts" / f"{episode_id}.jsonl")
        backend = recorder
    with TraceWriter(episode_id, path=trace_path,
                     logical_clock=config.deterministic_time) as trace:
        def on_charge(charge: Charge) -> None:
            trace.emit(EventKind.CHARGE, {
                "category": charge.category.value, "calls": charge.calls,
                "tokens_in": charge.tokens_in, "tokens_out": charge.tokens_out,
            })

        ledger = BudgetLedger(config.controller.budget, on_charge=on_charge)
        view = problem.view()
        result = _policy_call(config, view, backend, ledger, trace, episode_id, seed)
        confidence = result.confidence
        if (config.confidence_probe and confidence is None and not result.abstained
                and result.final_chain):
            confidence = _probe_confidence(view, result.final_chain, backend, seed)
            trace.emit(EventKind.VERIFY, {"probe": True, "confidence": confidence})
            result = replace(result, confidence=confidence)
    if recorder is not None:
        recorder.close()
    summary = ledger.summary()
    correct = None
    if problem.gold is not None:
        correct = (not result.abstained) and result.answer == problem.gold
    record = PredictionRecord(
        episode_id=episode_id,
        answer=None if result.abstained else result.answer,
        abstained=result.abstained,
        confidence=None if result.abstained else confidence,
        correct=correct,
        calls=summary.total_calls,
        tokens=summary.tokens_total,
    )
    return record, EpisodeRow(episode_id, problem.id, seed, result, summary.to_dict())


def run_suite(config: RunConfig) -> SuiteResult:
    """Execute the configured policy over every problem x seed pair."""
    run_dir = Path(config.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "traces").mkdir(exist_ok=True)
    if config.record_transcripts and config.backend != "replay":
        (run_dir / "transcripts").mkdir(exist_ok=True)
    problems = _resolve_problems(config)
    shared = None if config.backend == "replay" else _base_backend(config)
    jobs = [(problem, seed) for problem in problems for seed in config.seeds]
    outcomes: list[tuple[PredictionRecord, EpisodeRow]] = []
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_one, config, p, s, shared, run_dir)
                       for p, s in jobs]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_one(config, p, s, shared, run_dir) for p, s in jobs]
    outcomes.sort(key=lambda pair: pair[0].episode_id)
    records = [record for record, _ in outcomes]
    episodes = [row for _, row in outcomes]
    with open(run_dir / "config.json", "w", encoding="utf-8") as handle:
        json.dump(config.to_dict(), handle, indent=2, sort_keys=True)
    with open(run_dir / "results.json", "w", encoding="utf-8") as handle:
        json.dump({
            "config": config.to_dict(),
            "records": [r.to_dict() for r in records],
            "episodes": [e.to_dict() for e in episodes],
        }, handle, indent=2, sort_keys=True)
    return SuiteResult(run_dir=run_dir, records=records, episodes=episodes)


def load_results(run_dir: str | Path) -> dict:
    with open(Path(run_dir) / "results.json", "r", encoding="utf-8") as handle:
        return json.load(handle)


@dataclass
class ReplayCheck:
    episode_id: str
    matched: bool
    diffs: list[str]


def replay_episode(run_dir: str | Path, episode_id: str) -> ReplayCheck:
    """Re-execute one episode from its transcript and compare the outcome."""
    run_dir = Path(run_dir)
    results = load_results(run_dir)
    config = RunConfig.from_dict(results["config"])
    stored = next((e for e in results["episodes"] if e["episode_id"] == episode_id), None)
    if stored is None:
        raise KeyError(f"episode {episode_id} not found in {run_dir}")
    problems = {p.id: p for p in _resolve_problems(config)}
    problem = problems[stored["problem_id"]]
    replay_config = replace(
        config,
        backend="replay",
        replay_transcripts=str(run_dir / "transcripts"),
        record_transcripts=False,
        output_dir=str(run_dir / "replay"),
    )
    backend = TranscriptReplayBackend(run_dir / "transcripts" / f"{episode_id}.jsonl")
    with TraceWriter(episode_id, logical_clock=True) as trace:
        ledger = BudgetLedger(replay_config.controller.budget)
        result = _policy_call(replay_config, problem.view(), backend, ledger, trace,
                              episode_id, stored["seed"])
        confidence = result.confidence
        if (replay_config.confidence_probe and confidence is None
                and not result.abstained and result.final_chain):
            confidence = _probe_confidence(problem.view(), result.final_chain,
                                           backend, stored["seed"])
            result = replace(result, confidence=confidence)
    diffs = []
    recorded = stored["result"]
    if result.answer != recorded["answer"]:
        diffs.append(f"answer: {result.answer!r} != {recorded['answer']!r}")
    if result.abstained != recorded["abstained"]:
        diffs.append(f"abstained: {result.abstained} != {recorded['abstained']}")
    if result.best_value != recorded["best_value"]:
        diffs.append(f"best_value: {result.best_value} != {recorded['best_value']}")
    fresh = ledger.summary().to_dict()
    if fresh != stored["ledger"]:
        diffs.append(f"ledger summary mismatch: {fresh} != {stored['ledger']}")
    return ReplayCheck(episode_id=episode_id, matched=not diffs, diffs=diffs)


# -- trace reconstruction ------------------------------------------------------


@dataclass
class TraceTree:
    """Tree facts reconstructed from an episode trace."""

    thoughts: dict[int, str]
    parents: dict[int, int | None]
    values: dict[int, float]
    pruned: set[int]
    children: dict[int, list[int]]

    def path_thoughts(self, node_id: int) -> tuple[str, ...]:
        path = []
        cur: int | None = node_id
        while cur is not None and cur in self.thoughts:
            path.append(self.thoughts[cur])
            cur = self.parents.get(cur)
        return tuple(reversed(path))

    def leaves(self) -> list[int]:
        return [nid for nid in self.thoughts if not self.children.get(nid)]

    def descendants(self, node_id: int) -> list[int]:
        out = []
        stack = list(self.children.get(node_id, []))
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(self.children.get(nid, []))
        return out

    def completed_answer(self, node_id: int, problem: Problem) -> str | None:
        """Extracted answer of a trajectory, only when its leaf looks final."""
        thoughts = self.path_thoughts(node_id)
        if not thoughts or not looks_final(thoughts[-1]):
            return None
        return extract_answer("\n".join(thoughts), problem.kind, problem.choices)


def rebuild_tree(events: list[TraceEvent]) -> TraceTree:
    thoughts: dict[int, str] = {}
    parents: dict[int, int | None] = {}
    values: dict[int, float] = {}
    pruned: set[int] = set()
    children: dict[int, list[int]] = {}
    for event in events:
        payload = event.payload
        if event.kind is EventKind.GENERATE and "node" in payload:
            node = payload["node"]
            thoughts[node] = payload["thought"]
            parent = payload.get("parent")
            parents[node] = parent if parent != 0 else None
            if parent is not None and parent != 0:
                children.setdefault(parent, []).append(node)
        elif event.kind is EventKind.REPAIR and not payload.get("abandoned", True):
            node = payload["new_node"]
            thoughts[node] = payload["new_thought"]
            attach = payload.get("attach")
            parents[node] = attach if attach != 0 else None
            if attach is not None and attach != 0:
                children.setdefault(attach, []).append(node)
        elif event.kind is EventKind.ACTION:
            values[payload["node"]] = payload["value"]
            if payload.get("action") == "prune":
                pruned.add(payload["node"])
    return TraceTree(thoughts=thoughts, parents=parents, values=values,
                     pruned=pruned, children=children)


def repair_pairs_from_trace(events: list[TraceEvent], problem: Problem) -> list[tuple[bool, bool]]:
    """(pre-correct, post-correct) for every applied repair in one episode.

    The pre outcome is the replaced trajectory's answer; the post outcome
    follows the repaired branch to its eventual completion, since a repaired
    span in the middle of a trajectory only pays off after later expansion.
    """
    tree = rebuild_tree(events)
    pairs = []
    for event in events:
        if event.kind is not EventKind.REPAIR or event.payload.get("abandoned", True):
            continue
        payload = event.payload
        prefix = list(payload["prefix_before"])
        old_suffix = list(payload["old_suffix"])
        before = False
        if old_suffix and looks_final(old_suffix[-1]):
            before_chain = "\n".join(prefix + old_suffix)
            before = extract_answer(before_chain, problem.kind,
                                    problem.choices) == problem.gold
        new_node = payload["new_node"]
        branch = [new_node] + tree.descendants(new_node)
        after = any(tree.completed_answer(nid, problem) == problem.gold
                    for nid in branch)
        pairs.append((before, after))
    return pairs


def scored_leaves(events: list[TraceEvent], problem: Problem) -> list[tuple[int, float, bool]]:
    """(node, value, correct) for every scored leaf of the reconstructed tree."""
    tree = rebuild_tree(events)
    rows = []
    for nid in tree.leaves():
        if nid not in tree.values:
            continue
        correct = tree.completed_answer(nid, problem) == problem.gold
        rows.append((nid, tree.values[nid], correct))
    return rows


# -- shadow audit ---------------------------------------------------------------


@dataclass
class AuditReport:
    prune_precision: float | None
    false_prune_rate: float
    oracle_gap: float | None
    pruned_count: int
    shadow_solved: dict[str, bool]
    records: list[AuditRecord]

    def to_dict(self) -> dict:
        return {
            "prune_precision": self.prune_precision,
            "false_prune_rate": self.false_prune_rate,
            "oracle_gap": self.oracle_gap,
            "pruned_count": self.pruned_count,
            "shadow_solved": self.shadow_solved,
            "records": [vars(r) for r in self.records],
        }


def shadow_audit(run_dir: str | Path, relaxed_prune_below: float = 0.0,
                 top_k: int = 4, subset: set[str] | None = None) -> AuditReport:
    """Relaxed-pruning shadow re-execution plus hindsight pruning metrics.

    A pruned branch counts as productive when the shadow run grows a correct
    completed trajectory through the same path prefix. Only simulated runs
    can be shadowed (the world must be re-executable).
    """
    run_dir = Path(run_dir)
    results = load_results(run_dir)
    config = RunConfig.from_dict(results["config"])
    if config.backend != "sim":
        raise ValueError("shadow audit requires the simulated backend")
    problems = {p.id: p for p in _resolve_problems(config)}
    shadow_controller = replace(config.controller, prune_below=relaxed_prune_below)
    backend = SimBackend(SimWorld(config.sim))
    audit_records: list[AuditRecord] = []
    rankings: list[list[bool]] = []
    shadow_solved: dict[str, bool] = {}
    for episode in results["episodes"]:
        episode_id = episode["episode_id"]
        if subset is not None and episode_id not in subset:
            continue
        problem = problems[episode["problem_id"]]
        events = read_trace(run_dir / "traces" / f"{episode_id}.ndjson")
        original = rebuild_tree(events)
        # shadow run with relaxed pruning, same world and sampling seed
        with TraceWriter(episode_id + "-shadow", logical_clock=True) as shadow_trace:
            shadow_ledger = BudgetLedger(shadow_controller.budget)
            shadow_result = run_episode(problem.view(), backend, shadow_controller,
                                        shadow_ledger, trace=shadow_trace,
                                        episode_id=episode_id + "-shadow",
                                        seed=episode["seed"])
            shadow_tree = rebuild_tree(shadow_trace.events)
        solved = (not shadow_result.abstained
                  and shadow_result.answer == problem.gold)
        shadow_solved[episode_id] = solved
        # match pruned branches to shadow trajectories by path-text prefix
        correct_paths = []
        for nid in shadow_tree.leaves():
            if shadow_tree.completed_answer(nid, problem) == problem.gold:
                correct_paths.append(shadow_tree.path_thoughts(nid))
        leaf_rows = sorted(scored_leaves(events, problem),
                           key=lambda row: (-row[1], row[0]))
        surviving = [row for row in leaf_rows if row[0] not in original.pruned]
        rankings.append([correct for _, _, correct in surviving[:top_k]])
        value_order = [nid for nid, _, _ in leaf_rows]
        for node_id in sorted(original.pruned):
            prefix = original.path_thoughts(node_id)
            productive = any(path[: len(prefix)] == prefix for path in correct_paths)
            original_rank = (value_order.index(node_id) + 1
                             if node_id in value_order else None)
            audit_records.append(AuditRecord(
                episode_id=episode_id, node_id=node_id,
                hindsight_productive=productive, original_rank=original_rank,
                hindsight_rank=None))
    summary = pruning_audit(audit_records, rankings)
    # hindsight rank: productive branches first, then original order
    ordered = sorted(audit_records,
                     key=lambda r: (not r.hindsight_productive,
                                    r.original_rank or 10 ** 9))
    ranked = [replace(r, hindsight_rank=i + 1) for i, r in enumerate(ordered)]
    by_key = {(r.episode_id, r.node_id): r for r in ranked}
    audit_records = [by_key[(r.episode_id, r.node_id)] for r in audit_records]
    return AuditReport(prune_precision=summary.prune_precision,
                       false_prune_rate=summary.false_prune_rate,
                       oracle_gap=summary.oracle_gap,
                       pruned_count=summary.pruned_count,
                       shadow_solved=shadow_solved, records=audit_records)


# -- failure triage -------------------------------------------------------------


def build_triage_cases(run_dir: str | Path, baseline_run_dirs: list[str | Path],
                       audit: AuditReport | None = None,
                       top_k: int = 4) -> list[TriageCase]:
    run_dir = Path(run_dir)
    results = load_results(run_dir)
    config = RunConfig.from_dict(results["config"])
    problems = {p.id: p for p in _resolve_problems(config)}
    baseline_failures: dict[str, list[bool]] = {}
    for base_dir in baseline_run_dirs:
        base = load_results(base_dir)
        for row in base["records"]:
            pid = row["episode_id"].rsplit("-s", 1)[0]
            baseline_failures.setdefault(pid, []).append(not row.get("correct"))
    cases = []
    for record_row, episode in zip(results["records"], results["episodes"]):
        episode_id = episode["episode_id"]
        problem = problems[episode["problem_id"]]
        correct = record_row.get("correct")
        failed = correct is False
        events = read_trace(run_dir / "traces" / f"{episode_id}.ndjson")
        leaf_rows = sorted(scored_leaves(events, problem),
                           key=lambda row: (-row[1], row[0]))
        topk_answers = []
        tree = rebuild_tree(events)
        for nid, _, _ in leaf_rows[:top_k]:
            chain = "\n".join(tree.path_thoughts(nid))
            answer = extract_answer(chain, problem.kind, problem.choices)
            topk_answers.append(answer if answer is not None else "<none>")
        ledger_row = episode["ledger"]
        remaining = ledger_row["capacity"] - ledger_row["total_calls"]
        best_value = episode["result"].get("best_value")
        chosen_wrong = (not episode["result"]["abstained"]
                        and episode["result"]["answer"] != problem.gold)
        correct_leaf_exists = any(flag for _, _, flag in leaf_rows)
        shadow_hit = False
        if audit is not None:
            productive_here = any(r.hindsight_productive for r in audit.records
                                  if r.episode_id == episode_id)
            shadow_hit = audit.shadow_solved.get(episode_id, False) and productive_here
        fails = baseline_failures.get(episode["problem_id"], [])
        cases.append(TriageCase(
            episode_id=episode_id,
            failed=failed,
            budget_exhausted=remaining < 3,
            best_below_stop=(best_value is None
                             or best_value < config.controller.stop_above),
            topk_answers=tuple(topk_answers),
            shadow_solved_and_pruned=shadow_hit,
            outranked_correct=chosen_wrong and correct_leaf_exists,
            baselines_all_failed=bool(fails) and all(fails),
        ))
    return cases


# -- reporting -------------------------------------------------------------------


def build_report(run_dir: str | Path, bootstrap_resamples: int = 1000,
                 bootstrap_seed: int = 0) -> dict:
    results = load_results(run_dir)
    records = [PredictionRecord.from_dict(row) for row in results["records"]]
    scored = [r for r in records if r.correct is not None]
    report: dict = {
        "n_episodes": len(records),
        "accuracy": accuracy(records),
        "coverage": coverage(records),
        "abstention_rate": 1.0 - coverage(records),
        "avg_calls": (sum(r.calls for r in records) / len(records)) if records else 0.0,
        "avg_tokens": (sum(r.tokens for r in records) / len(records)) if records else 0.0,
    }
    if scored:
        for name, metric in (("ece", ece), ("brier", brier), ("aurc", aurc)):
            value = metric(records)
            lo, hi = bootstrap_ci(metric, records, resamples=bootstrap_resamples,
                                  seed=bootstrap_seed)
            report[name] = {"value": value, "ci95": [lo, hi]}
        report["selective_curve"] = selective_curve(records)
        eff = token_efficiency(report["accuracy"] * 100.0, report["avg_tokens"])
        report["acc_per_1k_tokens"] = eff.acc_per_1k_tokens
    return report


def write_report(run_dir: str | Path, out_dir: str | Path | None = None,
                 bootstrap_resamples: int = 1000) -> Path:
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir else run_dir
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(run_dir, bootstrap_resamples=bootstrap_resamples)
    with open(out / "report.json", "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
    curve = report.get("selective_curve", [])
    with open(out / "risk_coverage.csv", "w", encoding="utf-8") as handle:
        handle.write("coverage,selective_accuracy,risk\n")
        for cov, acc in curve:
            handle.write(f"{cov:.6f},{acc:.6f},{1.0 - acc:.6f}\n")
    return out / "report.json"
