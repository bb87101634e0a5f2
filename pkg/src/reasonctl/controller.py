"""Meta-level control loop over the reasoning tree.

Per selected frontier node the controller generates up to three children
(direct / decompose / verify), scores each child trajectory with the process
oracle and a verify-style confidence query, fuses the two signals into a
combined value, and applies a deterministic rule policy: stop above the stop
threshold, prune below the prune threshold, repair the earliest unhealthy
step, otherwise keep expanding while budget and depth allow. At budget
exhaustion (or an empty frontier) the best surviving candidate is returned,
or the episode abstains when no survivor is confident enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .answers import ProblemView, extract_answer, looks_final
from .backends.base import (Backend, DecodingParams, GenerationRequest, RequestKind,
                            TransportError)
from .backends.prompts import render_trajectory
from .budget import BudgetExceeded, BudgetLedger, Category, Reservation
from .oracle import (REWARD_WEIGHTS, ConfidenceReport, OracleReport, confidence_with_retry,
                     score_with_retry)
from .trace import EventKind, TraceWriter
from .tree import NodeStatus, ReasoningTree, Strategy, STRATEGY_ORDER

# one expand cycle per child: generation + process score + terminal confidence
CALLS_PER_CHILD = 3

_REPAIR_MODES = ("selective", "all", "off")
_RULES = ("stop", "prune", "repair", "expand")


@dataclass
class ControllerConfig:
    """Run constants; every threshold is fixed before the episode starts."""

    outcome_weight: float = 0.4       # weight on terminal confidence in the fused value
    explore_coef: float = 1.25        # exploration coefficient in the frontier score
    prune_below: float = 0.35
    stop_above: float = 0.90
    step_health_min: float = 0.5      # per-step reward below this triggers repair
    abstain_below: float = 0.6
    budget: int = 16
    max_modes_per_expand: int = 3
    max_depth: int = 12
    max_repairs_per_branch: int = 1
    repair_mode: str = "selective"
    rule_order: tuple[str, ...] = ("stop", "prune", "repair", "expand")
    reward_weights: tuple[float, float, float] = REWARD_WEIGHTS

    def __post_init__(self) -> None:
        for name in ("outcome_weight", "prune_below", "stop_above",
                     "step_health_min", "abstain_below"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if not self.prune_below < self.stop_above:
            raise ValueError("prune threshold must sit below the stop threshold")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not 1 <= self.max_modes_per_expand <= len(STRATEGY_ORDER):
            raise ValueError("max_modes_per_expand must be within the strategy set")
        if self.repair_mode not in _REPAIR_MODES:
            raise ValueError(f"repair_mode must be one of {_REPAIR_MODES}")
        if set(self.rule_order) - set(_RULES):
            raise ValueError(f"unknown rule in rule_order: {self.rule_order}")
        if abs(sum(self.reward_weights) - 1.0) > 1e-9:
            raise ValueError("reward weights must sum to 1")

    def to_dict(self) -> dict:
        return {
            "outcome_weight": self.outcome_weight,
            "explore_coef": self.explore_coef,
            "prune_below": self.prune_below,
            "stop_above": self.stop_above,
            "step_health_min": self.step_health_min,
            "abstain_below": self.abstain_below,
            "budget": self.budget,
            "max_modes_per_expand": self.max_modes_per_expand,
            "max_depth": self.max_depth,
            "max_repairs_per_branch": self.max_repairs_per_branch,
            "repair_mode": self.repair_mode,
            "rule_order": list(self.rule_order),
            "reward_weights": list(self.reward_weights),
        }

    @classmethod
    def from_dict(cls, row: dict) -> "ControllerConfig":
        data = dict(row)
        if "rule_order" in data:
            data["rule_order"] = tuple(data["rule_order"])
        if "reward_weights" in data:
            data["reward_weights"] = tuple(data["reward_weights"])
        return cls(**data)


@dataclass
class MetaState:
    """Fixed-schema control summary of one scored trajectory."""

    strategy: Strategy | None
    depth_norm: float
    process_value: float
    outcome_conf: float
    combined_value: float
    repair_count: int
    min_step_reward: float
    defaulted_fraction: float

    @classmethod
    def build(cls, strategy: Strategy | None, depth: int, cfg: ControllerConfig,
              report: OracleReport, outcome_conf: float, repair_count: int) -> "MetaState":
        return cls(
            strategy=strategy,
            depth_norm=depth / cfg.max_depth,
            process_value=report.process_value,
            outcome_conf=outcome_conf,
            combined_value=combined_value(outcome_conf, report.process_value,
                                          cfg.outcome_weight),
            repair_count=repair_count,
            min_step_reward=min(report.step_rewards),
            defaulted_fraction=report.defaulted_fraction,
        )


class ActionKind(str, Enum):
    EXPAND = "expand"
    PRUNE = "prune"
    REPAIR = "repair"
    STOP = "stop"
    ABSTAIN = "abstain"


@dataclass
class ControlAction:
    kind: ActionKind
    target: int
    repair_index: int | None = None

    def __post_init__(self) -> None:
        if (self.repair_index is not None) != (self.kind is ActionKind.REPAIR):
            raise ValueError("repair_index is set exactly when the action is a repair")


def combined_value(v_out: float, v_proc: float, outcome_weight: float) -> float:
    """Convex fusion of terminal confidence and process quality."""
    return outcome_weight * v_out + (1.0 - outcome_weight) * v_proc


def ucb_score(value: float, visits: int, total_selections: int, explore_coef: float) -> float:
    """Value plus an exploration bonus that shrinks with the node's visits."""
    return value + explore_coef * math.sqrt(math.log(total_selections + 1) / (visits + 1))


def select_frontier(tree: ReasoningTree, explore_coef: float) -> int:
    """Highest-scoring frontier node (ties to the lower id); counts the selection."""
    if not tree.frontier.node_ids:
        raise ValueError("frontier is empty")
    total = tree.frontier.total_selections
    best_id = -1
    best_score = -math.inf
    for nid in sorted(tree.frontier.node_ids):
        node = tree.nodes[nid]
        score = ucb_score(node.value_cache or 0.0, node.visit_count, total, explore_coef)
        if score > best_score:
            best_id, best_score = nid, score
    tree.frontier.total_selections += 1
    tree.record_visit(best_id)
    return best_id


def repair_point(rewards: list[float], step_health_min: float) -> int | None:
    """Earliest 1-based step whose reward falls below the health threshold."""
    if not rewards:
        raise ValueError("rewards must be nonempty")
    for index, reward in enumerate(rewards, start=1):
        if reward < step_health_min:
            return index
    return None


def decide_action(state: MetaState, rewards: list[float], cfg: ControllerConfig,
                  budget_remaining: int, target: int = -1) -> ControlAction | None:
    """First matching rule in ``cfg.rule_order`` wins; None defers to finalization."""
    depth = round(state.depth_norm * cfg.max_depth)
    for rule in cfg.rule_order:
        if rule == "stop" and state.combined_value >= cfg.stop_above:
            return ControlAction(ActionKind.STOP, target)
        if rule == "prune" and state.combined_value < cfg.prune_below:
            return ControlAction(ActionKind.PRUNE, target)
        if rule == "repair" and cfg.repair_mode != "off":
            if state.repair_count < cfg.max_repairs_per_branch:
                index = repair_point(rewards, cfg.step_health_min)
                if index is None and cfg.repair_mode == "all":
                    index = len(rewards)
                if index is not None:
                    return ControlAction(ActionKind.REPAIR, target, repair_index=index)
        if rule == "expand" and budget_remaining >= CALLS_PER_CHILD and depth < cfg.max_depth:
            return ControlAction(ActionKind.EXPAND, target)
    return None


@dataclass
class EpisodeResult:
    episode_id: str
    answer: str | None
    abstained: bool
    best_value: float | None = None
    confidence: float | None = None
    node_id: int | None = None
    candidate_answer: str | None = None
    final_chain: str | None = None
    fallback_used: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "answer": self.answer,
            "abstained": self.abstained,
            "best_value": self.best_value,
            "confidence": self.confidence,
            "node_id": self.node_id,
            "candidate_answer": self.candidate_answer,
            "final_chain": self.final_chain,
            "fallback_used": self.fallback_used,
            "error": self.error,
        }


@dataclass
class _ScoredChild:
    node_id: int
    report: OracleReport
    confidence: ConfidenceReport
    value: float


class EpisodeRunner:
    """Runs one budgeted episode; owns its tree, never the ledger or trace."""

    def __init__(self, view: ProblemView, backend: Backend, cfg: ControllerConfig,
                 ledger: BudgetLedger, trace: TraceWriter, seed: int = 0):
        self.view = view
        self.backend = backend
        self.cfg = cfg
        self.ledger = ledger
        self.trace = trace
        self.seed = seed
        self.tree = ReasoningTree(max_depth=cfg.max_depth)

    # -- request plumbing ----------------------------------------------------

    def _context_for(self, node_id: int) -> str:
        return render_trajectory(self.tree.path_thoughts(node_id))

    def _request(self, kind: RequestKind, context: str, *, strategy: Strategy | None = None,
                 expected_steps: int | None = None, attempt: int = 1,
                 decoding: DecodingParams | None = None) -> GenerationRequest:
        if decoding is None:
            decoding = (DecodingParams.object_level()
                        if kind in (RequestKind.GENERATE, RequestKind.REPAIR_SUFFIX)
                        else DecodingParams.meta_level())
        return GenerationRequest(kind=kind, problem_id=self.view.id,
                                 problem=self.view.prompt, trajectory_context=context,
                                 strategy=strategy, decoding=decoding,
                                 expected_steps=expected_steps, attempt=attempt,
                                 seed=self.seed)

    def _generate_child(self, parent_id: int, strategy: Strategy,
                        reservation: Reservation) -> int:
        attempt = max(1, self.tree.node(parent_id).visit_count)
        request = self._request(RequestKind.GENERATE, self._context_for(parent_id),
                                strategy=strategy, attempt=attempt)
        token = reservation.consume(Category.GENERATION)
        response = self.backend.invoke(request, token)
        child_id = self.tree.add_child(parent_id, response.text.strip(), strategy)
        self.trace.emit(EventKind.GENERATE, {
            "node": child_id, "parent": parent_id, "strategy": strategy.value,
            "attempt": attempt, "fingerprint": request.fingerprint(),
            "thought": self.tree.node(child_id).thought,
        })
        return child_id

    def _score_trajectory(self, node_id: int, reservation: Reservation) -> OracleReport:
        context = self._context_for(node_id)
        expected = len(self.tree.path_ids(node_id))

        def issue(attempt: int) -> str:
            token = (reservation.consume(Category.PROCESS_EVAL) if attempt == 1
                     else self.ledger.charge(Category.PROCESS_EVAL))
            request = self._request(RequestKind.ORACLE_SCORE, context,
                                    expected_steps=expected, attempt=attempt)
            response = self.backend.invoke(request, token)
            self.trace.emit(EventKind.ORACLE_SCORE, {
                "node": node_id, "attempt": attempt,
                "fingerprint": request.fingerprint(), "raw": response.text,
            })
            return response.text

        report = score_with_retry(issue, expected, self.cfg.reward_weights)
        for nid, scores in zip(self.tree.path_ids(node_id), report.steps):
            self.tree.node(nid).step_scores = scores
        return report

    def _confidence(self, node_id: int, reservation: Reservation) -> ConfidenceReport:
        context = self._context_for(node_id)

        def issue(attempt: int) -> str:
            token = (reservation.consume(Category.VERIFY) if attempt == 1
                     else self.ledger.charge(Category.VERIFY))
            request = self._request(RequestKind.VERIFY_CONFIDENCE, context, attempt=attempt)
            response = self.backend.invoke(request, token)
            self.trace.emit(EventKind.VERIFY, {
                "node": node_id, "attempt": attempt,
                "fingerprint": request.fingerprint(), "raw": response.text,
            })
            return response.text

        return confidence_with_retry(issue)

    # -- decision application --------------------------------------------------

    def _evaluate(self, node_id: int, reservation: Reservation) -> _ScoredChild:
        report = self._score_trajectory(node_id, reservation)
        confidence = self._confidence(node_id, reservation)
        value = combined_value(confidence.value, report.process_value,
                               self.cfg.outcome_weight)
        node = self.tree.node(node_id)
        node.value_cache = value
        node.confidence_cache = confidence.value
        return _ScoredChild(node_id, report, confidence, value)

    def _answer_at(self, node_id: int) -> str | None:
        chain = "\n".join(self.tree.path_thoughts(node_id))
        return extract_answer(chain, self.view.kind, self.view.choices)

    def _apply_action(self, scored: _ScoredChild) -> EpisodeResult | None:
        """Decide and act on one scored leaf; returns a result only on stop."""
        node = self.tree.node(scored.node_id)
        state = MetaState.build(node.strategy, node.depth, self.cfg, scored.report,
                                scored.confidence.value,
                                self.tree.repairs_along_path(scored.node_id))
        action = decide_action(state, scored.report.step_rewards, self.cfg,
                               self.ledger.remaining, target=scored.node_id)
        self.trace.emit(EventKind.ACTION, {
            "node": scored.node_id,
            "action": action.kind.value if action else "defer",
            "repair_index": action.repair_index if action else None,
            "value": scored.value,
            "confidence": scored.confidence.value,
            "process_value": scored.report.process_value,
            "rewards": scored.report.step_rewards,
            "defaulted_fraction": scored.report.defaulted_fraction,
            "budget_remaining": self.ledger.remaining,
            "pre_budget": self.ledger.remaining > 0,
        })
        if action is None or action.kind is ActionKind.EXPAND:
            if looks_final(node.thought):
                self.tree.set_status(scored.node_id, NodeStatus.TERMINAL)
            return None
        if action.kind is ActionKind.STOP:
            self.tree.set_status(scored.node_id, NodeStatus.TERMINAL)
            answer = self._answer_at(scored.node_id)
            self.trace.emit(EventKind.STOP, {
                "node": scored.node_id, "reason": "stop_rule", "answer": answer,
                "value": scored.value, "confidence": scored.confidence.value,
                "pre_budget": self.ledger.remaining > 0,
            })
            return EpisodeResult(self.trace.episode_id, answer=answer, abstained=False,
                                 best_value=scored.value,
                                 confidence=scored.confidence.value,
                                 node_id=scored.node_id, candidate_answer=answer,
                                 final_chain="\n".join(self.tree.path_thoughts(scored.node_id)))
        if action.kind is ActionKind.PRUNE:
            self.tree.set_status(scored.node_id, NodeStatus.PRUNED)
            return None
        # repair: replace the suffix from the earliest unhealthy step
        repaired = self._repair_branch(scored.node_id, action.repair_index)
        if repaired is None:
            if looks_final(node.thought):
                self.tree.set_status(scored.node_id, NodeStatus.TERMINAL)
            return None
        return self._apply_action(repaired)

    def _repair_branch(self, leaf: int, i_star: int) -> _ScoredChild | None:
        path = self.tree.path_ids(leaf)
        if not 1 <= i_star <= len(path):
            raise ValueError(f"repair index {i_star} outside trajectory of length {len(path)}")
        try:
            reservation = self.ledger.reserve(CALLS_PER_CHILD)
        except BudgetExceeded:
            self.trace.emit(EventKind.REPAIR, {
                "leaf": leaf, "repair_index": i_star, "abandoned": True,
            })
            return None
        prefix_ids = path[:i_star - 1]
        prefix_before = [self.tree.node(n).thought for n in prefix_ids]
        old_suffix = [self.tree.node(n).thought for n in path[i_star - 1:]]
        attach = prefix_ids[-1] if prefix_ids else self.tree.root_id
        strategy = self.tree.node(path[i_star - 1]).strategy
        with reservation:
            # the regenerated span covers the removed steps i*..T, no more
            request = self._request(RequestKind.REPAIR_SUFFIX,
                                    render_trajectory(prefix_before),
                                    expected_steps=len(path) - i_star + 1,
                                    attempt=len(self.tree.children[attach]) + 1)
            token = reservation.consume(Category.REPAIR)
            response = self.backend.invoke(request, token)
            for nid in path[i_star - 1:]:
                if self.tree.node(nid).status is NodeStatus.ACTIVE:
                    self.tree.set_status(nid, NodeStatus.REPAIRED)
            new_id = self.tree.add_child(attach, response.text.strip(), strategy,
                                         created_by_repair=True)
            repaired = self._evaluate(new_id, reservation)
        prefix_after = [self.tree.node(n).thought for n in prefix_ids]
        self.trace.emit(EventKind.REPAIR, {
            "leaf": leaf, "repair_index": i_star, "attach": attach, "new_node": new_id,
            "prefix_before": prefix_before, "prefix_after": prefix_after,
            "old_suffix": old_suffix, "new_thought": self.tree.node(new_id).thought,
            "abandoned": False,
        })
        return repaired

    # -- main loop -------------------------------------------------------------

    def run(self) -> EpisodeResult:
        try:
            while self.tree.frontier.node_ids and self.ledger.remaining >= CALLS_PER_CHILD:
                node_id = select_frontier(self.tree, self.cfg.explore_coef)
                node = self.tree.node(node_id)
                self.trace.emit(EventKind.SELECT, {
                    "node": node_id, "visits": node.visit_count,
                    "total_selections": self.tree.frontier.total_selections,
                    "value": node.value_cache,
                })
                modes = min(self.cfg.max_modes_per_expand,
                            self.ledger.remaining // CALLS_PER_CHILD)
                for strategy in STRATEGY_ORDER[:modes]:
                    try:
                        reservation = self.ledger.reserve(CALLS_PER_CHILD)
                    except BudgetExceeded:
                        break
                    with reservation:
                        child_id = self._generate_child(node_id, strategy, reservation)
                        scored = self._evaluate(child_id, reservation)
                    result = self._apply_action(scored)
                    if result is not None:
                        return result
            return self._finalize()
        except TransportError as exc:
            self.trace.emit(EventKind.ABSTAIN, {"reason": "backend_failure",
                                                "detail": str(exc)})
            return EpisodeResult(self.trace.episode_id, answer=None, abstained=True,
                                 error=str(exc))

    def _finalize(self) -> EpisodeResult:
        best = self.tree.best_surviving()
        if best is None:
            self.trace.emit(EventKind.ABSTAIN, {"reason": "no_scored_survivor"})
            return EpisodeResult(self.trace.episode_id, answer=None, abstained=True)
        node_id, value = best
        node = self.tree.node(node_id)
        answer = self._answer_at(node_id)
        chain = "\n".join(self.tree.path_thoughts(node_id))
        confidence = node.confidence_cache
        if confidence is None or confidence < self.cfg.abstain_below:
            self.trace.emit(EventKind.ABSTAIN, {
                "node": node_id, "reason": "low_confidence",
                "confidence": confidence, "best_value": value,
            })
            return EpisodeResult(self.trace.episode_id, answer=None, abstained=True,
                                 best_value=value, confidence=confidence,
                                 node_id=node_id, candidate_answer=answer,
                                 final_chain=chain)
        self.trace.emit(EventKind.STOP, {
            "node": node_id, "reason": "finalize", "answer": answer, "value": value,
            "confidence": confidence, "pre_budget": self.ledger.remaining > 0,
        })
        return EpisodeResult(self.trace.episode_id, answer=answer, abstained=False,
                             best_value=value, confidence=confidence, node_id=node_id,
                             candidate_answer=answer, final_chain=chain)


def run_episode(problem: ProblemView, backend: Backend, cfg: ControllerConfig,
                ledger: BudgetLedger, trace: TraceWriter | None = None,
                episode_id: str = "", seed: int = 0) -> EpisodeResult:
    """Execute the full budgeted control loop for one problem."""
    own_trace = trace is None
    trace = trace or TraceWriter(episode_id or problem.id)
    runner = EpisodeRunner(problem, backend, cfg, ledger, trace, seed=seed)
    try:
        return runner.run()
    finally:
        if own_trace:
            trace.close()
