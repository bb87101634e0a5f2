"""reasonctl: budgeted metacognitive control over tree-structured reasoning.

A pluggable generator proposes reasoning steps, an online process oracle
scores them, and a deterministic meta-controller decides when to expand,
prune, repair, stop, or abstain under a hard call budget. Includes
budget-matched baselines, a seeded simulated world for verification, a
record/replay harness, and reliability analytics (calibration, selective
risk, repair and pruning audits, failure triage).
"""

from .answers import (AnswerKind, Problem, ProblemView, extract_answer, load_problems,
                      looks_final, normalize_answer, save_problems)
from .budget import (BudgetExceeded, BudgetLedger, BudgetSummary, Category, Charge,
                     ChargeToken, FallbackAlreadyExtended, Reservation)
from .controller import (ActionKind, ControlAction, ControllerConfig, EpisodeResult,
                         MetaState, combined_value, decide_action, repair_point,
                         run_episode, select_frontier, ucb_score, CALLS_PER_CHILD)
from .oracle import (ConfidenceReport, OracleReport, ParseFailure, REWARD_WEIGHTS,
                     StepScores, confidence_with_retry, parse_confidence,
                     parse_step_scores, process_value, salvage_step_scores,
                     score_with_retry, step_reward)
from .tree import (Frontier, NodeStatus, ReasoningNode, ReasoningTree, Strategy,
                   STRATEGY_ORDER, Trajectory, TreeError)
from .baselines import best_of_n, greedy_cot, hybrid_cascade, vanilla_tot
from .evaluation import (AuditRecord, AuditSummary, PredictionRecord, RepairOutcome,
                         TokenEfficiency, TriageCase, accuracy, aurc, bootstrap_ci,
                         brier, coverage, ece, failure_triage, normalized_entropy,
                         pruning_audit, rank_agreement_gap, rescue_hurt,
                         selective_curve, token_efficiency, triage_label)
from .harness import (AuditReport, ReplayCheck, RunConfig, SuiteResult,
                      build_report, build_triage_cases, episode_key,
                      repair_pairs_from_trace, replay_episode, run_suite,
                      shadow_audit, write_report)
from .trace import EventKind, TraceEvent, TraceWriter, read_trace

__version__ = "0.1.0"
