from __future__ import annotations

import math
import random

import pytest

from reasonctl.backends import RequestKind, ScriptedBackend
from reasonctl.budget import BudgetLedger
from reasonctl.controller import (ActionKind, CALLS_PER_CHILD, ControlAction,
                                  ControllerConfig, MetaState, combined_value,
                                  decide_action, repair_point, run_episode,
                                  select_frontier, ucb_score)
from reasonctl.oracle import OracleReport, StepScores
from reasonctl.answers import ProblemView
from reasonctl.trace import EventKind, TraceWriter
from reasonctl.tree import NodeStatus, ReasoningTree, Strategy

GOOD_STEP = "Step 1: Semantic=0.95, Logical=1.00, Fix=0.90"


def make_state(value: float, repair_count: int = 0, depth: int = 1,
               cfg: ControllerConfig | None = None) -> MetaState:
    cfg = cfg or ControllerConfig()
    # invert the fusion so combined_value lands exactly on `value`
    return MetaState(strategy=Strategy.DIRECT, depth_norm=depth / cfg.max_depth,
                     process_value=value, outcome_conf=value, combined_value=value,
                     repair_count=repair_count, min_step_reward=value,
                     defaulted_fraction=0.0)


class TestCombinedValue:
    def test_equal_inputs(self):
        assert combined_value(0.5, 0.5, 0.4) == pytest.approx(0.5)

    def test_hand_computed(self):
        assert combined_value(1.0, 0.0, 0.4) == pytest.approx(0.4)
        assert combined_value(0.0, 1.0, 0.4) == pytest.approx(0.6)

    def test_convexity_bounds(self):
        rng = random.Random(3)
        for _ in range(200):
            v = combined_value(rng.random(), rng.random(), rng.random())
            assert 0.0 <= v <= 1.0


class TestUcbScore:
    def test_zero_selections_is_value(self):
        assert ucb_score(0.5, 0, 0, 1.25) == pytest.approx(0.5)

    def test_hand_computed_bonus(self):
        expected = 0.5 + 1.25 * math.sqrt(math.log(2.0))
        assert ucb_score(0.5, 0, 1, 1.25) == pytest.approx(expected)
        assert ucb_score(0.5, 0, 1, 1.25) == pytest.approx(1.5407, abs=1e-4)

    def test_monotone_decreasing_in_visits(self):
        fresh = ucb_score(0.5, 0, 6, 1.25)
        tired = ucb_score(0.5, 5, 6, 1.25)
        assert fresh > tired


class TestSelectFrontier:
    def test_single_node(self):
        tree = ReasoningTree()
        assert select_frontier(tree, 1.25) == tree.root_id
        assert tree.node(tree.root_id).visit_count == 1
        assert tree.frontier.total_selections == 1

    def test_argmax_over_values(self):
        tree = ReasoningTree()
        a = tree.add_child(tree.root_id, "a", Strategy.DIRECT)
        b = tree.add_child(tree.root_id, "b", Strategy.DECOMPOSE)
        tree.node(a).value_cache = 0.9
        tree.node(b).value_cache = 0.2
        assert select_frontier(tree, 1.25) == a

    def test_exact_tie_lower_id(self):
        tree = ReasoningTree()
        a = tree.add_child(tree.root_id, "a", Strategy.DIRECT)
        b = tree.add_child(tree.root_id, "b", Strategy.DECOMPOSE)
        tree.node(a).value_cache = 0.5
        tree.node(b).value_cache = 0.5
        assert select_frontier(tree, 1.25) == a

    def test_empty_frontier_rejected(self):
        tree = ReasoningTree()
        child = tree.add_child(tree.root_id, "a", Strategy.DIRECT)
        tree.set_status(child, NodeStatus.PRUNED)
        tree.frontier.node_ids.discard(tree.root_id)  # force-empty for the check
        with pytest.raises(ValueError):
            select_frontier(tree, 1.25)

    def test_scale_free_argmax_with_zero_exploration(self):
        rng = random.Random(17)
        for _ in range(50):
            tree = ReasoningTree()
            ids = [tree.add_child(tree.root_id, f"n{i}", Strategy.DIRECT)
                   for i in range(4)]
            values = [rng.random() for _ in ids]
            for nid, value in zip(ids, values):
                tree.node(nid).value_cache = value
            first = select_frontier(tree, 0.0)
            scale = rng.uniform(0.1, 9.0)
            tree2 = ReasoningTree()
            ids2 = [tree2.add_child(tree2.root_id, f"n{i}", Strategy.DIRECT)
                    for i in range(4)]
            for nid, value in zip(ids2, values):
                tree2.node(nid).value_cache = value * scale
            second = select_frontier(tree2, 0.0)
            assert ids.index(first) == ids2.index(second)


class TestRepairPoint:
    def test_earliest_below_threshold(self):
        assert repair_point([0.9, 0.4, 0.3], 0.5) == 2

    def test_all_healthy(self):
        assert repair_point([0.6, 0.7], 0.5) is None

    def test_first_element(self):
        assert repair_point([0.1, 0.9], 0.5) == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            repair_point([], 0.5)


class TestDecideAction:
    CFG = ControllerConfig()

    def test_stop_wins_first(self):
        action = decide_action(make_state(0.95), [0.9], self.CFG, 10, target=4)
        assert action == ControlAction(ActionKind.STOP, 4)

    def test_prune_below_threshold(self):
        action = decide_action(make_state(0.20), [0.9], self.CFG, 10, target=4)
        assert action.kind is ActionKind.PRUNE

    def test_repair_on_unhealthy_step(self):
        action = decide_action(make_state(0.60), [0.9, 0.3], self.CFG, 10, target=4)
        assert action.kind is ActionKind.REPAIR
        assert action.repair_index == 2

    def test_repair_cap_blocks_second_repair(self):
        action = decide_action(make_state(0.60, repair_count=1), [0.9, 0.3],
                               self.CFG, 10, target=4)
        assert action.kind is ActionKind.EXPAND

    def test_expand_when_healthy_and_affordable(self):
        action = decide_action(make_state(0.60), [0.9, 0.8], self.CFG, 10, target=4)
        assert action.kind is ActionKind.EXPAND

    def test_defer_when_budget_too_small(self):
        action = decide_action(make_state(0.60), [0.9, 0.8], self.CFG, 2, target=4)
        assert action is None

    def test_defer_at_max_depth(self):
        cfg = ControllerConfig(max_depth=3)
        action = decide_action(make_state(0.60, depth=3, cfg=cfg), [0.9] * 3, cfg,
                               10, target=4)
        assert action is None

    def test_repair_all_mode_targets_last_step_when_healthy(self):
        cfg = ControllerConfig(repair_mode="all")
        action = decide_action(make_state(0.60), [0.9, 0.8], cfg, 10, target=4)
        assert action.kind is ActionKind.REPAIR
        assert action.repair_index == 2

    def test_repair_off_mode(self):
        cfg = ControllerConfig(repair_mode="off")
        action = decide_action(make_state(0.60), [0.9, 0.3], cfg, 10, target=4)
        assert action.kind is ActionKind.EXPAND

    def test_determinism(self):
        for _ in range(5):
            a = decide_action(make_state(0.6), [0.9, 0.3], self.CFG, 9, target=1)
            b = decide_action(make_state(0.6), [0.9, 0.3], self.CFG, 9, target=1)
            assert a == b


class TestControlActionType:
    def test_repair_index_only_with_repair(self):
        with pytest.raises(ValueError):
            ControlAction(ActionKind.PRUNE, 1, repair_index=2)
        with pytest.raises(ValueError):
            ControlAction(ActionKind.REPAIR, 1)


class TestConfigValidation:
    def test_threshold_ordering(self):
        with pytest.raises(ValueError):
            ControllerConfig(prune_below=0.9, stop_above=0.4)

    def test_round_trip(self):
        cfg = ControllerConfig(stop_above=0.8, repair_mode="all")
        assert ControllerConfig.from_dict(cfg.to_dict()) == cfg


def scripted_episode(script: dict, budget: int = 16, **cfg_kwargs):
    backend = ScriptedBackend()
    for kind, texts in script.items():
        backend.push(kind, *texts)
    cfg = ControllerConfig(budget=budget, **cfg_kwargs)
    ledger = BudgetLedger(budget)
    trace = TraceWriter("scripted")
    view = ProblemView(id="p1", prompt="toy problem")
    result = run_episode(view, backend, cfg, ledger, trace=trace,
                         episode_id="scripted", seed=0)
    return result, ledger, trace, backend


class TestScriptedEpisodes:
    def test_immediate_stop_on_high_value_child(self):
        result, ledger, trace, _ = scripted_episode({
            RequestKind.GENERATE: ["direct derivation. Final answer: \\boxed{42}"],
            RequestKind.ORACLE_SCORE: [GOOD_STEP],
            RequestKind.VERIFY_CONFIDENCE: ["0.95"],
        })
        # 0.4*0.95 + 0.6*0.96 = 0.956 >= 0.90: stop after a single expand cycle
        assert not result.abstained
        assert result.answer == "42"
        assert result.best_value == pytest.approx(0.956)
        assert ledger.total_calls == 3
        stops = [e for e in trace.events if e.kind is EventKind.STOP]
        assert stops and stops[0].payload["reason"] == "stop_rule"
        assert stops[0].payload["pre_budget"]

    def test_all_children_pruned_abstains(self):
        low = "Step 1: Semantic=0.1, Logical=0.1, Fix=0.0"
        result, ledger, trace, _ = scripted_episode({
            RequestKind.GENERATE: ["weak idea one", "weak idea two", "weak idea three"],
            RequestKind.ORACLE_SCORE: [low, low, low],
            RequestKind.VERIFY_CONFIDENCE: ["0.1", "0.1", "0.1"],
        }, budget=9)
        assert result.abstained
        assert result.answer is None
        abstains = [e for e in trace.events if e.kind is EventKind.ABSTAIN]
        assert abstains[0].payload["reason"] == "no_scored_survivor"

    def test_repair_preserves_prefix_bytes(self):
        healthy = "Step 1: Semantic=0.85, Logical=0.90, Fix=0.10"
        mixed = ("Step 1: Semantic=0.85, Logical=0.90, Fix=0.10\n"
                 "Step 2: Semantic=0.60, Logical=0.30, Fix=0.10")
        repaired = ("Step 1: Semantic=0.85, Logical=0.90, Fix=0.10\n"
                    "Step 2: Semantic=0.85, Logical=0.90, Fix=0.80")
        result, ledger, trace, _ = scripted_episode({
            RequestKind.GENERATE: [
                "solid opening step",
                "bogus continuation. Final answer: \\boxed{13}",
            ],
            RequestKind.ORACLE_SCORE: [healthy, mixed, repaired],
            RequestKind.VERIFY_CONFIDENCE: ["0.45", "0.42", "0.92"],
            RequestKind.REPAIR_SUFFIX: [
                "corrected continuation. Final answer: \\boxed{27}"],
        }, budget=9, max_modes_per_expand=1)
        repairs = [e for e in trace.events if e.kind is EventKind.REPAIR]
        assert len(repairs) == 1
        payload = repairs[0].payload
        assert not payload["abandoned"]
        assert payload["repair_index"] == 2
        assert payload["prefix_before"] == payload["prefix_after"] == [
            "solid opening step"]
        assert payload["old_suffix"] == ["bogus continuation. Final answer: \\boxed{13}"]
        # repaired branch was rescored and won
        assert result.answer == "27"

    def test_repair_abandoned_when_budget_cannot_cover_it(self):
        healthy = "Step 1: Semantic=0.85, Logical=0.90, Fix=0.10"
        mixed = ("Step 1: Semantic=0.85, Logical=0.90, Fix=0.10\n"
                 "Step 2: Semantic=0.60, Logical=0.30, Fix=0.10")
        result, ledger, trace, _ = scripted_episode({
            RequestKind.GENERATE: [
                "solid opening step",
                "bogus continuation. Final answer: \\boxed{13}",
            ],
            RequestKind.ORACLE_SCORE: [healthy, mixed],
            RequestKind.VERIFY_CONFIDENCE: ["0.45", "0.65"],
        }, budget=6, max_modes_per_expand=1)
        repairs = [e for e in trace.events if e.kind is EventKind.REPAIR]
        assert repairs and repairs[0].payload["abandoned"]
        assert ledger.total_calls == 6
        # defective branch retained its answer as the best survivor
        assert result.answer == "13"

    def test_oracle_reprompt_charged_and_recovered(self):
        result, ledger, trace, _ = scripted_episode({
            RequestKind.GENERATE: ["direct derivation. Final answer: \\boxed{42}"],
            RequestKind.ORACLE_SCORE: ["unparseable text", GOOD_STEP],
            RequestKind.VERIFY_CONFIDENCE: ["0.95"],
        })
        assert result.answer == "42"
        assert ledger.total_calls == 4  # generation + 2 oracle attempts + verify
        assert ledger.summary().per_category["process_eval"]["calls"] == 2

    def test_no_calls_after_budget_exhausted(self):
        steady = "Step 1: Semantic=0.6, Logical=0.7, Fix=0.2"
        result, ledger, trace, backend = scripted_episode({
            RequestKind.GENERATE: ["an idea"] * 12,
            RequestKind.ORACLE_SCORE: [steady] * 12,
            RequestKind.VERIFY_CONFIDENCE: ["0.7"] * 12,
        }, budget=10, max_modes_per_expand=3)
        assert ledger.total_calls <= 10
        # 10 // 3 = 3 full child evaluations fit
        assert ledger.total_calls == 9
        assert len(backend.seen) == 9


class TestEpisodeOnSim:
    def test_runs_within_budget_and_traces_reconcile(self, sim_backend):
        view = ProblemView(id="sim-0001", prompt="toy")
        cfg = ControllerConfig()
        for seed in range(5):
            ledger = BudgetLedger(cfg.budget)
            with TraceWriter(f"e{seed}") as trace:
                run_episode(view, sim_backend, cfg, ledger, trace=trace,
                            episode_id=f"e{seed}", seed=seed)
                assert ledger.total_calls <= cfg.budget

    def test_prune_and_stop_soundness_on_sim(self, sim_backend):
        cfg = ControllerConfig()
        world = sim_backend.world
        for problem in world.make_problems(20):
            ledger = BudgetLedger(cfg.budget)
            with TraceWriter(problem.id) as trace:
                run_episode(problem.view(), sim_backend, cfg, ledger, trace=trace,
                            episode_id=problem.id, seed=0)
            for event in trace.events:
                if event.kind is EventKind.ACTION:
                    if event.payload["action"] == "prune":
                        assert event.payload["value"] < cfg.prune_below
                    if event.payload["action"] == "repair":
                        rewards = event.payload["rewards"]
                        expected = next(i for i, r in enumerate(rewards, start=1)
                                        if r < cfg.step_health_min)
                        assert event.payload["repair_index"] == expected
                if event.kind is EventKind.STOP and \
                        event.payload.get("reason") == "stop_rule":
                    assert event.payload["value"] >= cfg.stop_above
