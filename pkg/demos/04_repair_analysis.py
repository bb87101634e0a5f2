"""Selective repair versus repair-all versus no repair.

Tracks the rescue rate (wrong trajectories fixed), the hurt rate (correct
trajectories corrupted), and total call cost on a world where most defects
are locally repairable. Selective triggering is what keeps repair cheap and
safe: repairing everything burns budget and corrupts healthy branches.
"""

from dataclasses import replace

from reasonctl import ControllerConfig, run_episode, rescue_hurt
from reasonctl.backends import SimBackend, SimWorld, SimWorldConfig
from reasonctl.budget import BudgetLedger
from reasonctl.harness import repair_pairs_from_trace
from reasonctl.trace import TraceWriter

world = SimWorld(SimWorldConfig(seed=3, step_error_prob=0.3, repairable_fraction=0.7))
backend = SimBackend(world)
problems = world.make_problems(150)
base = ControllerConfig(stop_above=0.72)  # reachable stop point: episodes can end early

print(f"{'mode':<11s} {'repairs':>8s} {'rescue':>8s} {'hurt':>7s} {'net':>5s} "
      f"{'calls':>7s} {'accuracy':>9s}")
for mode in ("selective", "all", "off"):
    cfg = replace(base, repair_mode=mode)
    pairs, calls, hits = [], 0, 0
    for problem in problems:
        ledger = BudgetLedger(cfg.budget)
        with TraceWriter(problem.id) as trace:
            result = run_episode(problem.view(), backend, cfg, ledger, trace=trace,
                                 episode_id=problem.id, seed=0)
        pairs.extend(repair_pairs_from_trace(trace.events, problem))
        calls += ledger.total_calls
        hits += int((not result.abstained) and result.answer == problem.gold)
    outcome = rescue_hurt(pairs)
    rescue = "-" if outcome.rescue_rate is None else f"{outcome.rescue_rate:.3f}"
    hurt = "-" if outcome.hurt_rate is None else f"{outcome.hurt_rate:.3f}"
    net = "-" if outcome.net_gain is None else str(outcome.net_gain)
    print(f"{mode:<11s} {len(pairs):>8d} {rescue:>8s} {hurt:>7s} {net:>5s} "
          f"{calls:>7d} {hits / len(problems):>9.3f}")
