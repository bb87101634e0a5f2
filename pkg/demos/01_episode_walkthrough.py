"""Walk through a single budgeted episode on the simulated world.

Shows the control loop at work: frontier selection, strategy-tagged child
generation, process scoring, the fused value, and the action taken per
child, followed by the final tree and the budget breakdown.
"""

from reasonctl import ControllerConfig, run_episode
from reasonctl.backends import SimBackend, SimWorld, SimWorldConfig
from reasonctl.budget import BudgetLedger
from reasonctl.trace import EventKind, TraceWriter

world = SimWorld(SimWorldConfig(seed=7, step_error_prob=0.3))
backend = SimBackend(world)
problem = world.make_problems(3)[2]

print(f"problem: {problem.prompt}")
print(f"hidden solution has {world.chain_length(problem.id)} steps, "
      f"gold answer {problem.gold}\n")

cfg = ControllerConfig()  # budget 16, prune < 0.35, stop >= 0.90, health 0.5
ledger = BudgetLedger(cfg.budget)
trace = TraceWriter("walkthrough")

result = run_episode(problem.view(), backend, cfg, ledger, trace=trace,
                     episode_id="walkthrough", seed=0)

for event in trace.events:
    p = event.payload
    if event.kind is EventKind.SELECT:
        print(f"[select]  node {p['node']} (visits={p['visits']})")
    elif event.kind is EventKind.GENERATE:
        print(f"[generate] node {p['node']} <- {p['strategy']}: {p['thought'][:68]}")
    elif event.kind is EventKind.ACTION:
        print(f"[action]   node {p['node']}: {p['action']}  "
              f"v={p['value']:.3f} proc={p['process_value']:.3f} "
              f"conf={p['confidence']:.2f} rewards={[round(r, 2) for r in p['rewards']]}")
    elif event.kind is EventKind.REPAIR and not p.get("abandoned"):
        print(f"[repair]   leaf {p['leaf']} at step {p['repair_index']} "
              f"-> new node {p['new_node']}")
    elif event.kind is EventKind.STOP:
        print(f"[stop]     node {p['node']} ({p['reason']}) answer={p['answer']}")
    elif event.kind is EventKind.ABSTAIN:
        print(f"[abstain]  {p}")

print(f"\nresult: answer={result.answer} abstained={result.abstained} "
      f"value={result.best_value:.3f} confidence={result.confidence:.2f}")
print(f"correct: {result.answer == problem.gold}")

summary = ledger.summary()
print(f"\nbudget: {summary.total_calls}/{summary.capacity} calls, "
      f"{summary.tokens_total} tokens")
for category, row in sorted(summary.per_category.items()):
    print(f"  {category:13s} {row['calls']:2d} calls")
