"""Hindsight pruning audit and the F1-F4 failure taxonomy.

The shadow run re-executes each episode with pruning relaxed; a pruned
branch was a mistake if the shadow grows a correct completion through the
same prefix. Failures then triage into: F1 search not converged, F2
evaluator misjudgment, F3 over-pruning, F4 base-model limitation.
"""

import tempfile
from pathlib import Path

from reasonctl.backends import SimWorldConfig
from reasonctl.controller import ControllerConfig
from reasonctl.evaluation import failure_triage
from reasonctl.harness import RunConfig, build_triage_cases, run_suite, shadow_audit

root = Path(tempfile.mkdtemp(prefix="reasonctl-audit-"))
world = SimWorldConfig(seed=29, step_error_prob=0.35)

suite = run_suite(RunConfig(output_dir=str(root / "main"), n_problems=40,
                            seeds=(0,), sim=world))
failures = sum(1 for r in suite.records if r.correct is False)
print(f"controller run: {len(suite.records)} episodes, {failures} failures")

audit = shadow_audit(suite.run_dir, relaxed_prune_below=0.0, top_k=4)
print(f"\npruning audit over {audit.pruned_count} pruned branches")
print(f"  prune precision : {audit.prune_precision}")
print(f"  false-prune rate: {audit.false_prune_rate}")
print(f"  oracle gap      : {audit.oracle_gap}")
print("(defects are directly visible to this world's oracle, so pruning at the")
print(" default threshold is essentially never wrong here)")

# tighten the prune threshold until healthy branches get cut: the shadow
# run should expose the over-pruning
aggressive = run_suite(RunConfig(
    output_dir=str(root / "aggressive"), n_problems=40, seeds=(0,), sim=world,
    controller=ControllerConfig(prune_below=0.56)))
harsh = shadow_audit(aggressive.run_dir, relaxed_prune_below=0.0, top_k=4)
print(f"\nsame world, prune threshold raised to 0.56: "
      f"{harsh.pruned_count} pruned branches")
print(f"  prune precision : {harsh.prune_precision:.3f}")
print(f"  false-prune rate: {harsh.false_prune_rate:.3f}  <- premature prunes caught")

# budget-matched baselines provide the F4 signal (everyone fails together)
baseline_dirs = []
for policy in ("greedy_cot", "best_of_n"):
    config = RunConfig(output_dir=str(root / policy), n_problems=40, seeds=(0,),
                       sim=world, policy=policy)
    run_suite(config)
    baseline_dirs.append(config.output_dir)

cases = build_triage_cases(suite.run_dir, baseline_dirs, audit=audit)
counts = failure_triage(cases)
print("\nfailure triage (first match in order F3, F2, F1, F4):")
labels = {
    "F1": "search not converged",
    "F2": "evaluator misjudgment",
    "F3": "over-pruning",
    "F4": "base-model limitation",
}
for name in ("F1", "F2", "F3", "F4"):
    print(f"  {name} {labels[name]:<24s} {counts[name]}")
print(f"  total labeled: {sum(counts.values())} (equals failures: "
      f"{sum(counts.values()) == failures})")
