"""Reliability profile of the controller versus a sampling baseline.

Runs both policies over the same simulated problems, then compares expected
calibration error, Brier score, and the area under the risk-coverage curve,
with seeded bootstrap confidence intervals. Lower is better for all three.
"""

from pathlib import Path
import tempfile

from reasonctl.evaluation import (PredictionRecord, accuracy, aurc, bootstrap_ci,
                                  brier, coverage, ece, selective_curve)
from reasonctl.harness import RunConfig, run_suite
from reasonctl.backends import SimWorldConfig

WORLD = SimWorldConfig(seed=19, step_error_prob=0.3)
N = 120

out_root = Path(tempfile.mkdtemp(prefix="reasonctl-calibration-"))
runs = {}
for policy in ("controller", "best_of_n"):
    config = RunConfig(policy=policy, output_dir=str(out_root / policy),
                       n_problems=N, seeds=(0,), sim=WORLD)
    runs[policy] = run_suite(config).records

print(f"{'metric':<12s} {'controller':>22s} {'best-of-16':>22s}")
for name, metric in (("ece", ece), ("brier", brier), ("aurc", aurc)):
    cells = []
    for policy in ("controller", "best_of_n"):
        records = runs[policy]
        value = metric(records)
        lo, hi = bootstrap_ci(metric, records, resamples=1000, seed=0)
        cells.append(f"{value:.3f} [{lo:.3f}, {hi:.3f}]")
    print(f"{name:<12s} {cells[0]:>22s} {cells[1]:>22s}")

for policy in ("controller", "best_of_n"):
    records = runs[policy]
    print(f"\n{policy}: accuracy={accuracy(records):.3f} "
          f"coverage={coverage(records):.3f}")
    curve = selective_curve(records)
    for target in (0.2, 0.5, 0.8, 1.0):
        point = min(curve, key=lambda cp: abs(cp[0] - target))
        print(f"  selective accuracy at coverage {point[0]:.2f}: {point[1]:.3f}")

print(f"\nrun artifacts in {out_root}")
