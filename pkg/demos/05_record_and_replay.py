"""Determinism and replay: the audit backbone.

Two runs with the same seed and config must produce byte-identical trace
files. Every episode also records a backend transcript, so it can later be
re-executed offline and checked against the stored answer, value, and
ledger summary. Finally, tamper with a stored result and watch replay
catch it.
"""

import json
import tempfile
from pathlib import Path

from reasonctl.backends import SimWorldConfig
from reasonctl.harness import RunConfig, replay_episode, run_suite

root = Path(tempfile.mkdtemp(prefix="reasonctl-replay-"))


def run_at(path: Path):
    return run_suite(RunConfig(output_dir=str(path), n_problems=6, seeds=(0,),
                               sim=SimWorldConfig(seed=23, step_error_prob=0.3)))


first = run_at(root / "a")
second = run_at(root / "b")

identical = 0
for trace in sorted((root / "a" / "traces").glob("*.ndjson")):
    twin = root / "b" / "traces" / trace.name
    assert trace.read_bytes() == twin.read_bytes(), trace.name
    identical += 1
print(f"{identical} trace files byte-identical across independent runs")

for row in first.episodes:
    check = replay_episode(first.run_dir, row.episode_id)
    status = "ok" if check.matched else "MISMATCH " + "; ".join(check.diffs)
    print(f"replay {row.episode_id}: {status}")

# tamper with one stored answer: replay must flag it
results_path = first.run_dir / "results.json"
payload = json.loads(results_path.read_text())
victim = next(r for r in payload["episodes"] if r["result"]["answer"] is not None)
victim["result"]["answer"] = "1234567"
results_path.write_text(json.dumps(payload))
check = replay_episode(first.run_dir, victim["episode_id"])
print(f"\nafter tampering with {victim['episode_id']}: matched={check.matched}")
for diff in check.diffs:
    print(f"  detected: {diff}")
