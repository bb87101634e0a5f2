"""Command line front end: run, replay, audit, triage, report."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .evaluation import failure_triage
from .harness import (RunConfig, build_triage_cases, replay_episode, run_suite,
                      shadow_audit, write_report)


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = {}
    if args.policy:
        overrides["policy"] = args.policy
    if args.backend:
        overrides["backend"] = args.backend
    if args.dataset:
        overrides["dataset"] = args.dataset
    if args.out:
        overrides["output_dir"] = args.out
    if args.seeds:
        overrides["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.problems is not None:
        overrides["n_problems"] = args.problems
    if args.fallback is not None:
        overrides["fallback_enabled"] = args.fallback
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        config = replace(config, **overrides)
    if args.budget is not None:
        config = replace(config, controller=replace(config.controller, budget=args.budget))
    if args.sim_seed is not None:
        config = replace(config, sim=replace(config.sim, seed=args.sim_seed))
    return config


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    suite = run_suite(config)
    graded = [r for r in suite.records if r.correct is not None]
    correct = sum(1 for r in graded if r.correct)
    print(f"ran {len(suite.records)} episode(s) -> {suite.results_path}")
    if graded:
        print(f"accuracy {correct}/{len(graded)} = {correct / len(graded):.3f}")
    abstained = sum(1 for r in suite.records if r.abstained)
    print(f"abstained on {abstained} episode(s)")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    if args.episode:
        episode_ids = [args.episode]
    else:
        with open(run_dir / "results.json", "r", encoding="utf-8") as handle:
            episode_ids = [row["episode_id"] for row in json.load(handle)["episodes"]]
    failures = 0
    for episode_id in episode_ids:
        check = replay_episode(run_dir, episode_id)
        status = "ok" if check.matched else "MISMATCH"
        print(f"replay {episode_id}: {status}")
        for diff in check.diffs:
            print(f"  {diff}")
        failures += 0 if check.matched else 1
    return 1 if failures else 0


def _cmd_audit(args: argparse.Namespace) -> int:
    subset = None
    if args.subset:
        with open(args.subset, "r", encoding="utf-8") as handle:
            subset = {line.strip() for line in handle if line.strip()}
    report = shadow_audit(args.run_dir, relaxed_prune_below=args.relaxed_threshold,
                          top_k=args.top_k, subset=subset)
    out = Path(args.out or Path(args.run_dir) / "audit.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
    print(f"pruned branches audited: {report.pruned_count}")
    print(f"prune precision: {report.prune_precision}")
    print(f"false-prune rate: {report.false_prune_rate}")
    print(f"oracle gap: {report.oracle_gap}")
    print(f"wrote {out}")
    return 0


def _cmd_triage(args: argparse.Namespace) -> int:
    audit = None
    if args.with_shadow:
        audit = shadow_audit(args.run_dir)
    cases = build_triage_cases(args.run_dir, args.baseline_run or [], audit=audit)
    counts = failure_triage(cases, entropy_threshold=args.entropy_threshold)
    failed = sum(counts.values())
    out = Path(args.out or Path(args.run_dir) / "triage.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as handle:
        json.dump({"counts": counts, "failed_episodes": failed}, handle,
                  indent=2, sort_keys=True)
    print(f"failed episodes: {failed}")
    for name in ("F1", "F2", "F3", "F4"):
        print(f"  {name}: {counts[name]}")
    print(f"wrote {out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    path = write_report(args.run_dir, out_dir=args.out,
                        bootstrap_resamples=args.resamples)
    with open(path, "r", encoding="utf-8") as handle:
        report = json.load(handle)
    print(f"accuracy:  {report['accuracy']:.4f}")
    print(f"coverage:  {report['coverage']:.4f}")
    for name in ("ece", "brier", "aurc"):
        if name in report:
            value = report[name]
            print(f"{name}:  {value['value']:.4f}  "
                  f"[{value['ci95'][0]:.4f}, {value['ci95'][1]:.4f}]")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reasonctl",
        description="Budgeted metacognitive reasoning controller harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a policy over a problem suite")
    run.add_argument("--config", help="JSON run configuration file")
    run.add_argument("--policy", choices=["controller", "greedy_cot", "best_of_n",
                                          "vanilla_tot", "cascade"])
    run.add_argument("--backend", choices=["sim", "http", "replay"])
    run.add_argument("--dataset", help="problem JSONL path")
    run.add_argument("--out", help="output directory")
    run.add_argument("--seeds", help="comma-separated sampling seeds")
    run.add_argument("--problems", type=int, help="number of sim-generated problems")
    run.add_argument("--budget", type=int, help="episode call budget")
    run.add_argument("--sim-seed", type=int, help="simulated world seed")
    run.add_argument("--workers", type=int, help="episode worker pool width")
    run.add_argument("--fallback", action="store_true", default=None,
                     help="route abstentions to the fallback pass")
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("replay", help="re-execute recorded episodes and compare")
    rep.add_argument("run_dir")
    rep.add_argument("--episode", help="single episode id (default: all)")
    rep.set_defaults(func=_cmd_replay)

    audit = sub.add_parser("audit", help="relaxed-pruning shadow audit")
    audit.add_argument("run_dir")
    audit.add_argument("--relaxed-threshold", type=float, default=0.0)
    audit.add_argument("--top-k", type=int, default=4)
    audit.add_argument("--subset", help="file with one episode id per line")
    audit.add_argument("--out")
    audit.set_defaults(func=_cmd_audit)

    triage = sub.add_parser("triage", help="label failed episodes F1-F4")
    triage.add_argument("run_dir")
    triage.add_argument("--baseline-run", action="append",
                        help="baseline run dir (repeatable)")
    triage.add_argument("--with-shadow", action="store_true",
                        help="run the shadow audit to detect over-pruning")
    triage.add_argument("--entropy-threshold", type=float, default=0.8)
    triage.add_argument("--out")
    triage.set_defaults(func=_cmd_triage)

    report = sub.add_parser("report", help="calibration and efficiency metrics")
    report.add_argument("run_dir")
    report.add_argument("--out")
    report.add_argument("--resamples", type=int, default=1000)
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
