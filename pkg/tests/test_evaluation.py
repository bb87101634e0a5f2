from __future__ import annotations

import math
import random

import pytest

from reasonctl.evaluation import (AuditRecord, PredictionRecord, TriageCase, accuracy,
                                  aurc, bootstrap_ci, brier, coverage, ece,
                                  failure_triage, normalized_entropy, pruning_audit,
                                  rank_agreement_gap, rescue_hurt, selective_curve,
                                  token_efficiency, triage_label)


def rec(i, conf, correct, abstained=False, calls=0, tokens=0):
    return PredictionRecord(episode_id=f"e{i:04d}", answer="x", abstained=abstained,
                            confidence=None if abstained else conf,
                            correct=None if correct is None else bool(correct),
                            calls=calls, tokens=tokens)


def random_records(rng, n):
    return [rec(i, rng.random(), rng.random() < 0.6) for i in range(n)]


# independent naive implementations used as oracles


def ece_naive(records, bins=15):
    rows = [(r.confidence, 1.0 if r.correct else 0.0) for r in records
            if not r.abstained and r.confidence is not None and r.correct is not None]
    if not rows:
        return 0.0
    total = 0.0
    n = len(rows)
    for b in range(bins):
        lo, hi = b / bins, (b + 1) / bins
        members = [(c, h) for c, h in rows
                   if (lo <= c < hi) or (b == bins - 1 and c == 1.0)]
        if not members:
            continue
        avg_conf = sum(c for c, _ in members) / len(members)
        avg_acc = sum(h for _, h in members) / len(members)
        total += len(members) / n * abs(avg_acc - avg_conf)
    return total


def brier_naive(records):
    rows = [(r.confidence, 1.0 if r.correct else 0.0) for r in records
            if not r.abstained and r.confidence is not None and r.correct is not None]
    if not rows:
        return 0.0
    return sum((c - h) ** 2 for c, h in rows) / len(rows)


def aurc_naive(records):
    rows = [r for r in records
            if not r.abstained and r.confidence is not None and r.correct is not None]
    rows = sorted(rows, key=lambda r: (-r.confidence, r.episode_id))
    n = len(rows)
    if n == 0:
        return 0.0
    def risk_at(k):
        top = rows[:k]
        return sum(1 for r in top if not r.correct) / k
    risks = [risk_at(k) for k in range(1, n + 1)]
    area = risks[0] * (1.0 / n)
    for k in range(2, n + 1):
        area += (risks[k - 1] + risks[k - 2]) / 2.0 * (1.0 / n)
    return area


class TestEce:
    def test_perfect_calibration(self):
        records = [rec(0, 1.0, True), rec(1, 0.0, False)]
        assert ece(records) == pytest.approx(0.0, abs=1e-12)

    def test_single_overconfident_record(self):
        assert ece([rec(0, 0.8, False)]) == pytest.approx(0.8, abs=1e-12)

    def test_matches_naive_on_random_sets(self):
        rng = random.Random(42)
        for _ in range(50):
            records = random_records(rng, rng.randint(1, 60))
            assert ece(records) == pytest.approx(ece_naive(records), abs=1e-12)

    def test_bounded(self):
        rng = random.Random(1)
        for _ in range(50):
            assert 0.0 <= ece(random_records(rng, 30)) <= 1.0


class TestBrier:
    def test_confident_and_right(self):
        assert brier([rec(0, 1.0, True)]) == pytest.approx(0.0)

    def test_hand_computed(self):
        assert brier([rec(0, 0.7, False)]) == pytest.approx(0.49, abs=1e-12)

    def test_matches_naive(self):
        rng = random.Random(7)
        for _ in range(50):
            records = random_records(rng, rng.randint(1, 60))
            assert brier(records) == pytest.approx(brier_naive(records), abs=1e-12)


class TestAurc:
    def test_all_correct_is_zero(self):
        records = [rec(i, 0.5 + i * 0.01, True) for i in range(5)]
        assert aurc(records) == pytest.approx(0.0, abs=1e-12)

    def test_all_incorrect_is_one(self):
        records = [rec(i, 0.5 + i * 0.01, False) for i in range(5)]
        assert aurc(records) == pytest.approx(1.0, abs=1e-12)

    def test_three_record_mixed_case_by_exhaustive_curve(self):
        records = [rec(0, 0.9, True), rec(1, 0.6, False), rec(2, 0.3, True)]
        # risks at k=1..3: 0, 1/2, 1/3; area = (1/3)*(0 + (0+0.5)/2 + (0.5+1/3)/2)
        expected = (0.0 + 0.25 + (0.5 + 1.0 / 3.0) / 2.0) / 3.0
        assert aurc(records) == pytest.approx(expected, abs=1e-12)
        assert aurc(records) == pytest.approx(aurc_naive(records), abs=1e-12)

    def test_matches_naive_on_random_sets(self):
        rng = random.Random(11)
        for _ in range(50):
            records = random_records(rng, rng.randint(1, 50))
            assert aurc(records) == pytest.approx(aurc_naive(records), abs=1e-12)

    def test_confidence_ties_broken_by_episode_id(self):
        records = [rec(1, 0.5, False), rec(0, 0.5, True)]
        assert aurc(records) == pytest.approx(aurc_naive(records), abs=1e-12)


class TestSelectiveCurve:
    def test_full_coverage_equals_accuracy(self):
        rng = random.Random(3)
        records = random_records(rng, 40)
        curve = selective_curve(records)
        assert curve[-1][0] == pytest.approx(1.0)
        assert curve[-1][1] == pytest.approx(accuracy(records))

    def test_monotone_coverage_grid(self):
        rng = random.Random(4)
        records = random_records(rng, 10)
        coverages = [c for c, _ in selective_curve(records)]
        assert coverages == sorted(coverages)
        assert len(coverages) == 10


class TestBootstrap:
    def test_constant_metric_degenerate_interval(self):
        records = [rec(i, 0.5, True) for i in range(10)]
        lo, hi = bootstrap_ci(lambda rs: 0.42, records, resamples=100, seed=1)
        assert lo == hi == pytest.approx(0.42)

    def test_seeded_reproducibility(self):
        rng = random.Random(8)
        records = random_records(rng, 30)
        first = bootstrap_ci(brier, records, resamples=200, seed=5)
        second = bootstrap_ci(brier, records, resamples=200, seed=5)
        assert first == second
        different = bootstrap_ci(brier, records, resamples=200, seed=6)
        assert first != different

    def test_interval_contains_point_estimate_for_mean_metric(self):
        rng = random.Random(9)
        records = [rec(i, 0.5, rng.random() < 0.5) for i in range(40)]
        lo, hi = bootstrap_ci(accuracy, records, resamples=500, seed=2)
        assert lo <= accuracy(records) <= hi


class TestRescueHurt:
    def test_no_repairs_reports_absent(self):
        outcome = rescue_hurt([])
        assert outcome.rescue_rate is None
        assert outcome.hurt_rate is None
        assert outcome.net_gain is None

    def test_all_fixed(self):
        outcome = rescue_hurt([(False, True), (False, True)])
        assert outcome.rescue_rate == pytest.approx(1.0)
        assert outcome.hurt_rate == pytest.approx(0.0)
        assert outcome.net_gain == 2

    def test_synthetic_ten_pairs_brute_tally(self):
        pairs = [(False, True), (False, False), (True, True), (True, False),
                 (False, True), (True, True), (False, False), (False, True),
                 (True, False), (False, False)]
        rescued = sum(1 for pre, post in pairs if not pre and post)       # 3
        harmed = sum(1 for pre, post in pairs if pre and not post)        # 2
        wrong = sum(1 for pre, _ in pairs if not pre)                     # 6
        right = len(pairs) - wrong                                        # 4
        outcome = rescue_hurt(pairs)
        assert outcome.rescue_rate == pytest.approx(rescued / wrong)
        assert outcome.hurt_rate == pytest.approx(harmed / right)
        assert outcome.net_gain == rescued - harmed == 1


class TestEntropyAndGap:
    def test_entropy_extremes(self):
        assert normalized_entropy(["a", "a", "a"]) == pytest.approx(0.0)
        assert normalized_entropy(["a", "b", "c", "d"]) == pytest.approx(1.0)
        assert normalized_entropy(["a"]) == 0.0

    def test_entropy_half_split(self):
        assert normalized_entropy(["a", "a", "b", "b"]) == \
            pytest.approx(math.log(2) / math.log(4))

    def test_rank_gap_constructed_five_node_case(self):
        # controller order: wrong, right, wrong, right, right
        flags = [False, True, False, True, True]
        # brute force over pairs
        discordant = comparable = 0
        for i in range(5):
            for j in range(i + 1, 5):
                if flags[i] != flags[j]:
                    comparable += 1
                    if not flags[i] and flags[j]:
                        discordant += 1
        assert rank_agreement_gap(flags) == pytest.approx(discordant / comparable)
        assert rank_agreement_gap([True, True]) is None
        assert rank_agreement_gap([True, False]) == 0.0
        assert rank_agreement_gap([False, True]) == 1.0


class TestPruningAudit:
    def test_no_pruning_vacuity(self):
        summary = pruning_audit([], [])
        assert summary.false_prune_rate == 0.0
        assert summary.prune_precision is None
        assert summary.oracle_gap is None

    def test_counts(self):
        records = [
            AuditRecord("e1", 3, hindsight_productive=False),
            AuditRecord("e1", 5, hindsight_productive=True),
            AuditRecord("e2", 2, hindsight_productive=False),
            AuditRecord("e2", 9, hindsight_productive=False),
        ]
        summary = pruning_audit(records, [[True, False], [False, True]])
        assert summary.prune_precision == pytest.approx(0.75)
        assert summary.false_prune_rate == pytest.approx(0.25)
        assert summary.oracle_gap == pytest.approx((0.0 + 1.0) / 2)
        assert summary.pruned_count == 4


class TestFailureTriage:
    def case(self, **kwargs):
        defaults = dict(episode_id="e", failed=True, budget_exhausted=True,
                        best_below_stop=True, topk_answers=("1", "2", "3", "4"),
                        shadow_solved_and_pruned=False, outranked_correct=False,
                        baselines_all_failed=False)
        defaults.update(kwargs)
        return TriageCase(**defaults)

    def test_no_failures_all_zero(self):
        counts = failure_triage([self.case(failed=False)])
        assert counts == {"F1": 0, "F2": 0, "F3": 0, "F4": 0}

    def test_constructed_f3(self):
        assert triage_label(self.case(shadow_solved_and_pruned=True,
                                      outranked_correct=True)) == "F3"

    def test_constructed_f2(self):
        assert triage_label(self.case(outranked_correct=True)) == "F2"

    def test_f1_requires_high_entropy(self):
        high = self.case(topk_answers=("1", "2", "3", "4"))
        low = self.case(topk_answers=("1", "1", "1", "1"))
        assert triage_label(high) == "F1"
        assert triage_label(low) == "F4"

    def test_partition_property(self):
        rng = random.Random(12)
        cases = []
        for i in range(200):
            cases.append(TriageCase(
                episode_id=f"e{i}", failed=rng.random() < 0.5,
                budget_exhausted=rng.random() < 0.5,
                best_below_stop=rng.random() < 0.8,
                topk_answers=tuple(rng.choice("abcd") for _ in range(4)),
                shadow_solved_and_pruned=rng.random() < 0.2,
                outranked_correct=rng.random() < 0.3,
                baselines_all_failed=rng.random() < 0.5))
        counts = failure_triage(cases)
        failed = sum(1 for c in cases if c.failed)
        assert sum(counts.values()) == failed
        labels = [triage_label(c) for c in cases]
        assert all((lbl is None) == (not c.failed) for lbl, c in zip(labels, cases))


class TestTokenEfficiency:
    def test_acc_per_1k(self):
        # 60 accuracy points over 2000 tokens: 30 points per 1k tokens
        eff = token_efficiency(60.0, 2000.0)
        assert eff.acc_per_1k_tokens == pytest.approx(30.0)

    def test_marginal_cost_vs_greedy(self):
        eff = token_efficiency(70.0, 5000.0, greedy_accuracy_pct=50.0,
                               greedy_avg_tokens=2000.0)
        assert eff.delta_tokens_per_point == pytest.approx(150.0)

    def test_no_gain_reports_absent(self):
        eff = token_efficiency(50.0, 5000.0, greedy_accuracy_pct=50.0,
                               greedy_avg_tokens=2000.0)
        assert eff.delta_tokens_per_point is None


class TestRecordPlumbing:
    def test_coverage_and_accuracy(self):
        records = [rec(0, 0.9, True), rec(1, 0.9, False),
                   rec(2, None, False, abstained=True)]
        assert coverage(records) == pytest.approx(2 / 3)
        assert accuracy(records) == pytest.approx(1 / 3)

    def test_record_roundtrip(self):
        record = rec(1, 0.5, True, calls=7, tokens=123)
        assert PredictionRecord.from_dict(record.to_dict()) == record

    def test_non_abstained_requires_confidence(self):
        with pytest.raises(ValueError):
            PredictionRecord(episode_id="e", answer="x", abstained=False,
                             confidence=None, correct=True)
