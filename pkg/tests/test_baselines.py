from __future__ import annotations

import pytest

from reasonctl.answers import ProblemView
from reasonctl.backends import RequestKind, ScriptedBackend
from reasonctl.baselines import best_of_n, greedy_cot, hybrid_cascade, vanilla_tot
from reasonctl.budget import BudgetLedger, Category, FallbackAlreadyExtended
from reasonctl.controller import EpisodeResult
from reasonctl.trace import TraceWriter

VIEW = ProblemView(id="p1", prompt="toy problem")


def chain(answer: int, note: str = "solve it") -> str:
    return f"{note}\nFinal answer: \\boxed{{{answer}}}"


class TestGreedyCot:
    def test_exactly_one_call_and_greedy_decoding(self):
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE, chain(40))
        ledger = BudgetLedger(16)
        result = greedy_cot(VIEW, backend, ledger)
        assert result.answer == "40"
        assert ledger.total_calls == 1
        assert set(ledger.summary().per_category) == {"generation"}
        request = backend.seen[0]
        assert request.decoding.temperature == 0.0
        assert request.kind is RequestKind.FALLBACK_SAMPLE

    def test_no_oracle_calls(self):
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE, chain(1))
        ledger = BudgetLedger(16)
        greedy_cot(VIEW, backend, ledger)
        kinds = {r.kind for r in backend.seen}
        assert RequestKind.ORACLE_SCORE not in kinds
        assert RequestKind.VERIFY_CONFIDENCE not in kinds


class TestBestOfN:
    def test_sixteen_calls(self, sim_backend):
        ledger = BudgetLedger(16)
        best_of_n(ProblemView(id="sim-0003", prompt="q"), sim_backend, ledger, n=16)
        assert ledger.total_calls == 16

    def test_unanimous_vote(self):
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE,
                                         *[chain(9)] * 4)
        result = best_of_n(VIEW, backend, BudgetLedger(8), n=4)
        assert result.answer == "9"

    def test_majority_nine_to_seven(self):
        # brute-force count: 9 votes for 5, 7 votes for 3
        texts = [chain(5)] * 9 + [chain(3)] * 7
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE, *texts)
        result = best_of_n(VIEW, backend, BudgetLedger(16), n=16)
        votes = {"5": 9, "3": 7}
        assert result.answer == max(votes, key=votes.get) == "5"

    def test_tie_goes_to_first_sampled(self):
        texts = [chain(3), chain(5), chain(5), chain(3)]
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE, *texts)
        result = best_of_n(VIEW, backend, BudgetLedger(8), n=4)
        assert result.answer == "3"

    def test_unparseable_chains_do_not_vote(self):
        texts = ["rambling", chain(7), "more rambling"]
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE, *texts)
        result = best_of_n(VIEW, backend, BudgetLedger(8), n=3)
        assert result.answer == "7"

    def test_all_unparseable_abstains(self):
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE, "a", "b")
        result = best_of_n(VIEW, backend, BudgetLedger(8), n=2)
        assert result.abstained

    def test_distinct_fingerprints_per_sample(self):
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE,
                                         *[chain(2)] * 4)
        best_of_n(VIEW, backend, BudgetLedger(8), n=4)
        prints = {r.fingerprint() for r in backend.seen}
        assert len(prints) == 4


class TestVanillaTot:
    def test_spends_whole_budget_on_generation_plus_one_verify(self, sim_backend):
        ledger = BudgetLedger(16)
        result = vanilla_tot(ProblemView(id="sim-005", prompt="q"), sim_backend,
                             ledger, fanout=3, beam=2)
        summary = ledger.summary()
        assert summary.total_calls <= 16
        assert summary.per_category.get("verify", {}).get("calls", 0) <= 1
        non_gen = summary.total_calls - summary.per_category["generation"]["calls"]
        assert non_gen <= 1

    def test_first_complete_leaf_selected(self):
        backend = ScriptedBackend()
        backend.push(RequestKind.GENERATE,
                     "keep thinking",               # direct child, incomplete
                     chain(11, "direct finish"),    # decompose child completes
                     chain(22, "verify finish"))    # verify child completes later
        backend.push(RequestKind.VERIFY_CONFIDENCE, "0.7")
        ledger = BudgetLedger(4)
        result = vanilla_tot(VIEW, backend, ledger, fanout=3, beam=2)
        assert result.answer == "11"
        assert result.confidence == pytest.approx(0.7)

    def test_no_pruning_or_repair_requests(self, sim_backend):
        ledger = BudgetLedger(16)
        backend = ScriptedBackend()
        backend.push(RequestKind.GENERATE, *[chain(4)] * 15)
        backend.push(RequestKind.VERIFY_CONFIDENCE, "0.5")
        vanilla_tot(VIEW, backend, ledger)
        kinds = {r.kind for r in backend.seen}
        assert RequestKind.ORACLE_SCORE not in kinds
        assert RequestKind.REPAIR_SUFFIX not in kinds


def confident_primary(answer: str, confidence: float):
    def policy(problem, backend, ledger, trace=None, episode_id="", seed=0):
        return EpisodeResult(episode_id or "e", answer=answer, abstained=False,
                             confidence=confidence, candidate_answer=answer,
                             final_chain=f"x\nFinal answer: \\boxed{{{answer}}}")
    return policy


def abstaining_primary(problem, backend, ledger, trace=None, episode_id="", seed=0):
    return EpisodeResult(episode_id or "e", answer=None, abstained=True)


class TestHybridCascade:
    def test_confident_primary_passes_through_byte_identical(self):
        backend = ScriptedBackend()
        ledger = BudgetLedger(16)
        result = hybrid_cascade(VIEW, backend, ledger,
                                primary=confident_primary("123", 0.95),
                                abstain_below=0.6)
        assert result.answer == "123"
        assert not result.fallback_used
        assert ledger.capacity == 16
        assert not backend.seen  # no fallback traffic at all

    def test_abstention_routes_to_fallback_with_extension(self):
        backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE,
                                         *[chain(8)] * 16)
        ledger = BudgetLedger(16)
        result = hybrid_cascade(VIEW, backend, ledger, primary=abstaining_primary,
                                abstain_below=0.6, fallback_calls=16)
        assert result.fallback_used
        assert result.answer == "8"
        assert ledger.capacity == 32
        assert ledger.summary().per_category["fallback"]["calls"] == 16

    def test_threshold_semantics_differ(self):
        for threshold, expect_fallback in ((0.6, False), (0.8, True)):
            backend = ScriptedBackend().push(RequestKind.FALLBACK_SAMPLE,
                                             *[chain(8)] * 16)
            ledger = BudgetLedger(16)
            result = hybrid_cascade(VIEW, backend, ledger,
                                    primary=confident_primary("99", 0.7),
                                    abstain_below=threshold, fallback_calls=16)
            assert result.fallback_used == expect_fallback
            expected_answer = "8" if expect_fallback else "99"
            assert result.answer == expected_answer

    def test_double_extension_rejected(self):
        ledger = BudgetLedger(16)
        ledger.extend_for_fallback()
        backend = ScriptedBackend()
        with pytest.raises(FallbackAlreadyExtended):
            hybrid_cascade(VIEW, backend, ledger, primary=abstaining_primary)
