from __future__ import annotations

import threading

import pytest

from reasonctl.budget import (BudgetExceeded, BudgetLedger, Category,
                              FallbackAlreadyExtended)


def test_charge_reduces_remaining():
    ledger = BudgetLedger(16)
    ledger.charge(Category.GENERATION)
    assert ledger.remaining == 15
    assert ledger.total_calls == 1


def test_charge_over_capacity_rejected():
    ledger = BudgetLedger(2)
    ledger.charge(Category.GENERATION, calls=2)
    with pytest.raises(BudgetExceeded):
        ledger.charge(Category.VERIFY)


def test_reserve_consume_release():
    ledger = BudgetLedger(5)
    reservation = ledger.reserve(3)
    assert ledger.remaining == 2
    token = reservation.consume(Category.GENERATION)
    token.record_tokens(10, 20)
    assert ledger.total_calls == 1
    reservation.release()
    assert ledger.remaining == 4
    with pytest.raises(BudgetExceeded):
        reservation.consume(Category.VERIFY)


def test_reservation_context_manager_releases_unused():
    ledger = BudgetLedger(4)
    with ledger.reserve(3) as res:
        res.consume(Category.GENERATION).record_tokens(1, 1)
    assert ledger.remaining == 3


def test_reserve_more_than_remaining_rejected():
    ledger = BudgetLedger(3)
    ledger.charge(Category.GENERATION, calls=2)
    with pytest.raises(BudgetExceeded):
        ledger.reserve(2)


def test_token_usage_recorded_once():
    ledger = BudgetLedger(2)
    token = ledger.charge(Category.PROCESS_EVAL)
    token.record_tokens(5, 7)
    with pytest.raises(RuntimeError):
        token.record_tokens(1, 1)


def test_extend_for_fallback_once():
    ledger = BudgetLedger(16)
    ledger.extend_for_fallback()
    assert ledger.capacity == 32
    assert ledger.fallback_extensions == [16]
    with pytest.raises(FallbackAlreadyExtended):
        ledger.extend_for_fallback()


def test_no_extension_keeps_capacity():
    ledger = BudgetLedger(16)
    assert ledger.capacity == 16
    assert ledger.summary().fallback_extensions == []


def test_summary_matches_brute_force_fold():
    ledger = BudgetLedger(50)
    plan = [(Category.GENERATION, 4, 9), (Category.PROCESS_EVAL, 3, 2),
            (Category.VERIFY, 1, 1), (Category.GENERATION, 7, 0),
            (Category.FALLBACK, 2, 8)]
    for category, tin, tout in plan:
        ledger.charge(category).record_tokens(tin, tout)
    summary = ledger.summary()
    # independent fold over the raw charge log
    calls = sum(c.calls for c in ledger.charges)
    tin = sum(c.tokens_in for c in ledger.charges)
    tout = sum(c.tokens_out for c in ledger.charges)
    assert summary.total_calls == calls == 5
    assert summary.tokens_in == tin == 17
    assert summary.tokens_out == tout == 20
    assert summary.tokens_total == 37
    gen = summary.per_category["generation"]
    assert gen["calls"] == 2 and gen["tokens_in"] == 11

    roundtrip = summary.to_dict()
    assert roundtrip["total_calls"] == 5


def test_on_charge_fires_after_tokens_recorded():
    seen = []
    ledger = BudgetLedger(4, on_charge=lambda c: seen.append((c.category, c.tokens_in)))
    token = ledger.charge(Category.VERIFY)
    assert seen == []
    token.record_tokens(3, 4)
    assert seen == [(Category.VERIFY, 3)]


def test_charges_are_append_only_under_threads():
    ledger = BudgetLedger(200)
    errors = []

    def worker():
        try:
            for _ in range(20):
                with ledger.reserve(2) as res:
                    res.consume(Category.GENERATION).record_tokens(1, 1)
                    res.consume(Category.VERIFY).record_tokens(1, 1)
        except Exception as exc:  # pragma: no cover - failure reporting
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(5)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert ledger.total_calls == 200
    assert ledger.remaining == 0
    with pytest.raises(BudgetExceeded):
        ledger.charge(Category.GENERATION)


def test_capacity_validation():
    with pytest.raises(ValueError):
        BudgetLedger(0)
