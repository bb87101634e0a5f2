"""Unified accounting of every model-side call against the episode budget.

Every backend invocation must present a :class:`ChargeToken`, so no call can
bypass the ledger. Charges are append-only; reservations let a batch of
calls be claimed atomically before any of them is issued.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable


class Category(str, Enum):
    GENERATION = "generation"
    PROCESS_EVAL = "process_eval"
    VERIFY = "verify"
    REPAIR = "repair"
    CONTROLLER = "controller"
    FALLBACK = "fallback"


class BudgetExceeded(RuntimeError):
    def __init__(self, requested: int, remaining: int):
        self.requested = requested
        self.remaining = remaining
        super().__init__(f"requested {requested} call(s), {remaining} remaining")


class FallbackAlreadyExtended(RuntimeError):
    pass


@dataclass
class Charge:
    category: Category
    calls: int
    tokens_in: int = 0
    tokens_out: int = 0


class ChargeToken:
    """Proof that a call was charged; records its token usage exactly once."""

    def __init__(self, ledger: "BudgetLedger", charge: Charge):
        self._ledger = ledger
        self._charge = charge
        self._recorded = False

    @property
    def category(self) -> Category:
        return self._charge.category

    @property
    def recorded(self) -> bool:
        return self._recorded

    def record_tokens(self, tokens_in: int, tokens_out: int) -> None:
        if self._recorded:
            raise RuntimeError("token usage already recorded for this charge")
        self._charge.tokens_in += int(tokens_in)
        self._charge.tokens_out += int(tokens_out)
        self._recorded = True
        self._ledger._notify(self._charge)


class Reservation:
    """Calls claimed up front for a batch; unused capacity is released on exit."""

    def __init__(self, ledger: "BudgetLedger", calls: int):
        self._ledger = ledger
        self._held = calls

    @property
    def held(self) -> int:
        return self._held

    def consume(self, category: Category) -> ChargeToken:
        with self._ledger._lock:
            if self._held < 1:
                raise BudgetExceeded(1, 0)
            self._held -= 1
            self._ledger._reserved -= 1
            return self._ledger._append(category, 1)

    def release(self) -> None:
        with self._ledger._lock:
            self._ledger._reserved -= self._held
            self._held = 0

    def __enter__(self) -> "Reservation":
        return self

    def __exit__(self, *exc) -> None:
        self.release()


@dataclass
class BudgetSummary:
    capacity: int
    total_calls: int
    tokens_in: int
    tokens_out: int
    per_category: dict[str, dict[str, int]]
    fallback_extensions: list[int] = field(default_factory=list)

    @property
    def tokens_total(self) -> int:
        return self.tokens_in + self.tokens_out

    def to_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "total_calls": self.total_calls,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "tokens_total": self.tokens_total,
            "per_category": self.per_category,
            "fallback_extensions": list(self.fallback_extensions),
        }


class BudgetLedger:
    """Thread-safe call/token ledger with a hard capacity.

    ``on_charge`` fires once per charge, after its token usage is recorded;
    the harness uses it to emit Charge trace events.
    """

    def __init__(self, capacity: int, on_charge: Callable[[Charge], None] | None = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.charges: list[Charge] = []
        self.fallback_extensions: list[int] = []
        self._reserved = 0
        self._lock = threading.RLock()
        self._on_charge = on_charge

    @property
    def total_calls(self) -> int:
        with self._lock:
            return sum(c.calls for c in self.charges)

    @property
    def remaining(self) -> int:
        with self._lock:
            return self.capacity - self.total_calls - self._reserved

    @property
    def reserved(self) -> int:
        return self._reserved

    def _append(self, category: Category, calls: int) -> ChargeToken:
        charge = Charge(category=category, calls=calls)
        self.charges.append(charge)
        return ChargeToken(self, charge)

    def _notify(self, charge: Charge) -> None:
        if self._on_charge is not None:
            self._on_charge(charge)

    def charge(self, category: Category, calls: int = 1) -> ChargeToken:
        if calls < 1:
            raise ValueError("calls must be >= 1")
        with self._lock:
            if calls > self.remaining:
                raise BudgetExceeded(calls, self.remaining)
            return self._append(category, calls)

    def reserve(self, calls: int) -> Reservation:
        if calls < 1:
            raise ValueError("calls must be >= 1")
        with self._lock:
            if calls > self.remaining:
                raise BudgetExceeded(calls, self.remaining)
            self._reserved += calls
            return Reservation(self, calls)

    def extend_for_fallback(self, extra: int = 16) -> None:
        """Grow capacity once for the fallback pass; a second extension is an error."""
        with self._lock:
            if self.fallback_extensions:
                raise FallbackAlreadyExtended("fallback budget already extended this episode")
            self.capacity += extra
            self.fallback_extensions.append(extra)

    def summary(self) -> BudgetSummary:
        with self._lock:
            per: dict[str, dict[str, int]] = {}
            for charge in self.charges:
                bucket = per.setdefault(
                    charge.category.value, {"calls": 0, "tokens_in": 0, "tokens_out": 0}
                )
                bucket["calls"] += charge.calls
                bucket["tokens_in"] += charge.tokens_in
                bucket["tokens_out"] += charge.tokens_out
            return BudgetSummary(
                capacity=self.capacity,
                total_calls=sum(c.calls for c in self.charges),
                tokens_in=sum(c.tokens_in for c in self.charges),
                tokens_out=sum(c.tokens_out for c in self.charges),
                per_category=per,
                fallback_extensions=list(self.fallback_extensions),
            )
