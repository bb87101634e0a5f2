"""Append-only decision traces: one JSON event per line, replayable.

With the logical clock enabled (the default for simulated runs) timestamps
are the event sequence numbers, so two identical runs produce byte-identical
trace files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO


class EventKind(str, Enum):
    SELECT = "select"
    GENERATE = "generate"
    ORACLE_SCORE = "oracle_score"
    VERIFY = "verify"
    ACTION = "action"
    REPAIR = "repair"
    STOP = "stop"
    ABSTAIN = "abstain"
    FALLBACK_START = "fallback_start"
    CHARGE = "charge"


@dataclass
class TraceEvent:
    episode_id: str
    seq: int
    kind: EventKind
    payload: dict
    timestamp: float

    def to_json(self) -> str:
        return json.dumps({
            "episode_id": self.episode_id,
            "seq": self.seq,
            "kind": self.kind.value,
            "payload": self.payload,
            "timestamp": self.timestamp,
        }, sort_keys=True)

    @classmethod
    def from_dict(cls, row: dict) -> "TraceEvent":
        return cls(episode_id=row["episode_id"], seq=row["seq"],
                   kind=EventKind(row["kind"]), payload=row["payload"],
                   timestamp=row["timestamp"])


class TraceWriter:
    """Collects events in memory and optionally streams them to a file."""

    def __init__(self, episode_id: str, path: str | Path | None = None,
                 logical_clock: bool = True):
        self.episode_id = episode_id
        self.logical_clock = logical_clock
        self.events: list[TraceEvent] = []
        self._seq = 0
        self._handle: IO[str] | None = None
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(path, "w", encoding="utf-8")

    def emit(self, kind: EventKind, payload: dict) -> TraceEvent:
        self._seq += 1
        stamp = float(self._seq) if self.logical_clock else time.time()
        event = TraceEvent(episode_id=self.episode_id, seq=self._seq,
                           kind=kind, payload=payload, timestamp=stamp)
        self.events.append(event)
        if self._handle is not None:
            self._handle.write(event.to_json() + "\n")
            self._handle.flush()
        return event

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def charge_calls(self) -> int:
        return sum(e.payload.get("calls", 0) for e in self.events
                   if e.kind is EventKind.CHARGE)


def read_trace(path: str | Path) -> list[TraceEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                events.append(TraceEvent.from_dict(json.loads(line)))
    for prev, cur in zip(events, events[1:]):
        if cur.seq <= prev.seq:
            raise ValueError(f"trace {path}: sequence numbers must strictly increase")
    return events
