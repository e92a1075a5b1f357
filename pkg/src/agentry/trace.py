"""Structured event trace.

Every observable runtime event is recorded as a TraceEvent. A trace is the
runtime's testable output: two runs are equivalent exactly when their JSONL
renderings are byte-identical, so the encoding here is deliberately rigid
(fixed field order, sorted detail keys, compact separators).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from .model import AgentId, Ticks


class EventKind(str, enum.Enum):
    SPAWN = "spawn"
    TERMINATE = "terminate"
    SEND = "send"
    DELIVER = "deliver"
    MIGRATE_START = "migrate_start"
    MIGRATE_END = "migrate_end"
    BEHAVIOR_DONE = "behavior_done"
    OBJECTIVE_REACHED = "objective_reached"
    OBJECTIVE_MISSED = "objective_missed"
    CUSTOM = "custom"


def _sorted_jsonable(value: Any) -> Any:
    """Recursively order dict keys so the rendering is deterministic."""
    if isinstance(value, dict):
        return {k: _sorted_jsonable(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_sorted_jsonable(v) for v in value]
    return value


@dataclass(frozen=True)
class TraceEvent:
    tick: Ticks
    seq: int
    kind: EventKind
    agent: AgentId
    detail: dict[str, Any] = field(default_factory=dict)

    def to_jsonable(self) -> dict[str, Any]:
        # Field order is part of the format; do not reorder.
        return {
            "tick": self.tick,
            "seq": self.seq,
            "kind": self.kind.value,
            "agent": self.agent.value,
            "detail": _sorted_jsonable(self.detail),
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_jsonable(), separators=(",", ":"), ensure_ascii=True)


class TraceLog:
    """Append-only event list with JSONL rendering and simple filters.

    ``emit`` assigns sequence numbers, so events are totally ordered even
    when many share a tick.
    """

    def __init__(self, events: Iterable[TraceEvent] = ()) -> None:
        self._events: list[TraceEvent] = list(events)

    def emit(self, tick: Ticks, kind: EventKind, agent: AgentId, detail: dict[str, Any]) -> TraceEvent:
        event = TraceEvent(tick=tick, seq=len(self._events), kind=kind, agent=agent, detail=detail)
        self._events.append(event)
        return event

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self._events)

    def __getitem__(self, index: int) -> TraceEvent:
        return self._events[index]

    @property
    def events(self) -> list[TraceEvent]:
        return list(self._events)

    def of_kind(self, *kinds: EventKind) -> list[TraceEvent]:
        wanted = set(kinds)
        return [e for e in self._events if e.kind in wanted]

    def for_agent(self, agent: AgentId) -> list[TraceEvent]:
        return [e for e in self._events if e.agent == agent]

    def to_jsonl(self) -> str:
        """One event per line, trailing newline after the last event."""
        return "".join(e.to_json_line() + "\n" for e in self._events)

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    """Parse a trace file back into plain dicts (for inspection, not replay).

    A leading ``format_version`` header line, if present, is skipped.
    """
    lines = Path(path).read_text().splitlines()
    rows = [json.loads(line) for line in lines if line]
    if rows and "format_version" in rows[0]:
        rows = rows[1:]
    return rows
