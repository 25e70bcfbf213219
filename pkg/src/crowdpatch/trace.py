"""Append-only event trace.

Events are serialized one per line as JSON with a fixed key order, so two
runs can be compared byte for byte. Octet strings are hex-encoded when the
event is recorded, never later.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, TextIO


def _jsonable(value: Any) -> Any:
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = [_jsonable(v) for v in value]
        return sorted(items) if isinstance(value, (set, frozenset)) else items
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    height: int
    actor: str
    kind: str
    payload: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "height": self.height, "actor": self.actor,
             "kind": self.kind, "payload": self.payload},
            sort_keys=False, separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> TraceEvent:
        d = json.loads(line)
        return cls(d["seq"], d["height"], d["actor"], d["kind"], d["payload"])

    def get(self, key: str, default: Any = None) -> Any:
        return self.payload.get(key, default)


class Trace:
    def __init__(self) -> None:
        self.events: list[TraceEvent] = []

    def record(self, height: int, actor: str, kind: str, **payload: Any) -> int:
        seq = len(self.events)
        clean = {k: _jsonable(payload[k]) for k in sorted(payload)}
        self.events.append(TraceEvent(seq, height, actor, kind, clean))
        return seq

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, *kinds: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind in kinds]

    def dumps(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def write(self, fh: TextIO) -> None:
        fh.write(self.dumps())

    @classmethod
    def from_events(cls, events: Iterable[TraceEvent]) -> Trace:
        t = cls()
        t.events = list(events)
        return t

    @classmethod
    def loads(cls, text: str) -> Trace:
        return cls.from_events(TraceEvent.from_json(l) for l in text.splitlines() if l.strip())
