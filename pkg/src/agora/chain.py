"""Hash-linked append-only log of governance events.

Every mint, space creation, proposal transition, ballot, and result is an
event whose SHA-256 digest covers its sequence number, timestamp, kind,
payload, and the previous event's digest. Any single-byte change to any
stored field breaks verification at the earliest affected sequence
number, which gives the tamper evidence a public chain would provide.

The on-disk form is JSON Lines: one event per line, fields in fixed
order, digests hex-encoded, payload embedded as its (canonical) JSON
object so the file diffs cleanly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Any, Iterable, Mapping

from .canonical import canonical_bytes, is_canonical
from .errors import ChainBroken, InvalidInput

GENESIS_HASH = bytes(32)
HASH_BYTES = 32


class EventKind(str, Enum):
    MINT = "MINT"
    SPACE_CREATED = "SPACE_CREATED"
    PROPOSAL_OPENED = "PROPOSAL_OPENED"
    BALLOT_CAST = "BALLOT_CAST"
    PROPOSAL_CLOSED = "PROPOSAL_CLOSED"
    RESULT_PUBLISHED = "RESULT_PUBLISHED"
    SESSION_ADVANCED = "SESSION_ADVANCED"


def event_digest(seq: int, timestamp: int, kind: str, payload: bytes, prev_hash: bytes) -> bytes:
    """SHA-256 over an unambiguous encoding of all linked fields."""
    h = hashlib.sha256()
    h.update(seq.to_bytes(8, "big"))
    h.update(timestamp.to_bytes(8, "big"))
    kind_b = kind.encode("utf-8")
    h.update(len(kind_b).to_bytes(2, "big"))
    h.update(kind_b)
    h.update(len(payload).to_bytes(8, "big"))
    h.update(payload)
    h.update(prev_hash)
    return h.digest()


@dataclass(frozen=True)
class ChainEvent:
    seq: int
    timestamp: int
    kind: EventKind
    payload: bytes
    prev_hash: bytes
    hash: bytes

    def payload_json(self) -> Any:
        return json.loads(self.payload.decode("utf-8"))


class AuditChain:
    """Single-appender event log; readers see an immutable prefix."""

    def __init__(self, events: Iterable[ChainEvent] = ()):
        self._events: list[ChainEvent] = list(events)

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def __getitem__(self, seq: int) -> ChainEvent:
        return self._events[seq]

    @property
    def events(self) -> tuple[ChainEvent, ...]:
        return tuple(self._events)

    def head_hash(self) -> bytes:
        return self._events[-1].hash if self._events else GENESIS_HASH

    def append(self, kind: EventKind, payload: bytes | Mapping, *, timestamp: int) -> ChainEvent:
        """Append an event with correct links and return it.

        Mapping payloads are canonicalized; byte payloads are stored
        verbatim (the caller guarantees canonical form).
        """
        if isinstance(payload, Mapping):
            payload_b = canonical_bytes(payload, strict=False)
        else:
            payload_b = bytes(payload)
        seq = len(self._events)
        prev = self.head_hash()
        digest = event_digest(seq, timestamp, kind.value, payload_b, prev)
        event = ChainEvent(
            seq=seq, timestamp=timestamp, kind=kind,
            payload=payload_b, prev_hash=prev, hash=digest,
        )
        self._events.append(event)
        return event


def verify_chain(events: Iterable[ChainEvent]) -> int | None:
    """Recompute every link and digest.

    Returns None when the chain is valid, else the seq of the earliest
    event whose stored fields do not recompute. An empty log is valid.
    """
    prev = GENESIS_HASH
    for index, event in enumerate(events):
        if event.seq != index:
            return index
        if event.prev_hash != prev:
            return index
        expected = event_digest(
            event.seq, event.timestamp, event.kind.value, event.payload, event.prev_hash
        )
        if event.hash != expected:
            return index
        prev = event.hash
    return None


# JSONL field order is fixed so exports are byte-stable and diff-able.
_JSONL_FIELDS = ("seq", "ts", "kind", "payload", "prev_hash", "hash")


def event_to_jsonl(event: ChainEvent) -> str:
    if not is_canonical(event.payload):
        raise InvalidInput(f"event {event.seq} payload is not canonical JSON; cannot export")
    row = {
        "seq": event.seq,
        "ts": event.timestamp,
        "kind": event.kind.value,
        "payload": json.loads(event.payload.decode("utf-8")),
        "prev_hash": event.prev_hash.hex(),
        "hash": event.hash.hex(),
    }
    # dict literal above preserves _JSONL_FIELDS order; no key sorting here
    return json.dumps(row, separators=(",", ":"), ensure_ascii=False)


def export_jsonl(chain: AuditChain, sink: IO[str]) -> int:
    """Write one event per line; returns the number of lines written."""
    count = 0
    for event in chain:
        sink.write(event_to_jsonl(event) + "\n")
        count += 1
    return count


def _event_from_row(row: dict) -> ChainEvent:
    try:
        return ChainEvent(
            seq=int(row["seq"]),
            timestamp=int(row["ts"]),
            kind=EventKind(row["kind"]),
            payload=canonical_bytes(row["payload"], strict=False),
            prev_hash=bytes.fromhex(row["prev_hash"]),
            hash=bytes.fromhex(row["hash"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidInput(f"malformed chain event row: {exc}") from exc


def import_jsonl(source: IO[str]) -> AuditChain:
    """Parse and verify a JSONL export; raises ChainBroken on any defect."""
    events: list[ChainEvent] = []
    for lineno, line in enumerate(source):
        line = line.strip()
        if not line:
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"line {lineno}: not valid JSON: {exc}") from exc
        events.append(_event_from_row(row))
    broken = verify_chain(events)
    if broken is not None:
        raise ChainBroken(broken)
    return AuditChain(events)
