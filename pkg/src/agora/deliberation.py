"""Participant sessions, group rooms, and the pluggable AI responder.

Each participant moves through a fixed pipeline:

    REGISTERED -> INTRO -> VALUE_PROMPT -> AI_CHAT -> GROUP_ROOM
               -> SURVEY -> VOTING -> DONE

with no skipping (an admin abort jumps straight to DONE). The value
prompt is a one-shot yes/no/maybe question whose answer seeds the AI
chat branch. Exit gates keep deliberation honest: at least three user
turns in the AI chat and a minimum dwell in the group room.

Rooms assign every message a gapless per-room sequence number under a
single lock, so all members observe the identical total order.
"""

from __future__ import annotations

import hashlib
import secrets
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

from .errors import Forbidden, IllegalState, IllegalTransition, InvalidInput

MIN_AI_USER_TURNS = 3
MIN_ROOM_DWELL_MS = 5 * 60 * 1000
ROOM_CAPACITY_DEFAULT = 10
AI_TIMEOUT_S_DEFAULT = 15.0
AI_FALLBACK_REPLY = (
    "I could not reach the assistant just now. Please continue with your "
    "thoughts, or move on when you are ready."
)


class SessionState(str, Enum):
    REGISTERED = "REGISTERED"
    INTRO = "INTRO"
    VALUE_PROMPT = "VALUE_PROMPT"
    AI_CHAT = "AI_CHAT"
    GROUP_ROOM = "GROUP_ROOM"
    SURVEY = "SURVEY"
    VOTING = "VOTING"
    DONE = "DONE"


STATE_ORDER = tuple(SessionState)


class SessionEvent(str, Enum):
    START_INTRO = "START_INTRO"
    INTRO_DONE = "INTRO_DONE"
    VALUE_ANSWERED = "VALUE_ANSWERED"
    CHAT_DONE = "CHAT_DONE"
    ROOM_DONE = "ROOM_DONE"
    SURVEY_DONE = "SURVEY_DONE"
    BALLOT_ACCEPTED = "BALLOT_ACCEPTED"
    ABORT = "ABORT"


_TRANSITIONS: dict[tuple[SessionState, SessionEvent], SessionState] = {
    (SessionState.REGISTERED, SessionEvent.START_INTRO): SessionState.INTRO,
    (SessionState.INTRO, SessionEvent.INTRO_DONE): SessionState.VALUE_PROMPT,
    (SessionState.VALUE_PROMPT, SessionEvent.VALUE_ANSWERED): SessionState.AI_CHAT,
    (SessionState.AI_CHAT, SessionEvent.CHAT_DONE): SessionState.GROUP_ROOM,
    (SessionState.GROUP_ROOM, SessionEvent.ROOM_DONE): SessionState.SURVEY,
    (SessionState.SURVEY, SessionEvent.SURVEY_DONE): SessionState.VOTING,
    (SessionState.VOTING, SessionEvent.BALLOT_ACCEPTED): SessionState.DONE,
}


class ValueAnswer(str, Enum):
    YES = "YES"
    NO = "NO"
    MAYBE = "MAYBE"


@dataclass
class ChatMessage:
    role: str  # "user" | "assistant"
    text: str
    at: int


@dataclass
class Session:
    participant: str
    state: SessionState = SessionState.REGISTERED
    value_answer: ValueAnswer | None = None
    ai_transcript: list[ChatMessage] = field(default_factory=list)
    entered_at: dict[SessionState, int] = field(default_factory=dict)
    room_id: str | None = None
    min_user_turns: int = MIN_AI_USER_TURNS
    min_room_dwell_ms: int = MIN_ROOM_DWELL_MS

    def user_turns(self) -> int:
        return sum(1 for m in self.ai_transcript if m.role == "user")


@dataclass(frozen=True)
class SeedCase:
    """Experiment configuration shipped as a document, not code: the text
    under deliberation, the value question, per-answer chat seeds, and
    the suggested discussion topics."""

    interpretation_text: str
    value_question: str
    branch_seeds: dict[str, str]
    suggested_topics: tuple[str, ...]

    @classmethod
    def from_dict(cls, doc: dict) -> "SeedCase":
        try:
            branches = {k.lower(): str(v) for k, v in doc["branch_seeds"].items()}
            missing = {"yes", "no", "maybe"} - branches.keys()
            if missing:
                raise InvalidInput(f"branch_seeds missing {sorted(missing)}")
            return cls(
                interpretation_text=str(doc["interpretation_text"]),
                value_question=str(doc["value_question"]),
                branch_seeds=branches,
                suggested_topics=tuple(str(t) for t in doc["suggested_topics"]),
            )
        except KeyError as exc:
            raise InvalidInput(f"seed case document missing field {exc}") from exc


def advance(session: Session, event: SessionEvent, *, now: int) -> Session:
    """Apply one state-machine event in place and return the session.

    Gate checks: CHAT_DONE requires the minimum user turns, ROOM_DONE the
    minimum dwell since entering the room. ABORT is legal anywhere and
    jumps to DONE.
    """
    if event is SessionEvent.ABORT:
        session.state = SessionState.DONE
        session.entered_at[SessionState.DONE] = now
        return session
    target = _TRANSITIONS.get((session.state, event))
    if target is None:
        raise IllegalTransition(session.state.value, event.value)
    if event is SessionEvent.CHAT_DONE and session.user_turns() < session.min_user_turns:
        raise IllegalTransition(
            session.state.value, event.value,
            f"{session.user_turns()} user turns < required {session.min_user_turns}",
        )
    if event is SessionEvent.ROOM_DONE:
        entered = session.entered_at.get(SessionState.GROUP_ROOM, now)
        if now - entered < session.min_room_dwell_ms:
            raise IllegalTransition(
                session.state.value, event.value,
                f"dwell {now - entered}ms < required {session.min_room_dwell_ms}ms",
            )
    session.state = target
    session.entered_at[target] = now
    return session


def answer_value_prompt(session: Session, answer: ValueAnswer | str, *,
                        seed_case: SeedCase, now: int) -> Session:
    """Record the one-shot yes/no/maybe answer and seed the AI chat with
    the matching branch opener."""
    if session.state is not SessionState.VALUE_PROMPT:
        raise IllegalTransition(session.state.value, SessionEvent.VALUE_ANSWERED.value)
    if session.value_answer is not None:
        raise IllegalState("value prompt already answered")
    try:
        answer = ValueAnswer(answer.upper() if isinstance(answer, str) else answer)
    except ValueError:
        raise InvalidInput(
            f"answer must be one of {[a.value for a in ValueAnswer]}"
        ) from None
    session.value_answer = answer
    advance(session, SessionEvent.VALUE_ANSWERED, now=now)
    seed_text = seed_case.branch_seeds[answer.value.lower()]
    session.ai_transcript.append(ChatMessage(role="assistant", text=seed_text, at=now))
    return session


class AiResponder(Protocol):
    """External interface to the AI agent: full transcript plus the seed
    case context in, reply text out."""

    def __call__(self, transcript: list[ChatMessage], seed_case: SeedCase) -> str: ...


@dataclass(frozen=True)
class AiExchange:
    prompt: str
    reply: str
    latency_ms: int
    fallback_used: bool


def ai_turn(session: Session, user_text: str, responder: AiResponder, *,
            seed_case: SeedCase, now: int,
            timeout_s: float = AI_TIMEOUT_S_DEFAULT) -> AiExchange:
    """Run one user/assistant exchange.

    The responder sees the full transcript. A dead or slow responder
    never blocks the session: on timeout or error the canned fallback
    reply is recorded with fallback_used set.
    """
    if session.state is not SessionState.AI_CHAT:
        raise IllegalTransition(session.state.value, "AI_TURN")
    if not user_text or not user_text.strip():
        raise InvalidInput("user text must be non-empty")

    session.ai_transcript.append(ChatMessage(role="user", text=user_text, at=now))
    started = time.monotonic()

    # Daemon thread, not an executor: a hung responder must neither block
    # this call past the timeout nor block interpreter shutdown.
    result: list[str] = []
    finished = threading.Event()

    def _invoke():
        try:
            result.append(responder(list(session.ai_transcript), seed_case))
        except Exception:
            pass
        finally:
            finished.set()

    threading.Thread(target=_invoke, daemon=True).start()
    if finished.wait(timeout_s) and result and result[0]:
        reply = result[0]
        fallback = False
    else:
        reply = AI_FALLBACK_REPLY
        fallback = True
    latency_ms = int((time.monotonic() - started) * 1000)
    session.ai_transcript.append(ChatMessage(role="assistant", text=reply, at=now))
    return AiExchange(prompt=user_text, reply=reply, latency_ms=latency_ms,
                      fallback_used=fallback)


@dataclass(frozen=True)
class RoomMessage:
    room_id: str
    seq: int
    author: str
    text: str
    at: int


class Room:
    """A deliberation room with a single sequencer.

    post() assigns gapless, strictly increasing sequence numbers and
    fans the message out to every member's inbox under one lock, so the
    delivery order is identical for all members.
    """

    def __init__(self, room_id: str, capacity: int = ROOM_CAPACITY_DEFAULT,
                 suggested_topics: tuple[str, ...] = ()):
        self.id = room_id
        self.capacity = capacity
        self.suggested_topics = suggested_topics
        self.members: set[str] = set()
        self.messages: list[RoomMessage] = []
        self.inboxes: dict[str, list[RoomMessage]] = {}
        self._lock = threading.Lock()

    def join(self, address: str) -> None:
        with self._lock:
            if address in self.members:
                return
            if len(self.members) >= self.capacity:
                raise IllegalState(f"room {self.id} is full ({self.capacity})")
            self.members.add(address)
            self.inboxes[address] = []

    def leave(self, address: str) -> None:
        with self._lock:
            self.members.discard(address)

    def post(self, author: str, text: str, *, now: int) -> RoomMessage:
        if not text:
            raise InvalidInput("message text must be non-empty")
        with self._lock:
            if author not in self.members:
                raise Forbidden(f"{author} is not a member of room {self.id}")
            message = RoomMessage(
                room_id=self.id, seq=len(self.messages) + 1,
                author=author, text=text, at=now,
            )
            self.messages.append(message)
            for member in self.members:
                self.inboxes[member].append(message)
            return message


class RoomAssigner:
    """Fills rooms by arrival within each treatment condition, opening a
    new room when the current one reaches capacity.

    Room ids are salted digests of the grouping key: participants in the
    same condition land together, but the id they see never names their
    treatment condition (assignments stay hidden).
    """

    def __init__(self, capacity: int = ROOM_CAPACITY_DEFAULT,
                 suggested_topics: tuple[str, ...] = (),
                 salt: str | None = None):
        self.capacity = capacity
        self.suggested_topics = suggested_topics
        self.salt = secrets.token_hex(8) if salt is None else salt
        self.rooms: dict[str, Room] = {}
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()

    def _room_id(self, condition_key: str, index: int) -> str:
        digest = hashlib.sha256(f"{self.salt}:{condition_key}".encode()).hexdigest()
        return f"room-{digest[:10]}-{index}"

    def assign(self, condition_key: str, address: str) -> Room:
        with self._lock:
            index = self._counters.get(condition_key, 0)
            room_id = self._room_id(condition_key, index)
            room = self.rooms.get(room_id)
            if room is None:
                room = Room(room_id, self.capacity, self.suggested_topics)
                self.rooms[room_id] = room
            if len(room.members) >= room.capacity:
                index += 1
                self._counters[condition_key] = index
                room = Room(self._room_id(condition_key, index),
                            self.capacity, self.suggested_topics)
                self.rooms[room.id] = room
        room.join(address)
        return room
