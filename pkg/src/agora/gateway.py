"""HTTP + realtime service boundary over the platform core.

All endpoints live under /v1. State is event-sourced: the audit chain in
``<data_dir>/events.jsonl`` is the single source of truth; startup
replays it (refusing to start on a corrupt chain, naming the broken
seq) and every mutation appends before the response is sent.

Auth is a server-issued bearer token per address, handed out at
registration against the participant's public key. Ballots are
additionally self-authenticating (they carry key and signature), so a
restarted server keeps accepting votes without any off-chain registry.

No interim results leak: the result endpoint is 404 until PUBLISHED,
proposal metadata never includes aggregates, and chain reads seal
BALLOT_CAST payloads (allocation replaced by its digest) until the
proposal closes.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import os
import secrets
import threading
import time
import urllib.request
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from fastapi import Depends, FastAPI, Header, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .chain import EventKind, import_jsonl
from .deliberation import ChatMessage, SeedCase, SessionEvent, SessionState
from .errors import (
    AgoraError,
    ChainBroken,
    Forbidden,
    IllegalState,
    InvalidInput,
    NotFound,
    Unauthenticated,
)
from .ledger import PolicyKind, PowerPolicy
from .platform import DEFAULT_SEED_CASE, Platform
from .spaces import ProposalStatus, Space, VotingMethod
from .tally import Ballot, RejectionReason

SESSION_TOKEN_TTL_MS = 24 * 3600 * 1000

_STATUS_BY_ERROR = [
    (Unauthenticated, 401),
    (Forbidden, 403),
    (NotFound, 404),
    (IllegalState, 409),
    (InvalidInput, 422),
]


# --- configuration -----------------------------------------------------------

@dataclass
class ApiConfig:
    """Operator configuration; see README for the file format."""

    host: str = "127.0.0.1"
    port: int = 8400
    data_dir: Path = Path("./data")
    seed_case_path: Path | None = None
    room_capacity: int = 10
    rng_seed: int = 1
    ai_min_turns: int = 3
    room_dwell_ms: int = 5 * 60 * 1000
    responder_kind: str = "stub"  # "stub" | "http"
    responder_url: str | None = None
    responder_timeout_s: float = 15.0
    spaces: list[dict] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path) -> "ApiConfig":
        doc = json.loads(Path(path).read_text())
        config = cls(
            host=doc.get("host", "127.0.0.1"),
            port=int(doc.get("port", 8400)),
            data_dir=Path(doc.get("data_dir", "./data")),
            seed_case_path=Path(doc["seed_case_path"]) if doc.get("seed_case_path") else None,
            room_capacity=int(doc.get("room_capacity", 10)),
            rng_seed=int(doc.get("rng_seed", 1)),
            ai_min_turns=int(doc.get("ai_min_turns", 3)),
            room_dwell_ms=int(doc.get("room_dwell_ms", 5 * 60 * 1000)),
            responder_kind=doc.get("responder", {}).get("kind", "stub"),
            responder_url=doc.get("responder", {}).get("url"),
            responder_timeout_s=float(doc.get("responder", {}).get("timeout_s", 15.0)),
            spaces=list(doc.get("spaces", [])),
        )
        # environment overrides for deploy-time knobs
        if os.environ.get("AGORA_PORT"):
            config.port = int(os.environ["AGORA_PORT"])
        if os.environ.get("AGORA_DATA_DIR"):
            config.data_dir = Path(os.environ["AGORA_DATA_DIR"])
        return config

    def load_seed_case(self) -> SeedCase:
        if self.seed_case_path is None:
            return DEFAULT_SEED_CASE
        if not self.seed_case_path.exists():
            raise InvalidInput(f"seed case file not found: {self.seed_case_path}")
        return SeedCase.from_dict(json.loads(self.seed_case_path.read_text()))


def space_from_config(doc: dict) -> Space:
    policy = doc["power_policy"]
    return Space(
        id=doc["id"],
        voting_method=VotingMethod(doc["voting_method"]),
        power_policy=PowerPolicy(
            kind=PolicyKind(policy["kind"]),
            total_supply=int(policy["total_supply"]),
            rng_seed=int(policy.get("rng_seed", 0)),
        ),
        admins=frozenset(doc["admins"]),
        moderators=frozenset(doc.get("moderators", [])),
        vote_duration=int(doc.get("vote_duration_ms", 48 * 3600 * 1000)),
        success_threshold=Fraction(doc.get("success_threshold", "1/4")),
    )


# --- AI responder adapters -----------------------------------------------------

def stub_responder(transcript: list[ChatMessage], seed_case: SeedCase) -> str:
    """Deterministic built-in responder: acknowledges the user and steers
    toward the configured discussion topics."""
    user_turns = sum(1 for m in transcript if m.role == "user")
    topics = seed_case.suggested_topics or ("what matters most to you here",)
    topic = topics[(user_turns - 1) % len(topics)]
    return (
        f"Noted: \"{transcript[-1].text[:120]}\". "
        f"Could you say more about {topic}?"
    )


def http_responder(url: str, timeout_s: float):
    def call(transcript: list[ChatMessage], seed_case: SeedCase) -> str:
        body = json.dumps({
            "transcript": [{"role": m.role, "text": m.text} for m in transcript],
            "context": {
                "interpretation_text": seed_case.interpretation_text,
                "value_question": seed_case.value_question,
                "suggested_topics": list(seed_case.suggested_topics),
            },
        }).encode("utf-8")
        request = urllib.request.Request(
            url, data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(request, timeout=timeout_s) as response:
            return json.loads(response.read().decode("utf-8"))["reply"]
    return call


# --- request/response bodies ---------------------------------------------------

class RegisterBody(BaseModel):
    public_key: str  # hex, 32 bytes


class PowerPolicyBody(BaseModel):
    kind: str
    total_supply: int
    rng_seed: int = 0


class SpaceBody(BaseModel):
    id: str
    voting_method: str
    power_policy: PowerPolicyBody
    admins: list[str]
    moderators: list[str] = Field(default_factory=list)
    vote_duration_ms: int = 48 * 3600 * 1000
    success_threshold: str = "1/4"


class MintBody(BaseModel):
    participants: list[str]


class ProposalBody(BaseModel):
    id: str
    options: list[str]


class CloseBody(BaseModel):
    force: bool = False


class VoteBody(BaseModel):
    proposal_id: str
    voter: str
    allocation: list[int]
    cast_at: int
    public_key: str
    signature: str


class AdvanceBody(BaseModel):
    event: str


class ValueAnswerBody(BaseModel):
    answer: str


class AiTurnBody(BaseModel):
    text: str


# --- serializers ---------------------------------------------------------------

def space_json(space: Space) -> dict:
    return {
        "id": space.id,
        "voting_method": space.voting_method.value,
        "power_policy": {
            "kind": space.power_policy.kind.value,
            "total_supply": space.power_policy.total_supply,
            "rng_seed": space.power_policy.rng_seed,
        },
        "admins": sorted(space.admins),
        "moderators": sorted(space.moderators),
        "vote_duration_ms": space.vote_duration,
        "success_threshold": str(space.success_threshold),
    }


def proposal_json(p) -> dict:
    # status metadata only: no ballots, no counts, no aggregates
    return {
        "id": p.id,
        "space_id": p.space_id,
        "options": list(p.options),
        "open_at": p.open_at,
        "close_at": p.close_at,
        "status": p.status.value,
        "snapshot_ref": p.snapshot_ref,
    }


def session_json(s) -> dict:
    return {
        "participant": s.participant,
        "state": s.state.value,
        "value_answer": s.value_answer.value if s.value_answer else None,
        "room_id": s.room_id,
        "transcript_len": len(s.ai_transcript),
        "user_turns": s.user_turns(),
    }


def sealed_event_json(event, proposal_status: dict[str, ProposalStatus]) -> dict:
    """Chain event as JSON; ballot payloads stay sealed (digest only)
    while their proposal can still accept votes."""
    row: dict[str, Any] = {
        "seq": event.seq,
        "ts": event.timestamp,
        "kind": event.kind.value,
        "prev_hash": event.prev_hash.hex(),
        "hash": event.hash.hex(),
    }
    payload = event.payload_json()
    if event.kind is EventKind.BALLOT_CAST:
        status = proposal_status.get(payload.get("proposal_id"), ProposalStatus.OPEN)
        if status in (ProposalStatus.DRAFT, ProposalStatus.OPEN):
            row["payload_sealed"] = hashlib.sha256(event.payload).hexdigest()
            row["proposal_id"] = payload.get("proposal_id")
            return row
    row["payload"] = payload
    return row


# --- app factory ----------------------------------------------------------------

@dataclass
class AuthContext:
    address: str
    token: str
    expires_at: int


class Gateway:
    """Bundles the platform with auth state and the persistence sink."""

    def __init__(self, config: ApiConfig):
        self.config = config
        config.data_dir.mkdir(parents=True, exist_ok=True)
        self.events_path = config.data_dir / "events.jsonl"

        seed_case = config.load_seed_case()
        platform_kwargs = dict(
            seed_case=seed_case, room_capacity=config.room_capacity,
            min_user_turns=config.ai_min_turns, min_room_dwell_ms=config.room_dwell_ms,
        )
        if self.events_path.exists():
            with self.events_path.open() as fh:
                existing = import_jsonl(fh)  # raises ChainBroken(broken_at)
            self.platform = Platform.replay(existing, **platform_kwargs)
        else:
            self.events_path.touch()  # genesis: empty verifiable log
            self.platform = Platform(**platform_kwargs)
        self.platform.sink = self.events_path.open("a")

        if config.responder_kind == "http":
            if not config.responder_url:
                raise InvalidInput("responder kind 'http' requires a url")
            self.responder = http_responder(config.responder_url, config.responder_timeout_s)
        else:
            self.responder = stub_responder

        self._auth_by_token: dict[str, AuthContext] = {}
        self._token_by_address: dict[str, str] = {}
        self._auth_lock = threading.Lock()

        # per-condition spaces from the config, created once
        for doc in config.spaces:
            space = space_from_config(doc)
            if space.id not in self.platform.spaces:
                self.platform.create_space(space, sorted(space.admins)[0])

    def issue_token(self, address: str) -> AuthContext:
        with self._auth_lock:
            stale = self._token_by_address.pop(address, None)
            if stale:
                self._auth_by_token.pop(stale, None)
            context = AuthContext(
                address=address,
                token=secrets.token_urlsafe(32),
                expires_at=int(time.time() * 1000) + SESSION_TOKEN_TTL_MS,
            )
            self._auth_by_token[context.token] = context
            self._token_by_address[address] = context.token
            return context

    def authenticate(self, authorization: str | None) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise Unauthenticated("missing bearer token")
        context = self._auth_by_token.get(authorization.removeprefix("Bearer "))
        if context is None:
            raise Unauthenticated("unknown or revoked token")
        if context.expires_at < int(time.time() * 1000):
            raise Unauthenticated("token expired")
        return context.address


def create_app(config: ApiConfig) -> FastAPI:
    gateway = Gateway(config)
    app = FastAPI(title="agora gateway", version="1")
    app.state.gateway = gateway
    platform = gateway.platform

    @app.exception_handler(AgoraError)
    async def agora_error_handler(_request, exc: AgoraError):
        for error_type, status in _STATUS_BY_ERROR:
            if isinstance(exc, error_type):
                return JSONResponse(status_code=status, content={"detail": str(exc)})
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    def caller(authorization: str | None = Header(default=None)) -> str:
        return gateway.authenticate(authorization)

    # -- identity / auth --

    @app.post("/v1/register")
    def register_endpoint(body: RegisterBody):
        try:
            public_key = bytes.fromhex(body.public_key)
        except ValueError:
            raise InvalidInput("public_key must be hex") from None
        address = platform.register_key(public_key)
        context = gateway.issue_token(address)
        return {"address": address, "token": context.token,
                "expires_at": context.expires_at}

    # -- spaces and proposals --

    @app.post("/v1/spaces", status_code=201)
    def create_space(body: SpaceBody, address: str = Depends(caller)):
        space = space_from_config(body.model_dump())
        platform.create_space(space, address)
        return space_json(space)

    @app.get("/v1/spaces/{space_id}")
    def get_space(space_id: str):
        return space_json(platform.space(space_id))

    @app.post("/v1/spaces/{space_id}/mint")
    def mint(space_id: str, body: MintBody, address: str = Depends(caller)):
        grants = platform.mint(space_id, body.participants, address)
        return {"space_id": space_id, "grants": grants}

    @app.post("/v1/spaces/{space_id}/proposals", status_code=201)
    def open_proposal(space_id: str, body: ProposalBody, address: str = Depends(caller)):
        proposal = platform.open_proposal(space_id, body.id, body.options, address)
        return proposal_json(proposal)

    @app.get("/v1/proposals/{proposal_id}")
    def get_proposal(proposal_id: str):
        return proposal_json(platform.proposal(proposal_id))

    @app.post("/v1/proposals/{proposal_id}/close")
    def close(proposal_id: str, body: CloseBody, address: str = Depends(caller)):
        proposal = platform.proposal(proposal_id)
        platform.space(proposal.space_id).require_admin(address)
        return proposal_json(platform.close(proposal_id, address, force=body.force))

    @app.post("/v1/proposals/{proposal_id}/publish")
    def publish(proposal_id: str, address: str = Depends(caller)):
        result = platform.publish(proposal_id, address)
        return result_json(result)

    # -- votes and results --

    @app.post("/v1/proposals/{proposal_id}/votes")
    def cast_vote(proposal_id: str, body: VoteBody, address: str = Depends(caller)):
        if body.proposal_id != proposal_id:
            raise InvalidInput("body proposal_id does not match the URL")
        try:
            ballot = Ballot(
                proposal_id=body.proposal_id,
                voter=body.voter,
                allocation=tuple(body.allocation),
                cast_at=body.cast_at,
                public_key=bytes.fromhex(body.public_key),
                signature=bytes.fromhex(body.signature),
            )
        except ValueError:
            raise InvalidInput("public_key and signature must be hex") from None
        outcome = platform.cast_ballot(ballot)
        if isinstance(outcome, RejectionReason):
            if outcome is RejectionReason.CLOSED:
                raise IllegalState(outcome.value)
            raise InvalidInput(outcome.value)
        return {"accepted": True, "seq": outcome.seq, "event_hash": outcome.event_hash}

    def result_json(result) -> dict:
        return {
            "proposal_id": result.proposal_id,
            "method": result.method.value,
            "scores": list(result.scores),
            "turnout": result.turnout,
            "total_effective": result.total_effective,
            "winners": list(result.winners),
            "is_tie": result.is_tie,
            "succeeded": list(result.succeeded),
        }

    @app.get("/v1/proposals/{proposal_id}/result")
    def get_result(proposal_id: str):
        return result_json(platform.result(proposal_id))  # 404 until PUBLISHED

    # -- audit chain --

    @app.get("/v1/chain")
    def get_chain(from_seq: int = Query(default=0, alias="from")):
        status_by_proposal = {p.id: p.status for p in platform.proposals.values()}
        events = [
            sealed_event_json(e, status_by_proposal)
            for e in platform.chain
            if e.seq >= from_seq
        ]
        return {"events": events, "head": platform.chain.head_hash().hex()}

    # -- deliberation --

    @app.get("/v1/seed-case")
    def seed_case():
        case = platform.seed_case
        return {
            "interpretation_text": case.interpretation_text,
            "value_question": case.value_question,
            "branch_seeds": dict(case.branch_seeds),
            "suggested_topics": list(case.suggested_topics),
        }

    @app.get("/v1/sessions/{address}")
    def get_session(address: str, auth_address: str = Depends(caller)):
        if auth_address != address:
            raise Forbidden("sessions are private to their participant")
        return session_json(platform.session(address))

    @app.post("/v1/sessions/{address}/advance")
    def advance_session(address: str, body: AdvanceBody, auth_address: str = Depends(caller)):
        if auth_address != address:
            raise Forbidden("sessions are private to their participant")
        try:
            event = SessionEvent(body.event.upper())
        except ValueError:
            raise InvalidInput(f"unknown session event {body.event}") from None
        return session_json(platform.advance_session(address, event))

    @app.post("/v1/sessions/{address}/value-answer")
    def value_answer(address: str, body: ValueAnswerBody, auth_address: str = Depends(caller)):
        if auth_address != address:
            raise Forbidden("sessions are private to their participant")
        return session_json(platform.answer_value(address, body.answer))

    @app.post("/v1/sessions/{address}/ai-turn")
    def ai_turn_endpoint(address: str, body: AiTurnBody, auth_address: str = Depends(caller)):
        if auth_address != address:
            raise Forbidden("sessions are private to their participant")
        exchange = platform.ai_exchange(
            address, body.text, gateway.responder,
            timeout_s=config.responder_timeout_s,
        )
        return {
            "prompt": exchange.prompt,
            "reply": exchange.reply,
            "latency_ms": exchange.latency_ms,
            "fallback_used": exchange.fallback_used,
        }

    # -- realtime room channel --

    room_locks: dict[str, Any] = {}
    room_sockets: dict[str, list[tuple[str, WebSocket]]] = {}

    @app.websocket("/v1/rooms/{room_id}/channel")
    async def room_channel(websocket: WebSocket, room_id: str):
        await websocket.accept()
        try:
            join_frame = json.loads(await websocket.receive_text())
            if join_frame.get("type") != "join":
                await websocket.close(code=4400)
                return
            address = gateway.authenticate(f"Bearer {join_frame.get('token', '')}")
            room = platform.room(room_id)
            room.join(address)
        except AgoraError as exc:
            await websocket.send_text(json.dumps({"type": "error", "detail": str(exc)}))
            await websocket.close(code=4403)
            return

        lock = room_locks.setdefault(room_id, asyncio.Lock())
        sockets = room_sockets.setdefault(room_id, [])
        sockets.append((address, websocket))
        await websocket.send_text(json.dumps({
            "type": "joined", "room_id": room_id,
            "suggested_topics": list(room.suggested_topics),
        }))
        try:
            while True:
                frame = json.loads(await websocket.receive_text())
                if frame.get("type") == "leave":
                    break
                if frame.get("type") != "post":
                    await websocket.send_text(json.dumps(
                        {"type": "error", "detail": "expected post or leave"}
                    ))
                    continue
                # sequence assignment and fan-out are atomic per room so
                # every member sees deliveries in ascending seq order
                async with lock:
                    try:
                        message = room.post(address, frame.get("text", ""),
                                            now=int(time.time() * 1000))
                    except AgoraError as exc:
                        await websocket.send_text(json.dumps(
                            {"type": "error", "detail": str(exc)}
                        ))
                        continue
                    deliver = json.dumps({
                        "type": "deliver", "room_id": room_id, "seq": message.seq,
                        "author": message.author, "text": message.text, "at": message.at,
                    })
                    for _, peer in list(sockets):
                        try:
                            await peer.send_text(deliver)
                        except Exception:
                            pass
        except WebSocketDisconnect:
            pass
        finally:
            sockets[:] = [(a, w) for a, w in sockets if w is not websocket]
            room.leave(address)

    return app


def serve(config: ApiConfig) -> None:
    """Run the gateway with uvicorn; blocks until shutdown."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
