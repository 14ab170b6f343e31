"""Event-sourced platform core.

Every state mutation is an audit-chain append; in-memory registries
(spaces, grants, proposals, ballots, results, sessions) are a pure fold
over the event log. Restarting from a persisted log therefore rebuilds
exactly the state that produced it, and a corrupt log is refused with
the earliest broken sequence number.

One Platform instance is the single appender for its deployment; reads
come from the immutable structures it hands out.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Callable, Mapping, Sequence

from . import ledger as ledger_mod
from .chain import AuditChain, ChainEvent, EventKind, event_to_jsonl, verify_chain
from .deliberation import (
    AiExchange,
    AiResponder,
    Room,
    RoomAssigner,
    SeedCase,
    Session,
    SessionEvent,
    SessionState,
    advance,
    answer_value_prompt,
    ai_turn,
)
from .errors import ChainBroken, Forbidden, IllegalState, InvalidInput, NotFound
from .identity import derive_address
from .ledger import LedgerSnapshot, PolicyKind, PowerPolicy, TokenLedger
from .spaces import (
    Proposal,
    ProposalStatus,
    Space,
    VotingMethod,
    close_proposal,
    open_proposal,
    publish_proposal,
)
from .tally import Ballot, RejectionReason, TallyResult, tally, validate_ballot

DEFAULT_SEED_CASE = SeedCase(
    interpretation_text="(no seed case configured)",
    value_question="Do you find the interpretation useful?",
    branch_seeds={
        "yes": "You found it useful. What made it work for you?",
        "no": "You did not find it useful. What was missing?",
        "maybe": "You are unsure. What would tip you either way?",
    },
    suggested_topics=(),
)


def _wall_clock_ms() -> int:
    return int(time.time() * 1000)


def _space_payload(space: Space) -> dict:
    return {
        "space_id": space.id,
        "voting_method": space.voting_method.value,
        "power_policy": {
            "kind": space.power_policy.kind.value,
            "total_supply": space.power_policy.total_supply,
            "rng_seed": space.power_policy.rng_seed,
        },
        "admins": sorted(space.admins),
        "moderators": sorted(space.moderators),
        "vote_duration": space.vote_duration,
        "success_threshold": str(space.success_threshold),
    }


def _space_from_payload(p: dict) -> Space:
    policy = p["power_policy"]
    return Space(
        id=p["space_id"],
        voting_method=VotingMethod(p["voting_method"]),
        power_policy=PowerPolicy(
            kind=PolicyKind(policy["kind"]),
            total_supply=policy["total_supply"],
            rng_seed=policy["rng_seed"],
        ),
        admins=frozenset(p["admins"]),
        moderators=frozenset(p["moderators"]),
        vote_duration=p["vote_duration"],
        success_threshold=Fraction(p["success_threshold"]),
    )


@dataclass(frozen=True)
class BallotReceipt:
    """Proof of acceptance: where the ballot landed on the chain."""

    seq: int
    event_hash: str
    proposal_id: str
    voter: str


class Platform:
    """Deployment state plus the operations that mutate it.

    All writes are funneled through a lock around (validate, append,
    apply), giving the serialized single-appender the audit chain
    requires. ``sink``, when given, receives each event as a JSONL line
    immediately, so a crash at any event boundary leaves a verifiable
    prefix on disk.
    """

    def __init__(self, *, clock: Callable[[], int] = _wall_clock_ms,
                 sink: IO[str] | None = None,
                 seed_case: SeedCase = DEFAULT_SEED_CASE,
                 room_capacity: int = 10,
                 min_user_turns: int = 3,
                 min_room_dwell_ms: int = 5 * 60 * 1000):
        self.chain = AuditChain()
        self.clock = clock
        self.sink = sink
        self.seed_case = seed_case
        self.min_user_turns = min_user_turns
        self.min_room_dwell_ms = min_room_dwell_ms

        self.ledger = TokenLedger()
        self.spaces: dict[str, Space] = {}
        self.proposals: dict[str, Proposal] = {}
        self.snapshots: dict[str, LedgerSnapshot] = {}  # keyed by proposal id
        self.ballots: dict[str, list[Ballot]] = {}
        self.results: dict[str, TallyResult] = {}

        self.known_keys: dict[str, bytes] = {}  # address -> raw public key
        self.sessions: dict[str, Session] = {}
        self.rooms = RoomAssigner(capacity=room_capacity,
                                  suggested_topics=seed_case.suggested_topics)
        self.condition_keys: dict[str, str] = {}  # address -> room grouping key

        self._lock = threading.RLock()

    # -- event plumbing ----------------------------------------------------

    def _append(self, kind: EventKind, payload: Mapping, *, at: int | None = None) -> ChainEvent:
        event = self.chain.append(kind, payload, timestamp=self.clock() if at is None else at)
        if self.sink is not None:
            self.sink.write(event_to_jsonl(event) + "\n")
            self.sink.flush()
        return event

    @classmethod
    def replay(cls, chain: AuditChain, **kwargs) -> "Platform":
        """Fold an existing (verified) event log into a fresh platform."""
        broken = verify_chain(chain)
        if broken is not None:
            raise ChainBroken(broken)
        platform = cls(**kwargs)
        for event in chain:
            platform._apply(event)
        platform.chain = AuditChain(chain.events)
        return platform

    def _apply(self, event: ChainEvent) -> None:
        p = event.payload_json()
        kind = event.kind
        if kind is EventKind.SPACE_CREATED:
            space = _space_from_payload(p)
            self.spaces[space.id] = space
        elif kind is EventKind.MINT:
            grants = [
                ledger_mod.TokenGrant(p["space_id"], addr, amount)
                for addr, amount in p["grants"].items()
            ]
            self.ledger.record(grants)
        elif kind is EventKind.PROPOSAL_OPENED:
            proposal = Proposal(
                id=p["proposal_id"], space_id=p["space_id"],
                options=tuple(p["options"]),
                open_at=p["open_at"], close_at=p["close_at"],
                status=ProposalStatus.OPEN, snapshot_ref=p["snapshot_ref"],
            )
            self.proposals[proposal.id] = proposal
            self.snapshots[proposal.id] = LedgerSnapshot(
                space_id=p["space_id"], frozen_at=p["open_at"],
                balances={a: int(v) for a, v in p["snapshot"].items()},
            )
            self.ballots.setdefault(proposal.id, [])
        elif kind is EventKind.BALLOT_CAST:
            ballot = Ballot(
                proposal_id=p["proposal_id"], voter=p["voter"],
                allocation=tuple(p["allocation"]), cast_at=p["cast_at"],
                public_key=bytes.fromhex(p["public_key"]),
                signature=bytes.fromhex(p["signature"]),
            )
            self.ballots.setdefault(ballot.proposal_id, []).append(ballot)
        elif kind is EventKind.PROPOSAL_CLOSED:
            proposal = self.proposals[p["proposal_id"]]
            self.proposals[proposal.id] = close_proposal(
                proposal, now=p["at"], forced_by_admin=p["forced"],
            )
        elif kind is EventKind.RESULT_PUBLISHED:
            proposal = self.proposals[p["proposal_id"]]
            self.proposals[proposal.id] = publish_proposal(proposal)
            self.results[proposal.id] = TallyResult(
                proposal_id=p["proposal_id"],
                method=VotingMethod(p["method"]),
                scores=tuple(p["scores"]),
                turnout=p["turnout"],
                total_effective=p["total_effective"],
                winners=tuple(p["winners"]),
                succeeded=tuple(p["succeeded"]),
            )
        elif kind is EventKind.SESSION_ADVANCED:
            session = self.sessions.setdefault(p["participant"],
                                               self._new_session(p["participant"]))
            session.state = SessionState(p["state"])
            session.entered_at[session.state] = p["at"]

    def _new_session(self, address: str) -> Session:
        return Session(address, min_user_turns=self.min_user_turns,
                       min_room_dwell_ms=self.min_room_dwell_ms)

    # -- identity ----------------------------------------------------------

    def register_key(self, public_key: bytes) -> str:
        """Admit a public key; returns its derived address. Idempotent.

        Registration is not a governance event: ballots carry their own
        key material, so the chain stays replayable without this registry.
        """
        address = derive_address(public_key)
        with self._lock:
            held = self.known_keys.get(address)
            if held is not None and held != bytes(public_key):
                raise IllegalState(f"address collision for {address}")
            self.known_keys[address] = bytes(public_key)
            self.sessions.setdefault(address, self._new_session(address))
        return address

    # -- governance operations ----------------------------------------------

    def create_space(self, space: Space, caller: str) -> Space:
        space.require_admin(caller)
        with self._lock:
            if space.id in self.spaces:
                raise IllegalState(f"space {space.id} already exists")
            self.spaces[space.id] = space
            self._append(EventKind.SPACE_CREATED, _space_payload(space))
        return space

    def space(self, space_id: str) -> Space:
        try:
            return self.spaces[space_id]
        except KeyError:
            raise NotFound(f"unknown space {space_id}") from None

    def mint(self, space_id: str, participants: Sequence[str], caller: str) -> dict[str, int]:
        """Mint the space's full supply under its power policy."""
        space = self.space(space_id)
        space.require_admin(caller)
        with self._lock:
            if space.power_policy.kind is PolicyKind.EQUAL:
                grants = ledger_mod.mint_equal(
                    space_id, participants, space.power_policy.total_supply
                )
            else:
                grants = ledger_mod.mint_pareto(space_id, participants, space.power_policy)
            self.ledger.record(grants)
            payload = {
                "space_id": space_id,
                "policy": space.power_policy.kind.value,
                "grants": {g.address: g.amount for g in grants},
            }
            self._append(EventKind.MINT, payload)
        return {g.address: g.amount for g in grants}

    def open_proposal(self, space_id: str, proposal_id: str, options: Sequence[str],
                      caller: str, *, now: int | None = None) -> Proposal:
        space = self.space(space_id)
        space.require_admin(caller)
        with self._lock:
            if proposal_id in self.proposals:
                raise IllegalState(f"proposal {proposal_id} already exists")
            at = self.clock() if now is None else now
            snapshot = self.ledger.snapshot(space_id, at)  # NotFound if minting incomplete
            proposal = open_proposal(
                space, proposal_id, list(options), caller,
                now=at, snapshot_ref=f"{space_id}@{at}",
            )
            self.proposals[proposal.id] = proposal
            self.snapshots[proposal.id] = snapshot
            self.ballots[proposal.id] = []
            self._append(EventKind.PROPOSAL_OPENED, {
                "proposal_id": proposal.id,
                "space_id": space_id,
                "options": list(proposal.options),
                "open_at": proposal.open_at,
                "close_at": proposal.close_at,
                "snapshot_ref": proposal.snapshot_ref,
                "snapshot": dict(snapshot.balances),
            }, at=at)
        return proposal

    def proposal(self, proposal_id: str) -> Proposal:
        try:
            return self.proposals[proposal_id]
        except KeyError:
            raise NotFound(f"unknown proposal {proposal_id}") from None

    def cast_ballot(self, ballot: Ballot) -> BallotReceipt | RejectionReason:
        """Validate and chain-log one signed ballot.

        Returns a receipt on acceptance or the rejection reason; rejected
        ballots are never appended.
        """
        with self._lock:
            proposal = self.proposal(ballot.proposal_id)
            snapshot = self.snapshots[ballot.proposal_id]
            reason = validate_ballot(ballot, proposal, snapshot)
            if reason is not None:
                return reason
            self.ballots[ballot.proposal_id].append(ballot)
            event = self._append(EventKind.BALLOT_CAST, {
                "proposal_id": ballot.proposal_id,
                "voter": ballot.voter,
                "allocation": list(ballot.allocation),
                "cast_at": ballot.cast_at,
                "public_key": ballot.public_key.hex(),
                "signature": ballot.signature.hex(),
            }, at=ballot.cast_at)
        return BallotReceipt(
            seq=event.seq, event_hash=event.hash.hex(),
            proposal_id=ballot.proposal_id, voter=ballot.voter,
        )

    def close(self, proposal_id: str, caller: str, *, now: int | None = None,
              force: bool = False) -> Proposal:
        proposal = self.proposal(proposal_id)
        space = self.space(proposal.space_id)
        if force:
            space.require_admin(caller)
        with self._lock:
            at = self.clock() if now is None else now
            closed = close_proposal(proposal, now=at, forced_by_admin=force)
            self.proposals[proposal_id] = closed
            self._append(EventKind.PROPOSAL_CLOSED, {
                "proposal_id": proposal_id, "at": at, "forced": force,
            }, at=at)
        return closed

    def publish(self, proposal_id: str, caller: str) -> TallyResult:
        """Tally a closed proposal and publish the result on-chain."""
        proposal = self.proposal(proposal_id)
        space = self.space(proposal.space_id)
        space.require_admin(caller)
        with self._lock:
            published = publish_proposal(proposal)  # IllegalState unless CLOSED
            result = tally(
                proposal, self.ballots[proposal_id], space.voting_method,
                threshold=space.success_threshold,
            )
            self.proposals[proposal_id] = published
            self.results[proposal_id] = result
            self._append(EventKind.RESULT_PUBLISHED, {
                "proposal_id": proposal_id,
                "method": result.method.value,
                "scores": list(result.scores),
                "turnout": result.turnout,
                "total_effective": result.total_effective,
                "winners": list(result.winners),
                "succeeded": list(result.succeeded),
                "threshold": str(space.success_threshold),
            })
        return result

    def result(self, proposal_id: str) -> TallyResult:
        proposal = self.proposal(proposal_id)
        if proposal.status is not ProposalStatus.PUBLISHED:
            raise NotFound(f"proposal {proposal_id} has no published result")
        return self.results[proposal_id]

    # -- deliberation -------------------------------------------------------

    def session(self, address: str) -> Session:
        try:
            return self.sessions[address]
        except KeyError:
            raise NotFound(f"no session for {address}") from None

    def advance_session(self, address: str, event: SessionEvent, *,
                        now: int | None = None) -> Session:
        session = self.session(address)
        with self._lock:
            at = self.clock() if now is None else now
            advance(session, event, now=at)
            if session.state is SessionState.GROUP_ROOM and session.room_id is None:
                room = self.rooms.assign(self.condition_keys.get(address, "all"), address)
                session.room_id = room.id
            self._append(EventKind.SESSION_ADVANCED, {
                "participant": address, "state": session.state.value,
                "event": event.value, "at": at,
            }, at=at)
        return session

    def answer_value(self, address: str, answer: str, *, now: int | None = None) -> Session:
        session = self.session(address)
        with self._lock:
            at = self.clock() if now is None else now
            answer_value_prompt(session, answer, seed_case=self.seed_case, now=at)
            self._append(EventKind.SESSION_ADVANCED, {
                "participant": address, "state": session.state.value,
                "event": SessionEvent.VALUE_ANSWERED.value, "at": at,
            }, at=at)
        return session

    def ai_exchange(self, address: str, user_text: str, responder: AiResponder, *,
                    now: int | None = None, timeout_s: float = 15.0) -> AiExchange:
        session = self.session(address)
        at = self.clock() if now is None else now
        return ai_turn(session, user_text, responder,
                       seed_case=self.seed_case, now=at, timeout_s=timeout_s)

    def room(self, room_id: str) -> Room:
        try:
            return self.rooms.rooms[room_id]
        except KeyError:
            raise NotFound(f"unknown room {room_id}") from None
