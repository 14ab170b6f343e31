from __future__ import annotations

import io
from fractions import Fraction

import pytest

from agora.chain import EventKind, import_jsonl, verify_chain
from agora.deliberation import MIN_ROOM_DWELL_MS, SessionEvent, SessionState
from agora.errors import Forbidden, IllegalState, NotFound
from agora.identity import Identity, register
from agora.ledger import PolicyKind, PowerPolicy
from agora.platform import Platform
from agora.spaces import ProposalStatus, Space, VotingMethod
from agora.tally import Ballot, RejectionReason, ballot_signing_payload


class TickClock:
    def __init__(self, start=1_000_000):
        self.now = start

    def __call__(self) -> int:
        self.now += 1
        return self.now


def make_platform(sink=None) -> tuple[Platform, Identity]:
    platform = Platform(clock=TickClock(), sink=sink)
    admin = register(b"\xaa" * 32)
    platform.register_key(admin.public_key)
    return platform, admin


def make_space(admin: Identity, space_id="s1", method=VotingMethod.QUADRATIC,
               kind=PolicyKind.EQUAL, supply=800) -> Space:
    return Space(
        id=space_id, voting_method=method,
        power_policy=PowerPolicy(kind=kind, total_supply=supply),
        admins=frozenset({admin.address}),
    )


def signed(identity: Identity, proposal_id: str, allocation, cast_at: int) -> Ballot:
    payload = ballot_signing_payload(proposal_id, identity.address, list(allocation), cast_at)
    return Ballot(
        proposal_id=proposal_id, voter=identity.address,
        allocation=tuple(allocation), cast_at=cast_at,
        public_key=identity.public_key, signature=identity.sign(payload).signature,
    )


def run_full_election(platform: Platform, admin: Identity, voters: list[Identity]):
    space = make_space(admin, supply=100 * len(voters))
    platform.create_space(space, admin.address)
    platform.mint(space.id, [v.address for v in voters], admin.address)
    proposal = platform.open_proposal(space.id, "p1", ["a", "b", "c", "d"], admin.address)
    for i, voter in enumerate(voters):
        allocation = [0, 0, 0, 0]
        allocation[i % 4] = 100
        receipt = platform.cast_ballot(signed(voter, "p1", allocation, proposal.open_at + i + 1))
        assert not isinstance(receipt, RejectionReason)
    platform.close("p1", admin.address, now=proposal.close_at)
    return platform.publish("p1", admin.address)


def test_full_flow_produces_verifying_chain(identities):
    platform, admin = make_platform()
    result = run_full_election(platform, admin, identities)
    assert verify_chain(platform.chain) is None
    assert result.turnout == 8
    kinds = [e.kind for e in platform.chain]
    assert kinds.count(EventKind.SPACE_CREATED) == 1
    assert kinds.count(EventKind.MINT) == 1
    assert kinds.count(EventKind.BALLOT_CAST) == 8
    assert kinds[-1] is EventKind.RESULT_PUBLISHED


def test_replay_rebuilds_identical_state(identities):
    platform, admin = make_platform()
    run_full_election(platform, admin, identities)

    restored = Platform.replay(platform.chain)
    assert restored.spaces.keys() == platform.spaces.keys()
    assert restored.proposals == platform.proposals
    assert restored.results == platform.results
    assert restored.ballots == platform.ballots
    assert restored.ledger.grants("s1") == platform.ledger.grants("s1")
    assert restored.chain.events == platform.chain.events


def test_sink_receives_every_event_and_roundtrips(identities):
    sink = io.StringIO()
    platform, admin = make_platform(sink=sink)
    run_full_election(platform, admin, identities)
    imported = import_jsonl(io.StringIO(sink.getvalue()))
    assert imported.events == platform.chain.events


def test_replay_of_prefix_is_consistent(identities):
    # crash at any event boundary: every prefix of the log replays cleanly
    sink = io.StringIO()
    platform, admin = make_platform(sink=sink)
    run_full_election(platform, admin, identities)
    lines = sink.getvalue().splitlines()
    for cut in range(len(lines) + 1):
        prefix = "\n".join(lines[:cut]) + ("\n" if cut else "")
        chain = import_jsonl(io.StringIO(prefix))
        restored = Platform.replay(chain)
        assert len(restored.chain) == cut


def test_rejected_ballot_not_chained(identities):
    platform, admin = make_platform()
    voter = identities[0]
    space = make_space(admin)
    platform.create_space(space, admin.address)
    platform.mint(space.id, [voter.address], admin.address)
    proposal = platform.open_proposal(space.id, "p1", ["a", "b"], admin.address)
    events_before = len(platform.chain)
    outcome = platform.cast_ballot(signed(voter, "p1", [500, 500], proposal.open_at + 1))
    assert outcome is RejectionReason.OVER_BUDGET
    assert len(platform.chain) == events_before


def test_replacement_ballots_all_stay_on_chain(identities):
    platform, admin = make_platform()
    voter = identities[0]
    space = make_space(admin, supply=100, method=VotingMethod.WEIGHTED)
    platform.create_space(space, admin.address)
    platform.mint(space.id, [voter.address], admin.address)
    proposal = platform.open_proposal(space.id, "p1", ["a", "b", "c", "d"], admin.address)
    for i, allocation in enumerate([[100, 0, 0, 0], [0, 100, 0, 0], [0, 0, 100, 0]]):
        platform.cast_ballot(signed(voter, "p1", allocation, proposal.open_at + 1 + i))
    platform.close("p1", admin.address, now=proposal.close_at)
    result = platform.publish("p1", admin.address)
    assert result.turnout == 1
    assert result.scores == (0.0, 0.0, 100.0, 0.0)
    casts = [e for e in platform.chain if e.kind is EventKind.BALLOT_CAST]
    assert len(casts) == 3


def test_result_unavailable_until_published(identities):
    platform, admin = make_platform()
    voter = identities[0]
    space = make_space(admin, supply=100)
    platform.create_space(space, admin.address)
    platform.mint(space.id, [voter.address], admin.address)
    proposal = platform.open_proposal(space.id, "p1", ["a", "b"], admin.address)
    with pytest.raises(NotFound):
        platform.result("p1")
    platform.close("p1", admin.address, now=proposal.close_at)
    with pytest.raises(NotFound):
        platform.result("p1")
    platform.publish("p1", admin.address)
    assert platform.result("p1").proposal_id == "p1"


def test_force_close_requires_admin_and_is_flagged(identities):
    platform, admin = make_platform()
    voter = identities[0]
    space = make_space(admin, supply=100)
    platform.create_space(space, admin.address)
    platform.mint(space.id, [voter.address], admin.address)
    platform.open_proposal(space.id, "p1", ["a", "b"], admin.address)
    with pytest.raises(Forbidden):
        platform.close("p1", voter.address, force=True)
    closed = platform.close("p1", admin.address, force=True)
    assert closed.forced_close
    closed_events = [e for e in platform.chain if e.kind is EventKind.PROPOSAL_CLOSED]
    assert closed_events[0].payload_json()["forced"] is True


def test_open_without_mint_fails(identities):
    platform, admin = make_platform()
    space = make_space(admin)
    platform.create_space(space, admin.address)
    with pytest.raises(NotFound):
        platform.open_proposal(space.id, "p1", ["a", "b"], admin.address)


def test_session_transitions_are_chain_logged():
    platform, admin = make_platform()
    participant = register(b"\x01" * 32)
    platform.register_key(participant.public_key)
    platform.advance_session(participant.address, SessionEvent.START_INTRO)
    platform.advance_session(participant.address, SessionEvent.INTRO_DONE)
    platform.answer_value(participant.address, "yes")
    events = [e for e in platform.chain if e.kind is EventKind.SESSION_ADVANCED]
    assert [e.payload_json()["state"] for e in events] == [
        SessionState.INTRO.value, SessionState.VALUE_PROMPT.value, SessionState.AI_CHAT.value,
    ]
    restored = Platform.replay(platform.chain)
    assert restored.sessions[participant.address].state is SessionState.AI_CHAT


def test_room_assigned_on_group_room_entry():
    platform, admin = make_platform()
    participant = register(b"\x02" * 32)
    platform.register_key(participant.public_key)
    platform.condition_keys[participant.address] = "qe"
    platform.advance_session(participant.address, SessionEvent.START_INTRO)
    platform.advance_session(participant.address, SessionEvent.INTRO_DONE)
    platform.answer_value(participant.address, "maybe")
    session = platform.session(participant.address)
    for i in range(3):
        platform.ai_exchange(participant.address, f"turn {i}",
                             lambda tr, sc: "noted")
    platform.advance_session(participant.address, SessionEvent.CHAT_DONE)
    assert session.room_id is not None
    assert "qe" not in session.room_id  # condition stays hidden
    assert participant.address in platform.room(session.room_id).members


def test_duplicate_space_rejected(identities):
    platform, admin = make_platform()
    space = make_space(admin)
    platform.create_space(space, admin.address)
    with pytest.raises(IllegalState):
        platform.create_space(space, admin.address)
