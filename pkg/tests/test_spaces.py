from __future__ import annotations

from fractions import Fraction

import pytest

from agora.errors import Forbidden, IllegalState, InvalidInput
from agora.ledger import PolicyKind, PowerPolicy
from agora.spaces import (
    VOTE_DURATION_DEFAULT_MS,
    Proposal,
    ProposalStatus,
    Space,
    VotingMethod,
    assert_forward,
    close_proposal,
    open_proposal,
    publish_proposal,
)

ADMIN = "0xadmin"
MOD = "0xmod"

STUDY_OPTIONS = [
    "Keep the current model",
    "Provide more specific facts",
    "Integrate a user feedback loop",
    "Analyze speakers' emotions and sentiment",
]


def make_space(method=VotingMethod.QUADRATIC, kind=PolicyKind.EQUAL, **kwargs) -> Space:
    return Space(
        id=kwargs.pop("id", "space-1"),
        voting_method=method,
        power_policy=PowerPolicy(kind=kind, total_supply=800),
        admins=frozenset({ADMIN}),
        moderators=frozenset({MOD}),
        **kwargs,
    )


def test_quadratic_equal_space_has_method_quadratic():
    space = make_space(VotingMethod.QUADRATIC, PolicyKind.EQUAL)
    assert space.voting_method is VotingMethod.QUADRATIC
    assert space.power_policy.kind is PolicyKind.EQUAL


def test_zero_duration_rejected():
    with pytest.raises(InvalidInput):
        make_space(vote_duration=0)


def test_empty_admin_set_rejected():
    with pytest.raises(InvalidInput):
        Space(
            id="s", voting_method=VotingMethod.WEIGHTED,
            power_policy=PowerPolicy(kind=PolicyKind.EQUAL, total_supply=100),
            admins=frozenset(),
        )


def test_threshold_bounds():
    with pytest.raises(InvalidInput):
        make_space(success_threshold=Fraction(0))
    with pytest.raises(InvalidInput):
        make_space(success_threshold=Fraction(3, 2))
    assert make_space(success_threshold=Fraction(1)).success_threshold == 1


def test_four_condition_spaces_are_distinct():
    spaces = [
        make_space(m, k, id=f"cond-{m.value}-{k.value}")
        for m in VotingMethod for k in PolicyKind
    ]
    assert len({s.id for s in spaces}) == 4
    assert len({(s.voting_method, s.power_policy.kind) for s in spaces}) == 4


def test_open_proposal_runs_48h_by_default():
    space = make_space()
    proposal = open_proposal(space, "p1", STUDY_OPTIONS, ADMIN, now=1_000, snapshot_ref="s@1000")
    assert proposal.status is ProposalStatus.OPEN
    assert proposal.close_at - proposal.open_at == VOTE_DURATION_DEFAULT_MS == 48 * 3600 * 1000
    assert len(proposal.options) == 4


def test_non_admin_cannot_open():
    space = make_space()
    with pytest.raises(Forbidden):
        open_proposal(space, "p1", STUDY_OPTIONS, MOD, now=0, snapshot_ref="r")


def test_single_option_rejected():
    space = make_space()
    with pytest.raises(InvalidInput):
        open_proposal(space, "p1", ["only option"], ADMIN, now=0, snapshot_ref="r")


def test_close_at_deadline():
    space = make_space()
    proposal = open_proposal(space, "p1", STUDY_OPTIONS, ADMIN, now=0, snapshot_ref="r")
    closed = close_proposal(proposal, now=proposal.close_at)
    assert closed.status is ProposalStatus.CLOSED
    assert not closed.forced_close


def test_premature_close_requires_admin_force():
    space = make_space()
    proposal = open_proposal(space, "p1", STUDY_OPTIONS, ADMIN, now=0, snapshot_ref="r")
    with pytest.raises(Forbidden):
        close_proposal(proposal, now=proposal.close_at - 1)
    forced = close_proposal(proposal, now=proposal.close_at - 1, forced_by_admin=True)
    assert forced.forced_close


def test_double_close_rejected():
    space = make_space()
    proposal = open_proposal(space, "p1", STUDY_OPTIONS, ADMIN, now=0, snapshot_ref="r")
    closed = close_proposal(proposal, now=proposal.close_at)
    with pytest.raises(IllegalState):
        close_proposal(closed, now=proposal.close_at + 1)


def test_publish_only_after_close():
    space = make_space()
    proposal = open_proposal(space, "p1", STUDY_OPTIONS, ADMIN, now=0, snapshot_ref="r")
    with pytest.raises(IllegalState):
        publish_proposal(proposal)
    published = publish_proposal(close_proposal(proposal, now=proposal.close_at))
    assert published.status is ProposalStatus.PUBLISHED


def test_status_never_moves_backward():
    order = list(ProposalStatus)
    for i, old in enumerate(order):
        for j, new in enumerate(order):
            if j < i:
                with pytest.raises(IllegalState):
                    assert_forward(old, new)
            else:
                assert_forward(old, new)


def test_window_membership():
    space = make_space()
    proposal = open_proposal(space, "p1", STUDY_OPTIONS, ADMIN, now=100, snapshot_ref="r")
    assert proposal.is_open_at(100)
    assert proposal.is_open_at(proposal.close_at - 1)
    assert not proposal.is_open_at(proposal.close_at)
    assert not proposal.is_open_at(99)
