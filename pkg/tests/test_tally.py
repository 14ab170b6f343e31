from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from agora.errors import InvalidInput
from agora.identity import Identity, register
from agora.ledger import LedgerSnapshot, PolicyKind, PowerPolicy
from agora.spaces import Space, VotingMethod, open_proposal
from agora.tally import (
    Ballot,
    RejectionReason,
    ballot_signing_payload,
    effective_votes_quadratic,
    latest_per_voter,
    ratio_vector,
    tally,
    validate_ballot,
)

ADMIN = "0xadmin"
OPTIONS = ["opt1", "opt2", "opt3", "opt4"]
THRESHOLD = Fraction(1, 4)


def make_proposal(now=0, duration=1000):
    space = Space(
        id="s", voting_method=VotingMethod.QUADRATIC,
        power_policy=PowerPolicy(kind=PolicyKind.EQUAL, total_supply=800),
        admins=frozenset({ADMIN}), vote_duration=duration,
    )
    return open_proposal(space, "p", OPTIONS, ADMIN, now=now, snapshot_ref="s@0")


def unsigned_ballot(voter: str, allocation, cast_at=0) -> Ballot:
    # tally() never checks signatures; validation tests build real ones
    return Ballot(
        proposal_id="p", voter=voter, allocation=tuple(allocation),
        cast_at=cast_at, public_key=b"\x00" * 32, signature=b"",
    )


def signed_ballot(identity: Identity, allocation, cast_at=0, proposal_id="p") -> Ballot:
    payload = ballot_signing_payload(proposal_id, identity.address, list(allocation), cast_at)
    return Ballot(
        proposal_id=proposal_id, voter=identity.address,
        allocation=tuple(allocation), cast_at=cast_at,
        public_key=identity.public_key, signature=identity.sign(payload).signature,
    )


def snapshot_for(*pairs) -> LedgerSnapshot:
    return LedgerSnapshot(space_id="s", frozen_at=0, balances=dict(pairs))


def brute_force_tally(allocations: list[list[int]], method: str) -> list[float]:
    """Independent oracle: plain loops, no shared code with the engine."""
    option_count = len(allocations[0])
    scores = []
    for j in range(option_count):
        s = 0.0
        for row in allocations:
            s += row[j] if method == "weighted" else math.sqrt(row[j])
        scores.append(s)
    return scores


# --- quadratic conversion ---------------------------------------------------

def test_four_tokens_give_two_votes():
    assert effective_votes_quadratic(4) == 2.0


def test_zero_tokens_give_zero_votes():
    assert effective_votes_quadratic(0) == 0.0


def test_perfect_squares_match_integer_sqrt_oracle():
    for tokens in [9, 100, 1, 16, 25, 144, 10_000]:
        assert effective_votes_quadratic(tokens) == float(math.isqrt(tokens))


def test_negative_tokens_rejected():
    with pytest.raises(InvalidInput):
        effective_votes_quadratic(-1)


# --- ballot validation -------------------------------------------------------

def test_valid_ballot_accepted():
    ident = register(b"\x01" * 32)
    proposal = make_proposal()
    snap = snapshot_for((ident.address, 100))
    ballot = signed_ballot(ident, [20, 20, 30, 30], cast_at=10)
    assert validate_ballot(ballot, proposal, snap) is None


def test_over_budget_rejected():
    ident = register(b"\x02" * 32)
    proposal = make_proposal()
    snap = snapshot_for((ident.address, 100))
    ballot = signed_ballot(ident, [21, 20, 30, 30], cast_at=10)
    assert validate_ballot(ballot, proposal, snap) is RejectionReason.OVER_BUDGET


def test_unspent_budget_is_allowed():
    ident = register(b"\x03" * 32)
    proposal = make_proposal()
    snap = snapshot_for((ident.address, 100))
    ballot = signed_ballot(ident, [10, 0, 0, 0], cast_at=10)
    assert validate_ballot(ballot, proposal, snap) is None


def test_tampered_allocation_fails_signature():
    ident = register(b"\x04" * 32)
    proposal = make_proposal()
    snap = snapshot_for((ident.address, 100))
    good = signed_ballot(ident, [20, 20, 30, 30], cast_at=10)
    tampered = Ballot(
        proposal_id=good.proposal_id, voter=good.voter,
        allocation=(30, 20, 30, 20), cast_at=good.cast_at,
        public_key=good.public_key, signature=good.signature,
    )
    assert validate_ballot(tampered, proposal, snap) is RejectionReason.BAD_SIGNATURE


def test_wrong_key_fails_signature():
    ident, impostor = register(b"\x05" * 32), register(b"\x06" * 32)
    proposal = make_proposal()
    snap = snapshot_for((ident.address, 100))
    ballot = signed_ballot(ident, [20, 20, 30, 30], cast_at=10)
    forged = Ballot(
        proposal_id=ballot.proposal_id, voter=ballot.voter,
        allocation=ballot.allocation, cast_at=ballot.cast_at,
        public_key=impostor.public_key, signature=ballot.signature,
    )
    assert validate_ballot(forged, proposal, snap) is RejectionReason.BAD_SIGNATURE


def test_ballot_after_close_rejected():
    ident = register(b"\x07" * 32)
    proposal = make_proposal(now=0, duration=1000)
    snap = snapshot_for((ident.address, 100))
    late = signed_ballot(ident, [20, 20, 30, 30], cast_at=1000)
    assert validate_ballot(late, proposal, snap) is RejectionReason.CLOSED


def test_length_mismatch_rejected():
    ident = register(b"\x08" * 32)
    proposal = make_proposal()
    snap = snapshot_for((ident.address, 100))
    short = signed_ballot(ident, [50, 50], cast_at=10)
    assert validate_ballot(short, proposal, snap) is RejectionReason.LENGTH_MISMATCH


def test_unknown_voter_rejected():
    stranger = register(b"\x09" * 32)
    proposal = make_proposal()
    snap = snapshot_for(("0xsomeoneelse", 100))
    ballot = signed_ballot(stranger, [1, 0, 0, 0], cast_at=10)
    assert validate_ballot(ballot, proposal, snap) is RejectionReason.UNKNOWN_VOTER


def test_negative_allocation_rejected_at_construction():
    with pytest.raises(InvalidInput):
        unsigned_ballot("0xv", [-1, 0, 0, 0])


# --- tallying ---------------------------------------------------------------

def test_single_ballot_weighted_identity():
    proposal = make_proposal()
    result = tally(proposal, [unsigned_ballot("0xa", [20, 20, 30, 30])],
                   VotingMethod.WEIGHTED, threshold=THRESHOLD)
    assert result.scores == (20.0, 20.0, 30.0, 30.0)
    assert result.winners == (2, 3)
    assert result.is_tie
    assert result.turnout == 1
    assert result.total_effective == 100.0


def test_whale_flip_between_methods():
    # 3 spread voters all-in on option 1, one whale all-in on option 4
    allocations = [[100, 0, 0, 0]] * 3 + [[0, 0, 0, 400]]
    ballots = [unsigned_ballot(f"0x{i}", a) for i, a in enumerate(allocations)]
    proposal = make_proposal()

    weighted = tally(proposal, ballots, VotingMethod.WEIGHTED, threshold=THRESHOLD)
    quadratic = tally(proposal, ballots, VotingMethod.QUADRATIC, threshold=THRESHOLD)

    assert weighted.winners == (3,)   # 400 > 300
    assert quadratic.winners == (0,)  # 3*10 = 30 > sqrt(400) = 20

    # cross-check every score against the independent brute-force oracle
    assert list(weighted.scores) == brute_force_tally(allocations, "weighted")
    assert list(quadratic.scores) == brute_force_tally(allocations, "quadratic")


def test_zero_ballots_tie_all():
    proposal = make_proposal()
    result = tally(proposal, [], VotingMethod.QUADRATIC, threshold=THRESHOLD)
    assert result.scores == (0.0, 0.0, 0.0, 0.0)
    assert result.winners == (0, 1, 2, 3)
    assert result.turnout == 0
    assert result.succeeded == (False, False, False, False)


def test_success_threshold_on_scores():
    proposal = make_proposal()
    result = tally(proposal, [unsigned_ballot("0xa", [10, 30, 30, 30])],
                   VotingMethod.WEIGHTED, threshold=THRESHOLD)
    assert result.succeeded == (False, True, True, True)


def test_replacement_keeps_latest_ballot_only():
    proposal = make_proposal()
    ballots = [
        unsigned_ballot("0xa", [100, 0, 0, 0], cast_at=1),
        unsigned_ballot("0xa", [0, 100, 0, 0], cast_at=2),
        unsigned_ballot("0xa", [0, 0, 100, 0], cast_at=3),
    ]
    result = tally(proposal, ballots, VotingMethod.WEIGHTED, threshold=THRESHOLD)
    assert result.scores == (0.0, 0.0, 100.0, 0.0)
    assert result.turnout == 1
    assert [b.cast_at for b in latest_per_voter(ballots)] == [3]


def test_whale_dampening_ratio():
    # all-in voters: k times the tokens moves an option k times (weighted)
    # but only sqrt(k) times (quadratic)
    proposal = make_proposal()
    small = unsigned_ballot("0xa", [25, 0, 0, 0])
    whale = unsigned_ballot("0xb", [0, 100, 0, 0])  # k = 4
    weighted = tally(proposal, [small, whale], VotingMethod.WEIGHTED, threshold=THRESHOLD)
    quadratic = tally(proposal, [small, whale], VotingMethod.QUADRATIC, threshold=THRESHOLD)
    assert weighted.scores[1] / weighted.scores[0] == 4.0
    assert quadratic.scores[1] / quadratic.scores[0] == 2.0


@given(
    st.lists(
        st.lists(st.integers(min_value=0, max_value=100), min_size=4, max_size=4),
        min_size=1, max_size=6,
    ),
    st.sampled_from([2, 3, 10]),
)
@settings(max_examples=150, deadline=None)
def test_argmax_invariant_under_uniform_scaling(allocations, scale):
    proposal = make_proposal()
    base = [unsigned_ballot(f"0x{i}", a) for i, a in enumerate(allocations)]
    scaled = [unsigned_ballot(f"0x{i}", [scale * x for x in a])
              for i, a in enumerate(allocations)]
    for method in VotingMethod:
        before = tally(proposal, base, method, threshold=THRESHOLD)
        after = tally(proposal, scaled, method, threshold=THRESHOLD)
        assert before.winners == after.winners


@given(
    st.lists(
        st.lists(st.integers(min_value=0, max_value=50), min_size=4, max_size=4),
        min_size=1, max_size=5,
    ),
    st.permutations(range(4)),
)
@settings(max_examples=100, deadline=None)
def test_permutation_equivariance(allocations, perm):
    proposal = make_proposal()
    base = [unsigned_ballot(f"0x{i}", a) for i, a in enumerate(allocations)]
    permuted = [unsigned_ballot(f"0x{i}", [a[perm[j]] for j in range(4)])
                for i, a in enumerate(allocations)]
    for method in VotingMethod:
        r_base = tally(proposal, base, method, threshold=THRESHOLD)
        r_perm = tally(proposal, permuted, method, threshold=THRESHOLD)
        assert all(
            r_perm.scores[j] == r_base.scores[perm[j]] for j in range(4)
        )


@given(
    st.lists(st.integers(min_value=0, max_value=50), min_size=4, max_size=4),
    st.integers(min_value=1, max_value=30),
    st.integers(min_value=0, max_value=3),
)
@settings(max_examples=100, deadline=None)
def test_monotonicity_adding_tokens_never_decreases_score(allocation, extra, option):
    proposal = make_proposal()
    boosted = list(allocation)
    boosted[option] += extra
    for method in VotingMethod:
        before = tally(proposal, [unsigned_ballot("0xa", allocation)], method,
                       threshold=THRESHOLD)
        after = tally(proposal, [unsigned_ballot("0xa", boosted)], method,
                      threshold=THRESHOLD)
        assert after.scores[option] >= before.scores[option]


# --- ratio vectors -----------------------------------------------------------

def test_ratio_vector_table_anchor():
    rv = ratio_vector(unsigned_ballot("0xa", [20, 20, 30, 30]))
    assert rv.ratios == (Fraction(1, 5), Fraction(1, 5), Fraction(3, 10), Fraction(3, 10))
    assert rv.as_floats() == (0.2, 0.2, 0.3, 0.3)
    assert not rv.zero_ballot


def test_ratio_vector_all_in():
    rv = ratio_vector([100, 0, 0, 0])
    assert rv.as_floats() == (1.0, 0.0, 0.0, 0.0)


def test_ratio_vector_zero_ballot_flagged():
    rv = ratio_vector([0, 0, 0, 0])
    assert rv.zero_ballot
    assert rv.as_floats() == (0.0, 0.0, 0.0, 0.0)


@given(st.lists(st.integers(min_value=0, max_value=200), min_size=2, max_size=6))
def test_ratio_vector_sums_to_one_unless_zero(allocation):
    rv = ratio_vector(allocation)
    if sum(allocation) == 0:
        assert rv.zero_ballot
    else:
        assert sum(rv.ratios) == 1
        assert all(0 <= r <= 1 for r in rv.ratios)
