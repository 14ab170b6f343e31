"""Ballot validation and vote tallying.

A ballot distributes a voter's token budget across the proposal options
as a vector of non-negative integers, signed over its canonical bytes.
Two effective-vote rules are supported:

  WEIGHTED   an option's score is the sum of tokens allocated to it
  QUADRATIC  each voter contributes the square root of the tokens they
             put on an option, so 4 tokens are worth 2 votes and a
             voter with k times the tokens moves a single option by
             only sqrt(k) times as much

Winners are reported as the full argmax set; ties are never broken here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .canonical import canonical_bytes
from .errors import InvalidInput
from .identity import derive_address, verify
from .ledger import LedgerSnapshot, balance
from .spaces import Proposal, VotingMethod


@dataclass(frozen=True)
class Ballot:
    """A signed allocation of tokens over a proposal's options."""

    proposal_id: str
    voter: str
    allocation: tuple[int, ...]
    cast_at: int
    public_key: bytes
    signature: bytes

    def __post_init__(self):
        if any((not isinstance(a, int)) or a < 0 for a in self.allocation):
            raise InvalidInput("allocation entries must be non-negative integers")

    @property
    def total_allocated(self) -> int:
        return sum(self.allocation)

    def signing_payload(self) -> bytes:
        return ballot_signing_payload(
            self.proposal_id, self.voter, self.allocation, self.cast_at
        )


def ballot_signing_payload(proposal_id: str, voter: str,
                           allocation: Sequence[int], cast_at: int) -> bytes:
    """Canonical bytes the voter signs; the browser client reproduces
    these bytes exactly (golden-file tested)."""
    return canonical_bytes({
        "allocation": list(allocation),
        "cast_at": cast_at,
        "proposal_id": proposal_id,
        "voter": voter,
    })


class RejectionReason(str, Enum):
    BAD_SIGNATURE = "BAD_SIGNATURE"
    CLOSED = "CLOSED"
    OVER_BUDGET = "OVER_BUDGET"
    LENGTH_MISMATCH = "LENGTH_MISMATCH"
    UNKNOWN_VOTER = "UNKNOWN_VOTER"


def validate_ballot(ballot: Ballot, proposal: Proposal,
                    snapshot: LedgerSnapshot) -> RejectionReason | None:
    """Check one ballot against the proposal window and power snapshot.

    Returns None when the ballot is acceptable, else the reason. A later
    valid ballot from the same voter replaces an earlier one at tally
    time; both stay on the audit chain.
    """
    if derive_address(ballot.public_key) != ballot.voter or not verify(
        ballot.signing_payload(), ballot.signature, ballot.public_key
    ):
        return RejectionReason.BAD_SIGNATURE
    if not proposal.is_open_at(ballot.cast_at):
        return RejectionReason.CLOSED
    if len(ballot.allocation) != len(proposal.options):
        return RejectionReason.LENGTH_MISMATCH
    budget = balance(snapshot, ballot.voter)
    if budget == 0 and ballot.total_allocated > 0:
        return RejectionReason.UNKNOWN_VOTER
    if ballot.total_allocated > budget:
        return RejectionReason.OVER_BUDGET
    return None


def effective_votes_quadratic(tokens: int) -> float:
    """Effective votes bought by ``tokens`` under the quadratic rule:
    sqrt(tokens), so 4 tokens provide exactly 2 votes."""
    if tokens < 0:
        raise InvalidInput("token count must be non-negative")
    return math.sqrt(tokens)


def latest_per_voter(ballots: Iterable[Ballot]) -> list[Ballot]:
    """Deduplicate to each voter's latest ballot.

    Latest means greatest cast_at; arrival order breaks exact timestamp
    ties (the intake queue is serialized, so order is well defined).
    """
    chosen: dict[str, Ballot] = {}
    for b in ballots:
        held = chosen.get(b.voter)
        if held is None or b.cast_at >= held.cast_at:
            chosen[b.voter] = b
    return list(chosen.values())


@dataclass(frozen=True)
class TallyResult:
    proposal_id: str
    method: VotingMethod
    scores: tuple[float, ...]
    turnout: int
    total_effective: float
    winners: tuple[int, ...]
    succeeded: tuple[bool, ...]

    @property
    def is_tie(self) -> bool:
        return len(self.winners) != 1


def tally(proposal: Proposal, ballots: Sequence[Ballot],
          method: VotingMethod, *, threshold: Fraction) -> TallyResult:
    """Score a closed proposal's deduplicated ballots.

    WEIGHTED sums raw tokens per option; QUADRATIC sums per-voter square
    roots (no post-sum squaring). The argmax set is reported in full.
    An option succeeds when its share of the total effective votes meets
    the space threshold; with zero effective votes nothing succeeds.
    """
    option_count = len(proposal.options)
    effective = latest_per_voter(ballots)
    scores: list[float] = [0] * option_count  # stays int-exact under WEIGHTED
    for b in effective:
        if len(b.allocation) != option_count:
            raise InvalidInput(f"ballot from {b.voter} has wrong allocation length")
        for j, tokens in enumerate(b.allocation):
            if method is VotingMethod.WEIGHTED:
                scores[j] += tokens
            else:
                scores[j] += effective_votes_quadratic(tokens)

    total = sum(scores)
    top = max(scores)
    winners = tuple(j for j, s in enumerate(scores) if s == top)
    if total > 0:
        # exact comparison: float score ratios compare to the Fraction
        # threshold without epsilon
        succeeded = tuple(s / total >= threshold for s in scores)
    else:
        succeeded = tuple(False for _ in scores)
    return TallyResult(
        proposal_id=proposal.id,
        method=method,
        scores=tuple(float(s) for s in scores),
        turnout=len(effective),
        total_effective=float(total),
        winners=winners,
        succeeded=succeeded,
    )


@dataclass(frozen=True)
class RatioVector:
    """A ballot's allocation normalized to sum to 1; the unit of the
    per-condition summary tables. All-zero ballots normalize to the zero
    vector and are flagged."""

    ratios: tuple[Fraction, ...]
    zero_ballot: bool

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(r) for r in self.ratios)


def ratio_vector(ballot: Ballot | Sequence[int]) -> RatioVector:
    allocation = ballot.allocation if isinstance(ballot, Ballot) else tuple(ballot)
    total = sum(allocation)
    if total == 0:
        return RatioVector(ratios=tuple(Fraction(0) for _ in allocation), zero_ballot=True)
    return RatioVector(
        ratios=tuple(Fraction(a, total) for a in allocation), zero_ballot=False
    )
