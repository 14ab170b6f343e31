"""Spaces and proposals: voting rules, roles, windows, status transitions.

A space fixes the voting method, the power policy, the vote window length
and the success threshold for everything proposed inside it. A proposal
carries an ordered option list and moves strictly forward through
DRAFT -> OPEN -> CLOSED -> PUBLISHED.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

from .errors import Forbidden, IllegalState, InvalidInput
from .ledger import PowerPolicy

VOTE_DURATION_DEFAULT_MS = 48 * 60 * 60 * 1000  # 48h window
SUCCESS_THRESHOLD_DEFAULT = Fraction(1, 4)  # above-uniform support among 4 options


class VotingMethod(str, Enum):
    QUADRATIC = "QUADRATIC"
    WEIGHTED = "WEIGHTED"


class ProposalStatus(str, Enum):
    DRAFT = "DRAFT"
    OPEN = "OPEN"
    CLOSED = "CLOSED"
    PUBLISHED = "PUBLISHED"


_STATUS_ORDER = {s: i for i, s in enumerate(ProposalStatus)}


@dataclass(frozen=True)
class Space:
    id: str
    voting_method: VotingMethod
    power_policy: PowerPolicy
    admins: frozenset[str]
    moderators: frozenset[str] = frozenset()
    vote_duration: int = VOTE_DURATION_DEFAULT_MS
    success_threshold: Fraction = SUCCESS_THRESHOLD_DEFAULT

    def __post_init__(self):
        if self.vote_duration <= 0:
            raise InvalidInput("vote duration must be positive")
        if not self.admins:
            raise InvalidInput("admin set must be non-empty")
        if not (0 < self.success_threshold <= 1):
            raise InvalidInput("success threshold must lie in (0, 1]")

    def require_admin(self, caller: str) -> None:
        if caller not in self.admins:
            raise Forbidden(f"{caller} is not an admin of space {self.id}")


@dataclass(frozen=True)
class Proposal:
    id: str
    space_id: str
    options: tuple[str, ...]
    open_at: int
    close_at: int
    status: ProposalStatus
    snapshot_ref: str
    forced_close: bool = False

    def __post_init__(self):
        if len(self.options) < 2:
            raise InvalidInput("a proposal needs at least 2 options")

    def is_open_at(self, at: int) -> bool:
        return self.status is ProposalStatus.OPEN and self.open_at <= at < self.close_at


def open_proposal(space: Space, proposal_id: str, options: list[str], caller: str,
                  *, now: int, snapshot_ref: str) -> Proposal:
    """Open a proposal in ``space``; only admins may open.

    The vote window starts now and runs for the space's configured
    duration. The snapshot reference pins voting power at open.
    """
    space.require_admin(caller)
    return Proposal(
        id=proposal_id,
        space_id=space.id,
        options=tuple(options),
        open_at=now,
        close_at=now + space.vote_duration,
        status=ProposalStatus.OPEN,
        snapshot_ref=snapshot_ref,
    )


def close_proposal(proposal: Proposal, *, now: int, forced_by_admin: bool = False) -> Proposal:
    """CLOSED transition: at/after the deadline, or early by admin force.

    Forced closes are flagged so the audit trail distinguishes them.
    """
    if proposal.status is not ProposalStatus.OPEN:
        raise IllegalState(f"proposal {proposal.id} is {proposal.status.value}, not OPEN")
    if now < proposal.close_at and not forced_by_admin:
        raise Forbidden(
            f"proposal {proposal.id} closes at {proposal.close_at}; "
            "early close requires an admin"
        )
    return replace(proposal, status=ProposalStatus.CLOSED, forced_close=forced_by_admin)


def publish_proposal(proposal: Proposal) -> Proposal:
    if proposal.status is not ProposalStatus.CLOSED:
        raise IllegalState(f"proposal {proposal.id} is {proposal.status.value}, not CLOSED")
    return replace(proposal, status=ProposalStatus.PUBLISHED)


def assert_forward(old: ProposalStatus, new: ProposalStatus) -> None:
    """Guard used by the event replay: status never moves backward."""
    if _STATUS_ORDER[new] < _STATUS_ORDER[old]:
        raise IllegalState(f"status may not move backward: {old.value} -> {new.value}")
