"""Token-governed deliberation and voting platform.

Participants hold pseudonymous keypair identities, receive voting-power
tokens under an equal or 20/80 policy, deliberate individually with an
AI agent and in group rooms, and cast signed ballots tallied under
weighted or quadratic rules. Every governance event lands on a
hash-linked append-only chain, and an experiment harness runs the full
2x2 mechanism comparison on synthetic populations.
"""

from .chain import AuditChain, ChainEvent, EventKind, verify_chain
from .identity import Identity, derive_address, register, sign, verify
from .ledger import LedgerSnapshot, PolicyKind, PowerPolicy, TokenGrant, TokenLedger
from .platform import BallotReceipt, Platform
from .spaces import Proposal, ProposalStatus, Space, VotingMethod
from .tally import (
    Ballot,
    RatioVector,
    RejectionReason,
    TallyResult,
    effective_votes_quadratic,
    ratio_vector,
    tally,
    validate_ballot,
)

__version__ = "0.1.0"
