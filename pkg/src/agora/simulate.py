"""Synthetic voter populations for desk-scale mechanism experiments.

A population spec mixes voter archetypes, each a probability profile
over the proposal options. Synthetic voters allocate their token budget
proportionally to their archetype's weights (largest-remainder rounded),
sign real ballots, and cast them through the same validation path as
live voters — the simulator has no backdoor into the tally.

Everything is seeded: identical spec and seed reproduce identical
identities, assignments, ballots, tallies, and report rows.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .deliberation import SessionEvent
from .errors import InvalidInput
from .experiment import (
    CONDITIONS,
    Condition,
    SummaryCell,
    SurveyResponse,
    VDEM_DIMENSIONS,
    condition_summary,
)
from .identity import Identity, register
from .ledger import PolicyKind, PowerPolicy
from .platform import Platform
from .spaces import Proposal, ProposalStatus, Space, VotingMethod
from .tally import (
    Ballot,
    RejectionReason,
    TallyResult,
    ballot_signing_payload,
    tally,
)

SIM_EPOCH_MS = 1_700_000_000_000  # fixed logical epoch so runs are reproducible

STUDY_OPTIONS = (
    "Keep the current model",
    "Provide more specific facts",
    "Integrate a user feedback loop",
    "Analyze speakers' emotions and sentiment",
)

DEFAULT_ARCHETYPES = (
    {"name": "fact-seeker", "weights": [0.10, 0.60, 0.10, 0.20], "mix": 0.50},
    {"name": "empath", "weights": [0.10, 0.20, 0.20, 0.50], "mix": 0.25},
    {"name": "spread", "weights": [0.25, 0.25, 0.25, 0.25], "mix": 0.25},
)


class SimClock:
    """Deterministic logical clock: one-second ticks from a fixed start."""

    def __init__(self, start_ms: int = SIM_EPOCH_MS):
        self.now_ms = start_ms

    def __call__(self) -> int:
        self.now_ms += 1000
        return self.now_ms

    def advance(self, ms: int) -> None:
        self.now_ms += ms


@dataclass(frozen=True)
class Archetype:
    name: str
    weights: tuple[float, ...]
    mix: float

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise InvalidInput(f"archetype {self.name}: negative weight")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise InvalidInput(f"archetype {self.name}: weights must sum to 1")
        if self.mix < 0:
            raise InvalidInput(f"archetype {self.name}: negative mix fraction")


@dataclass(frozen=True)
class PopulationSpec:
    n: int
    archetypes: tuple[Archetype, ...]
    seed: int
    options: tuple[str, ...] = STUDY_OPTIONS
    tokens_per_head: int = 100

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput("population must have at least one voter")
        if not self.archetypes:
            raise InvalidInput("at least one archetype required")
        if abs(sum(a.mix for a in self.archetypes) - 1.0) > 1e-9:
            raise InvalidInput("archetype mix fractions must sum to 1")
        widths = {len(a.weights) for a in self.archetypes}
        if widths != {len(self.options)}:
            raise InvalidInput("archetype weights must match the option count")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PopulationSpec":
        archetypes = tuple(
            Archetype(name=a["name"], weights=tuple(a["weights"]), mix=float(a["mix"]))
            for a in doc.get("archetypes", DEFAULT_ARCHETYPES)
        )
        return cls(
            n=int(doc["n"]),
            archetypes=archetypes,
            seed=int(doc["seed"]),
            options=tuple(doc.get("options", STUDY_OPTIONS)),
            tokens_per_head=int(doc.get("tokens_per_head", 100)),
        )


def sim_identity(seed: int, index: int) -> Identity:
    material = hashlib.sha256(f"agora-sim:{seed}:{index}".encode()).digest()
    return register(material)


def operator_identity(seed: int) -> Identity:
    return register(hashlib.sha256(f"agora-sim-operator:{seed}".encode()).digest())


def largest_remainder_allocation(budget: int, weights: Sequence[float]) -> list[int]:
    """Apportion ``budget`` tokens proportionally to ``weights``.

    Floors the exact shares, then hands remaining tokens to the largest
    fractional parts (lowest index wins ties). Sums exactly to budget.
    """
    exact = [budget * w for w in weights]
    floors = [int(x) for x in exact]
    leftover = budget - sum(floors)
    order = sorted(range(len(weights)), key=lambda j: (-(exact[j] - floors[j]), j))
    for j in order[:leftover]:
        floors[j] += 1
    return floors


def archetype_labels(spec: PopulationSpec) -> list[int]:
    """Deterministic archetype assignment: largest-remainder counts over
    the mix fractions, order shuffled by the population seed."""
    counts = largest_remainder_allocation(spec.n, [a.mix for a in spec.archetypes])
    labels: list[int] = []
    for archetype_index, count in enumerate(counts):
        labels.extend([archetype_index] * count)
    random.Random(spec.seed ^ 0xA5A5).shuffle(labels)
    return labels


def archetype_of(spec: PopulationSpec, index: int) -> Archetype:
    return spec.archetypes[archetype_labels(spec)[index]]


def population_identities(spec: PopulationSpec) -> list[Identity]:
    return [sim_identity(spec.seed, i) for i in range(spec.n)]


def space_for_condition(condition: Condition, admin: str, n: int,
                        tokens_per_head: int, seed: int) -> Space:
    return Space(
        id=f"sim-{condition.key}",
        voting_method=condition.method,
        power_policy=PowerPolicy(
            kind=condition.power,
            total_supply=tokens_per_head * n,
            rng_seed=seed,
        ),
        admins=frozenset({admin}),
    )


def deliberate_cohort(platform: Platform, voters: Sequence[Identity],
                      rng: random.Random) -> None:
    """Walk a cohort through intro, value prompt, AI chat, and the group
    room in phases, like concurrent participants: the room dwell passes
    once for everyone. Leaves every session in VOTING."""
    for voter in voters:
        address = voter.address
        platform.advance_session(address, SessionEvent.START_INTRO)
        platform.advance_session(address, SessionEvent.INTRO_DONE)
        platform.answer_value(address, rng.choice(["yes", "no", "maybe"]))
        session = platform.session(address)
        platform.ai_exchange(address, "the summary missed the speakers' tone",
                             _sim_responder)
        while session.user_turns() < session.min_user_turns:
            platform.ai_exchange(address, "let me add one more thought", _sim_responder)
        platform.advance_session(address, SessionEvent.CHAT_DONE)
        room = platform.room(platform.session(address).room_id)
        room.post(address, "here is where I landed", now=platform.clock())
    if isinstance(platform.clock, SimClock) and voters:
        platform.clock.advance(platform.session(voters[0].address).min_room_dwell_ms)
    for voter in voters:
        platform.advance_session(voter.address, SessionEvent.ROOM_DONE)
        platform.advance_session(voter.address, SessionEvent.SURVEY_DONE)


def _sim_responder(transcript, seed_case):
    topics = seed_case.suggested_topics or ("the options on the ballot",)
    return f"Understood. Consider also: {topics[len(transcript) % len(topics)]}"


def ballot_for(voter: Identity, proposal_id: str, budget: int,
               weights: Sequence[float], cast_at: int) -> Ballot:
    allocation = largest_remainder_allocation(budget, weights)
    payload = ballot_signing_payload(proposal_id, voter.address, allocation, cast_at)
    return Ballot(
        proposal_id=proposal_id, voter=voter.address,
        allocation=tuple(allocation), cast_at=cast_at,
        public_key=voter.public_key, signature=voter.sign(payload).signature,
    )


@dataclass(frozen=True)
class ConditionRun:
    condition: Condition
    ballots: tuple[Ballot, ...]
    result: TallyResult
    summary: tuple[SummaryCell, ...]
    surveys: tuple[SurveyResponse, ...]


def run_condition(spec: PopulationSpec, condition: Condition, *,
                  deliberate: bool = True) -> ConditionRun:
    """Run one treatment condition end to end on a fresh platform.

    Deterministic per (spec, condition): identities, minting, the
    deliberation walk, ballots, tally, and the summary row all derive
    from the spec seed. Ballots go through cast_ballot like live votes.
    """
    clock = SimClock()
    platform = Platform(clock=clock)
    operator = operator_identity(spec.seed)
    platform.register_key(operator.public_key)
    voters = population_identities(spec)
    for voter in voters:
        platform.register_key(voter.public_key)
        platform.condition_keys[voter.address] = condition.key

    space = space_for_condition(condition, operator.address, spec.n,
                                spec.tokens_per_head, spec.seed)
    platform.create_space(space, operator.address)
    platform.mint(space.id, [v.address for v in voters], operator.address)

    rng = random.Random(spec.seed * 7919 + CONDITIONS.index(condition))
    if deliberate:
        deliberate_cohort(platform, voters, rng)

    proposal = platform.open_proposal(space.id, f"prop-{condition.key}",
                                      list(spec.options), operator.address)
    snapshot = platform.snapshots[proposal.id]
    labels = archetype_labels(spec)
    accepted: list[Ballot] = []
    for i, voter in enumerate(voters):
        archetype = spec.archetypes[labels[i]]
        budget = snapshot.balances[voter.address]
        ballot = ballot_for(voter, proposal.id, budget, archetype.weights,
                            proposal.open_at + 1000 * (i + 1))
        outcome = platform.cast_ballot(ballot)
        if isinstance(outcome, RejectionReason):
            raise InvalidInput(f"simulated ballot rejected: {outcome.value}")
        accepted.append(ballot)
        if deliberate:
            platform.advance_session(voter.address, SessionEvent.BALLOT_ACCEPTED)

    platform.close(proposal.id, operator.address, now=proposal.close_at)
    result = platform.publish(proposal.id, operator.address)
    summary = tuple(condition_summary({condition: accepted}))
    surveys = tuple(synthesize_surveys(spec, condition, voters))
    return ConditionRun(condition=condition, ballots=tuple(accepted),
                        result=result, summary=summary, surveys=surveys)


def synthesize_surveys(spec: PopulationSpec, condition: Condition,
                       voters: Sequence[Identity]) -> list[SurveyResponse]:
    """Seeded synthetic survey responses (1..5 scales) per participant."""
    rng = random.Random(spec.seed * 31 + CONDITIONS.index(condition))
    out = []
    for voter in voters:
        likert = {"satisfaction": rng.randint(3, 5)}
        vdem = {dim: rng.randint(1, 5) for dim in VDEM_DIMENSIONS}
        out.append(SurveyResponse(participant=voter.address,
                                  likert_items=likert, vdem_items=vdem))
    return out


@dataclass(frozen=True)
class MethodComparison:
    agreement_rate: float
    score_share_deltas: Mapping[str, tuple[float, ...]]  # policy -> per-option deltas
    whale_influence: Mapping[str, dict]  # policy -> {k, weighted, quadratic}


def compare_methods(spec: PopulationSpec) -> MethodComparison:
    """Tally identical ballot sets under both methods for each power
    policy and report where the mechanisms diverge.

    The whale-influence entry reports the budget ratio k between the
    richest and poorest voter and each method's resulting influence
    ratio (k for weighted, sqrt(k) for quadratic).
    """
    agreements = []
    deltas: dict[str, tuple[float, ...]] = {}
    whale: dict[str, dict] = {}
    for power in (PolicyKind.EQUAL, PolicyKind.PARETO_20_80):
        base_condition = next(
            c for c in CONDITIONS
            if c.power is power and c.method is VotingMethod.WEIGHTED
        )
        run = run_condition(spec, base_condition, deliberate=False)
        # re-tally the same ballots under both methods
        proposal = Proposal(
            id="compare", space_id="compare", options=spec.options,
            open_at=0, close_at=1, status=ProposalStatus.CLOSED, snapshot_ref="",
        )
        weighted = tally(proposal, list(run.ballots), VotingMethod.WEIGHTED,
                         threshold=Fraction(1, 4))
        quadratic = tally(proposal, list(run.ballots), VotingMethod.QUADRATIC,
                          threshold=Fraction(1, 4))
        agreements.append(1.0 if weighted.winners == quadratic.winners else 0.0)

        policy_key = "equal" if power is PolicyKind.EQUAL else "pareto"
        w_total = weighted.total_effective or 1.0
        q_total = quadratic.total_effective or 1.0
        deltas[policy_key] = tuple(
            q / q_total - w / w_total
            for w, q in zip(weighted.scores, quadratic.scores)
        )
        budgets = [sum(b.allocation) for b in run.ballots if sum(b.allocation) > 0]
        k = max(budgets) / min(budgets) if budgets else 1.0
        whale[policy_key] = {
            "budget_ratio": k,
            "weighted_influence": k,
            "quadratic_influence": math.sqrt(k),
        }
    return MethodComparison(
        agreement_rate=sum(agreements) / len(agreements),
        score_share_deltas=deltas,
        whale_influence=whale,
    )
