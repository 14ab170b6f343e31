"""Per-space voting-power tokens and immutable balance snapshots.

Tokens are integers, minted once per space under one of two policies:

  EQUAL         every participant receives the same share
  PARETO_20_80  a seeded random 20% of participants ("early adopters")
                split 80% of the supply; the rest split the remainder

All splits use largest-remainder rounding in canonical (sorted-address)
order so grants always sum exactly to the supply. Tokens are never spent
or transferred; ballots reference a snapshot frozen at proposal open.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import IllegalState, InvalidInput, NotFound

TOKENS_PER_HEAD_DEFAULT = 100


class PolicyKind(str, Enum):
    EQUAL = "EQUAL"
    PARETO_20_80 = "PARETO_20_80"


@dataclass(frozen=True)
class PowerPolicy:
    kind: PolicyKind
    total_supply: int
    top_fraction: Fraction = Fraction(1, 5)
    top_share: Fraction = Fraction(4, 5)
    rng_seed: int = 0

    def __post_init__(self):
        if self.total_supply <= 0:
            raise InvalidInput("total_supply must be positive")
        if not (0 < self.top_fraction < 1):
            raise InvalidInput("top_fraction must lie in (0, 1)")
        if not (0 < self.top_share < 1):
            raise InvalidInput("top_share must lie in (0, 1)")


@dataclass(frozen=True)
class TokenGrant:
    space_id: str
    address: str
    amount: int


@dataclass(frozen=True)
class LedgerSnapshot:
    """Immutable balance map for one space, frozen at a point in time."""

    space_id: str
    frozen_at: int
    balances: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "balances", MappingProxyType(dict(self.balances)))

    @property
    def total_supply(self) -> int:
        return sum(self.balances.values())


def balance(snapshot: LedgerSnapshot, address: str) -> int:
    """Granted amount, or 0 for an address unknown to the snapshot."""
    return snapshot.balances.get(address, 0)


def _check_participants(participants: Sequence[str]) -> list[str]:
    addrs = list(participants)
    if not addrs:
        raise InvalidInput("participant list is empty")
    if len(set(addrs)) != len(addrs):
        raise InvalidInput("duplicate addresses in participant list")
    return addrs


def split_equal(total: int, addresses: Iterable[str]) -> dict[str, int]:
    """Split ``total`` tokens across addresses by largest remainder.

    Each address gets floor(total/n); the remainder goes one token each to
    the first addresses in sorted order. Sums exactly to ``total``.
    """
    ordered = sorted(addresses)
    n = len(ordered)
    base, rem = divmod(total, n)
    return {addr: base + (1 if i < rem else 0) for i, addr in enumerate(ordered)}


def mint_equal(space_id: str, participants: Sequence[str], total_supply: int) -> list[TokenGrant]:
    addrs = _check_participants(participants)
    if total_supply < len(addrs):
        raise InvalidInput("total_supply smaller than participant count")
    shares = split_equal(total_supply, addrs)
    return [TokenGrant(space_id, addr, shares[addr]) for addr in sorted(addrs)]


def mint_pareto(space_id: str, participants: Sequence[str], policy: PowerPolicy) -> list[TokenGrant]:
    """Mint under the 20/80 concentration policy.

    k = ceil(top_fraction * n) seeded-random addresses become early
    adopters and split floor(top_share * total) equally; everyone else
    splits the remainder equally. Grand total is exact.
    """
    if policy.kind is not PolicyKind.PARETO_20_80:
        raise InvalidInput(f"policy kind {policy.kind} is not PARETO_20_80")
    addrs = _check_participants(participants)
    n = len(addrs)
    if policy.total_supply < n:
        raise InvalidInput("total_supply smaller than participant count")

    k = math.ceil(policy.top_fraction * n)
    rng = random.Random(policy.rng_seed)
    adopters = set(rng.sample(sorted(addrs), k))
    others = [a for a in addrs if a not in adopters]

    adopter_pool = int(policy.top_share * policy.total_supply)  # floor of the exact fraction
    if others:
        shares = split_equal(adopter_pool, adopters)
        shares.update(split_equal(policy.total_supply - adopter_pool, others))
    else:
        # degenerate n where everyone is an adopter: keep conservation exact
        shares = split_equal(policy.total_supply, adopters)
    return [TokenGrant(space_id, addr, shares[addr]) for addr in sorted(addrs)]


class TokenLedger:
    """Registry of grants per space; single writer per space.

    Minting happens once per space; snapshots are immutable views served
    to the tally engine.
    """

    def __init__(self):
        self._grants: dict[str, dict[str, int]] = {}

    def record(self, grants: Sequence[TokenGrant]) -> None:
        if not grants:
            raise InvalidInput("no grants to record")
        space_id = grants[0].space_id
        if any(g.space_id != space_id for g in grants):
            raise InvalidInput("grants span multiple spaces")
        if space_id in self._grants:
            raise IllegalState(f"space {space_id} already minted")
        self._grants[space_id] = {g.address: g.amount for g in grants}

    def has_minted(self, space_id: str) -> bool:
        return space_id in self._grants

    def grants(self, space_id: str) -> dict[str, int]:
        if space_id not in self._grants:
            raise NotFound(f"no grants for space {space_id}")
        return dict(self._grants[space_id])

    def snapshot(self, space_id: str, at: int) -> LedgerSnapshot:
        """Freeze the space's balances. Repeated calls with the same
        arguments return structurally equal snapshots."""
        if space_id not in self._grants:
            raise NotFound(f"unknown space {space_id}: minting incomplete or never ran")
        return LedgerSnapshot(space_id=space_id, frozen_at=at, balances=self._grants[space_id])
