from __future__ import annotations

import pytest

from agora.identity import Identity, register


def seeded_identity(i: int) -> Identity:
    return register(i.to_bytes(32, "big"))


@pytest.fixture
def identities():
    """Eight deterministic participant identities."""
    return [seeded_identity(i) for i in range(8)]
