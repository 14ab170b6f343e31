"""Shared golden-file test: the web console must produce byte-identical
ballot bytes. The fixtures under frontend/test/fixtures are asserted by
both this suite and the console's vitest suite."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from agora.canonical import canonical_bytes
from agora.errors import InvalidInput
from agora.tally import ballot_signing_payload

FIXTURES = Path(__file__).parent.parent / "frontend" / "test" / "fixtures" / "canonical_ballots.json"


def load_cases():
    return json.loads(FIXTURES.read_text())


@pytest.mark.parametrize("case", load_cases(), ids=lambda c: c["proposal_id"])
def test_ballot_bytes_match_golden(case):
    payload = ballot_signing_payload(
        case["proposal_id"], case["voter"], case["allocation"], case["cast_at"]
    )
    assert payload.hex() == case["expected_hex"]
    assert payload.decode("utf-8") == case["expected_utf8"]


def test_canonical_rejects_floats_in_signed_payloads():
    with pytest.raises(InvalidInput):
        canonical_bytes({"allocation": [1.5]})


def test_canonical_sorts_keys_and_strips_whitespace():
    assert canonical_bytes({"b": 1, "a": [True, None]}) == b'{"a":[true,null],"b":1}'
