"""Canonical byte serialization for signed and hashed structures.

One encoding is used everywhere a digest or signature is computed: JSON
with lexicographically sorted keys, no whitespace, UTF-8. The browser
client reimplements the same rules, so ballot bytes must be reproducible
across languages:

  * object keys sorted by Unicode code point
  * separators "," and ":" with no spaces or newlines
  * non-ASCII characters emitted raw (not \\uXXXX-escaped)
  * ints, bools, null, strings, arrays, objects only

Floats are rejected in strict mode (the default for anything a client
signs) because float formatting is not portable between languages.
Server-only payloads (tally results) may carry floats; Python's repr
round-trips them exactly within this implementation.
"""

from __future__ import annotations

import json
from typing import Any

from .errors import InvalidInput


def _reject_floats(value: Any) -> None:
    if isinstance(value, float):
        raise InvalidInput("floats are not allowed in canonical signed payloads")
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise InvalidInput("canonical object keys must be strings")
            _reject_floats(v)
    elif isinstance(value, (list, tuple)):
        for v in value:
            _reject_floats(v)


def canonical_bytes(value: Any, *, strict: bool = True) -> bytes:
    """Serialize ``value`` to canonical UTF-8 bytes.

    strict=True enforces the cross-language subset (no floats); use it for
    everything a client might sign. strict=False admits floats for
    server-internal payloads such as published tally scores.
    """
    if strict:
        _reject_floats(value)
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def is_canonical(payload: bytes) -> bool:
    """True iff ``payload`` is the canonical encoding of its own parse."""
    try:
        parsed = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return False
    return canonical_bytes(parsed, strict=False) == payload
