"""Shared exception types.

Every module raises from this hierarchy so the gateway can map errors to
HTTP statuses 1:1 (Unauthenticated -> 401, Forbidden -> 403,
IllegalState -> 409, InvalidInput -> 422, NotFound -> 404).
"""

from __future__ import annotations


class AgoraError(Exception):
    """Base class for all platform errors."""


class InvalidInput(AgoraError):
    """Malformed or out-of-contract input (HTTP 422)."""


class NotFound(AgoraError):
    """Referenced entity does not exist (HTTP 404)."""


class Forbidden(AgoraError):
    """Caller lacks the required role (HTTP 403)."""


class Unauthenticated(AgoraError):
    """Missing or invalid credentials (HTTP 401)."""


class IllegalState(AgoraError):
    """Operation not legal in the entity's current state (HTTP 409)."""


class IllegalTransition(IllegalState):
    """Session state machine rejected an event."""

    def __init__(self, state: str, event: str, detail: str = ""):
        self.state = state
        self.event = event
        msg = f"event {event} not legal in state {state}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ChainBroken(AgoraError):
    """Audit chain failed verification."""

    def __init__(self, broken_at: int):
        self.broken_at = broken_at
        super().__init__(f"audit chain broken at seq {broken_at}")
