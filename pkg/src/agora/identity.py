"""Pseudonymous keypair identities and governance-message signing.

Each participant is an Ed25519 keypair. The public key derives a stable
20-byte address; the secret key signs canonical message bytes. Ed25519 is
deterministic (RFC 8032), so the same key and payload always produce the
same signature, and verification is payload- and key-bound.

Secret keys never leave the process that created them: serialization
helpers expose only the public half.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import InvalidInput

SEED_BYTES = 32
PUBLIC_KEY_BYTES = 32
ADDRESS_BYTES = 20


def derive_address(public_key: bytes) -> str:
    """Derive the address for a raw 32-byte Ed25519 public key.

    Address = last 20 bytes of SHA-256(public_key), lowercase hex with a
    0x prefix. Pure function: the same key always yields the same address.
    """
    if not isinstance(public_key, (bytes, bytearray)) or len(public_key) != PUBLIC_KEY_BYTES:
        raise InvalidInput(
            f"public key must be {PUBLIC_KEY_BYTES} raw bytes, got {len(public_key) if isinstance(public_key, (bytes, bytearray)) else type(public_key).__name__}"
        )
    digest = hashlib.sha256(bytes(public_key)).digest()
    return "0x" + digest[-ADDRESS_BYTES:].hex()


@dataclass(frozen=True)
class Identity:
    """A pseudonymous participant: keypair plus derived address.

    Immutable after creation; safe to share across threads. The secret
    key object is held privately and is not part of repr or equality.
    """

    public_key: bytes
    address: str
    _secret: Ed25519PrivateKey = field(repr=False, compare=False)

    def sign(self, payload: bytes) -> "SignedMessage":
        return sign(self, payload)


@dataclass(frozen=True)
class SignedMessage:
    payload: bytes
    signer: str
    signature: bytes


def register(seed: bytes | None = None) -> Identity:
    """Create an identity, optionally from a fixed 32-byte seed.

    The same seed always yields the same keypair and address, which keeps
    synthetic experiment populations reproducible.
    """
    if seed is not None:
        if not isinstance(seed, (bytes, bytearray)) or len(seed) != SEED_BYTES:
            raise InvalidInput(f"seed must be exactly {SEED_BYTES} bytes")
        secret = Ed25519PrivateKey.from_private_bytes(bytes(seed))
    else:
        secret = Ed25519PrivateKey.from_private_bytes(secrets.token_bytes(SEED_BYTES))
    public = secret.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return Identity(public_key=public, address=derive_address(public), _secret=secret)


def sign(identity: Identity, payload: bytes) -> SignedMessage:
    if not payload:
        raise InvalidInput("cannot sign an empty payload")
    signature = identity._secret.sign(bytes(payload))
    return SignedMessage(payload=bytes(payload), signer=identity.address, signature=signature)


def verify(payload: bytes, signature: bytes, public_key: bytes) -> bool:
    """True iff ``signature`` was produced over exactly ``payload`` by the
    secret key matching ``public_key``. Malformed inputs return False."""
    try:
        Ed25519PublicKey.from_public_bytes(bytes(public_key)).verify(
            bytes(signature), bytes(payload)
        )
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False
