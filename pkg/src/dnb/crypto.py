"""Hashing, Ed25519 keypairs, and address derivation.

The chain commits to one signature scheme in its genesis block; this build
ships ed25519 (deterministic signatures, 32-byte public keys, 64-byte
signatures). Addresses are the last 20 bytes of SHA-256 of the public key.
"""

from __future__ import annotations

import hashlib
import os

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

SCHEME_ID = "ed25519"
SECRET_KEY_LEN = 32
PUBLIC_KEY_LEN = 32
SIGNATURE_LEN = 64
HASH_LEN = 32
ADDRESS_LEN = 20

ZERO_HASH = b"\x00" * HASH_LEN
# Reserved account that accumulates transaction fees; never a real wallet.
FEE_SINK = b"\x00" * ADDRESS_LEN

_KEYGEN_DOMAIN = b"dnb keygen v1"


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def generate_keypair(seed: int | None = None) -> tuple[bytes, bytes]:
    """Return (secret, public) bytes; a seed makes generation reproducible."""
    if seed is None:
        raw = os.urandom(SECRET_KEY_LEN)
    else:
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        raw = sha256(_KEYGEN_DOMAIN + seed.to_bytes(8, "big"))
    secret_key = Ed25519PrivateKey.from_private_bytes(raw)
    return raw, secret_key.public_key().public_bytes_raw()


def public_from_secret(secret: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(secret).public_key().public_bytes_raw()


def derive_address(public: bytes) -> bytes:
    if len(public) != PUBLIC_KEY_LEN:
        raise ValueError(f"public key must be {PUBLIC_KEY_LEN} bytes")
    return sha256(public)[-ADDRESS_LEN:]


def sign(secret: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(secret).sign(message)


def verify(public: bytes, message: bytes, signature: bytes) -> bool:
    if len(public) != PUBLIC_KEY_LEN or len(signature) != SIGNATURE_LEN:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True
