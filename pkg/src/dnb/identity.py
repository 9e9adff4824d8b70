"""Wallets, DIDs, and challenge-response authentication.

A wallet is a named keypair; its address and DID both derive from the
public key. Balances are never stored in the wallet, they are read from
chain state. The DID method is minimal: `did:dnb:<base32(SHA-256(pk))>`
with no document resolution.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass
from pathlib import Path

from . import crypto
from .chain import Chain
from .crypto import PUBLIC_KEY_LEN, SIGNATURE_LEN, sha256
from .errors import MalformedDid

DID_PREFIX = "did:dnb:"
DEFAULT_NETWORK = "dnb-local"

AUTH_DOMAIN = b"dnb-auth"
MIN_CHALLENGE_BYTES = 16


def did_from_public(public: bytes) -> str:
    digest = sha256(public)
    encoded = base64.b32encode(digest).decode("ascii").lower().rstrip("=")
    return DID_PREFIX + encoded


def parse_did(did: str) -> bytes:
    """Return the 32-byte key digest a DID commits to."""
    if not isinstance(did, str) or not did.startswith(DID_PREFIX):
        raise MalformedDid(f"{did!r} does not start with {DID_PREFIX}")
    body = did[len(DID_PREFIX):]
    try:
        digest = base64.b32decode(body.upper() + "=" * (-len(body) % 8))
    except Exception as exc:
        raise MalformedDid(f"invalid base32 body: {exc}") from exc
    if len(digest) != 32 or did_from_public_digest(digest) != did:
        raise MalformedDid("body does not decode to a canonical 32-byte digest")
    return digest


def did_from_public_digest(digest: bytes) -> str:
    return DID_PREFIX + base64.b32encode(digest).decode("ascii").lower().rstrip("=")


@dataclass(frozen=True)
class Wallet:
    name: str
    secret: bytes
    public: bytes
    address: bytes
    did: str
    network_name: str = DEFAULT_NETWORK

    @classmethod
    def create(
        cls, name: str, seed: int | None = None, network_name: str = DEFAULT_NETWORK
    ) -> "Wallet":
        secret, public = crypto.generate_keypair(seed)
        return cls(
            name=name,
            secret=secret,
            public=public,
            address=crypto.derive_address(public),
            did=did_from_public(public),
            network_name=network_name,
        )

    def sign(self, message: bytes) -> bytes:
        return crypto.sign(self.secret, message)

    def sign_challenge(self, challenge: bytes) -> bytes:
        """Authentication response: public key followed by the signature
        over the domain-separated challenge digest."""
        digest = sha256(AUTH_DOMAIN + challenge)
        return self.public + crypto.sign(self.secret, digest)


def new_wallet(
    name: str, rng_seed: int | None = None, network_name: str = DEFAULT_NETWORK
) -> Wallet:
    return Wallet.create(name, rng_seed, network_name)


@dataclass(frozen=True)
class WalletInfo:
    address: str
    balance: int
    network_name: str


def wallet_info(wallet: Wallet, chain: Chain) -> WalletInfo:
    """Address, current balance from chain state, and network name."""
    return WalletInfo(
        address=wallet.address.hex(),
        balance=chain.state.balance(wallet.address),
        network_name=wallet.network_name,
    )


def authenticate(did: str, challenge: bytes, response: bytes) -> bool:
    """True iff `response` (public key || signature) proves control of `did`.

    The signature must cover SHA-256(domain || challenge), so a signed
    challenge can never double as a transaction and never transfers to a
    different challenge.
    """
    digest = parse_did(did)
    if len(challenge) < MIN_CHALLENGE_BYTES:
        raise ValueError(f"challenge must be at least {MIN_CHALLENGE_BYTES} bytes")
    if len(response) != PUBLIC_KEY_LEN + SIGNATURE_LEN:
        return False
    public, signature = response[:PUBLIC_KEY_LEN], response[PUBLIC_KEY_LEN:]
    if sha256(public) != digest:
        return False
    return crypto.verify(public, sha256(AUTH_DOMAIN + challenge), signature)


def save_wallet(wallet: Wallet, path: str | Path) -> Path:
    """Write the wallet file (owner-only permissions where supported)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "name": wallet.name,
        "public": wallet.public.hex(),
        "secret": wallet.secret.hex(),
        "did": wallet.did,
        "network_name": wallet.network_name,
    }
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def load_wallet(path: str | Path) -> Wallet:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    secret = bytes.fromhex(doc["secret"])
    public = bytes.fromhex(doc["public"])
    if crypto.public_from_secret(secret) != public:
        raise ValueError(f"{path}: public key does not match secret")
    wallet = Wallet(
        name=doc["name"],
        secret=secret,
        public=public,
        address=crypto.derive_address(public),
        did=did_from_public(public),
        network_name=doc["network_name"],
    )
    if wallet.did != doc["did"]:
        raise ValueError(f"{path}: stored DID does not match key")
    return wallet
