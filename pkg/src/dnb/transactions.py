"""Transactions: payload types, canonical byte encoding, signing, hashing.

The canonical encoding is the cross-implementation contract: every hash and
signature in the system is computed over these bytes, never over JSON.

Layout of the signing preimage:

    kind tag (1 byte: create_event=0x01, donate=0x02, refund=0x03)
    sender_pk (raw, fixed length per the genesis scheme; empty for system txs)
    nonce (8-byte big-endian)
    fee (16-byte big-endian)
    payload fields in declared order

where text and byte fields carry a 4-byte big-endian length prefix and
fixed-width fields (Hash32, Address, Timestamp, Amount) are raw big-endian.

The transaction hash is SHA-256(preimage || signature).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import crypto
from .content_store import Cid
from .errors import AmountOverflow, EncodingOverflow
from .crypto import ADDRESS_LEN, HASH_LEN, sha256

UNITS_PER_TOKEN = 10**18
AMOUNT_MAX = 2**128 - 1
TIMESTAMP_MAX = 2**64 - 1
NONCE_MAX = 2**64 - 1
LEN_MAX = 2**32 - 1

MAX_TITLE_BYTES = 256
MAX_DESCRIPTION_BYTES = 64 * 1024


class TxKind(enum.Enum):
    CREATE_EVENT = "create_event"
    DONATE = "donate"
    REFUND = "refund"


KIND_TAGS = {TxKind.CREATE_EVENT: 0x01, TxKind.DONATE: 0x02, TxKind.REFUND: 0x03}


def ensure_amount(value: int, what: str = "amount") -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise AmountOverflow(f"{what} must be an integer")
    if not 0 <= value <= AMOUNT_MAX:
        raise AmountOverflow(f"{what} {value} outside unsigned 128-bit range")
    return value


def add_amounts(a: int, b: int, what: str = "amount") -> int:
    """Checked addition; overflow is an error, never a wrap."""
    total = a + b
    if total > AMOUNT_MAX:
        raise AmountOverflow(f"{what} sum overflows unsigned 128-bit range")
    return total


def ensure_timestamp(value: int, what: str = "timestamp") -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValueError(f"{what} must be an integer")
    if not 0 <= value <= TIMESTAMP_MAX:
        raise ValueError(f"{what} {value} outside unsigned 64-bit range")
    return value


@dataclass(frozen=True)
class CreateEventPayload:
    owner: bytes
    owner_name: str
    title: str
    description: str
    target: int
    deadline: int
    image: Cid


@dataclass(frozen=True)
class DonatePayload:
    event_id: bytes
    amount: int


@dataclass(frozen=True)
class RefundPayload:
    event_id: bytes
    recipient: bytes
    amount: int


Payload = CreateEventPayload | DonatePayload | RefundPayload

PAYLOAD_KINDS = {
    TxKind.CREATE_EVENT: CreateEventPayload,
    TxKind.DONATE: DonatePayload,
    TxKind.REFUND: RefundPayload,
}


def _var(data: bytes) -> bytes:
    if len(data) > LEN_MAX:
        raise EncodingOverflow(f"field of {len(data)} bytes exceeds length prefix")
    return len(data).to_bytes(4, "big") + data


def _text(s: str) -> bytes:
    return _var(s.encode("utf-8"))


def _amount(v: int) -> bytes:
    return ensure_amount(v).to_bytes(16, "big")


def _u64(v: int, what: str) -> bytes:
    if not 0 <= v <= NONCE_MAX:
        raise ValueError(f"{what} outside unsigned 64-bit range")
    return v.to_bytes(8, "big")


def _fixed(data: bytes, size: int, what: str) -> bytes:
    if len(data) != size:
        raise ValueError(f"{what} must be {size} bytes, got {len(data)}")
    return data


def encode_payload(payload: Payload) -> bytes:
    if isinstance(payload, CreateEventPayload):
        return b"".join(
            (
                _fixed(payload.owner, ADDRESS_LEN, "owner"),
                _text(payload.owner_name),
                _text(payload.title),
                _text(payload.description),
                _amount(payload.target),
                _u64(ensure_timestamp(payload.deadline, "deadline"), "deadline"),
                _var(payload.image.to_bytes()),
            )
        )
    if isinstance(payload, DonatePayload):
        return _fixed(payload.event_id, HASH_LEN, "event_id") + _amount(payload.amount)
    if isinstance(payload, RefundPayload):
        return (
            _fixed(payload.event_id, HASH_LEN, "event_id")
            + _fixed(payload.recipient, ADDRESS_LEN, "recipient")
            + _amount(payload.amount)
        )
    raise TypeError(f"unknown payload type {type(payload)!r}")


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    sender_pk: bytes
    nonce: int
    fee: int
    payload: Payload
    signature: bytes = b""
    tx_hash: bytes = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.payload, PAYLOAD_KINDS[self.kind]):
            raise TypeError(f"{self.kind.value} payload mismatch")
        preimage = canonical_encode(self)
        object.__setattr__(self, "tx_hash", sha256(preimage + self.signature))

    @property
    def sender_address(self) -> bytes:
        return crypto.derive_address(self.sender_pk)

    def with_signature(self, signature: bytes) -> "Transaction":
        return Transaction(
            kind=self.kind,
            sender_pk=self.sender_pk,
            nonce=self.nonce,
            fee=self.fee,
            payload=self.payload,
            signature=signature,
        )


def canonical_encode(tx: Transaction) -> bytes:
    """Signature-free preimage of a transaction."""
    return b"".join(
        (
            bytes([KIND_TAGS[tx.kind]]),
            tx.sender_pk,
            _u64(tx.nonce, "nonce"),
            _amount(tx.fee),
            encode_payload(tx.payload),
        )
    )


def sign_transaction(tx: Transaction, secret: bytes) -> Transaction:
    """Attach an ed25519 signature over the canonical preimage."""
    return tx.with_signature(crypto.sign(secret, canonical_encode(tx)))


def verify_transaction(tx: Transaction) -> bool:
    """True iff the signature is valid for the sender key.

    System refunds carry no key and no signature; anything else must verify
    under the sender's public key. Mismatches return False, never raise.
    """
    if tx.kind is TxKind.REFUND:
        return tx.sender_pk == b"" and tx.signature == b""
    try:
        preimage = canonical_encode(tx)
    except Exception:
        return False
    return crypto.verify(tx.sender_pk, preimage, tx.signature)


def make_refund(event_id: bytes, recipient: bytes, amount: int) -> Transaction:
    """System-emitted refund; fee-free, keyless, deterministic."""
    return Transaction(
        kind=TxKind.REFUND,
        sender_pk=b"",
        nonce=0,
        fee=0,
        payload=RefundPayload(event_id=event_id, recipient=recipient, amount=amount),
    )
