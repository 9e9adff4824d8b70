"""Blocks: hash-linked, Merkle-rooted transaction batches.

The header hash commits to height, parent, Merkle root and timestamp; the
genesis header additionally commits to the signature-scheme identifier and
the initial balance allocations, so no stored byte is outside some hash.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import ADDRESS_LEN, FEE_SINK, SCHEME_ID, ZERO_HASH, sha256
from .merkle import merkle_root
from .transactions import Transaction, ensure_amount, ensure_timestamp

GENESIS_HEIGHT = 0

# (address, amount) pairs minting the initial balances
Allocation = tuple[bytes, int]


def header_preimage(
    height: int,
    prev_hash: bytes,
    merkle: bytes,
    timestamp: int,
    scheme: str | None,
    allocations: tuple[Allocation, ...] | None,
) -> bytes:
    parts = [
        height.to_bytes(8, "big"),
        prev_hash,
        merkle,
        timestamp.to_bytes(8, "big"),
    ]
    if height == GENESIS_HEIGHT:
        scheme_bytes = (scheme or "").encode("utf-8")
        parts.append(len(scheme_bytes).to_bytes(4, "big"))
        parts.append(scheme_bytes)
        allocations = allocations or ()
        parts.append(len(allocations).to_bytes(4, "big"))
        for address, amount in allocations:
            parts.append(address)
            parts.append(amount.to_bytes(16, "big"))
    return b"".join(parts)


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    timestamp: int
    transactions: tuple[Transaction, ...]
    scheme: str | None = None
    allocations: tuple[Allocation, ...] | None = None
    block_hash: bytes = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        ensure_timestamp(self.timestamp)
        object.__setattr__(
            self,
            "block_hash",
            sha256(
                header_preimage(
                    self.height,
                    self.prev_hash,
                    self.merkle_root,
                    self.timestamp,
                    self.scheme,
                    self.allocations,
                )
            ),
        )

    @property
    def is_genesis(self) -> bool:
        return self.height == GENESIS_HEIGHT


def make_genesis(
    allocations: list[Allocation], timestamp: int = 0, scheme: str = SCHEME_ID
) -> Block:
    """Height-0 block minting initial balances under a named scheme."""
    seen: set[bytes] = set()
    total = 0
    for address, amount in allocations:
        if len(address) != ADDRESS_LEN:
            raise ValueError("allocation address must be 20 bytes")
        if address == FEE_SINK:
            raise ValueError("fee sink address cannot receive an allocation")
        if address in seen:
            raise ValueError(f"duplicate allocation for {address.hex()}")
        seen.add(address)
        ensure_amount(amount, "allocation")
        total += amount
    ensure_amount(total, "total allocation")
    return Block(
        height=GENESIS_HEIGHT,
        prev_hash=ZERO_HASH,
        merkle_root=merkle_root([]),
        timestamp=timestamp,
        transactions=(),
        scheme=scheme,
        allocations=tuple(allocations),
    )
