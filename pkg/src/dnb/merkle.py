"""Merkle commitment over an ordered list of transaction hashes.

Rules: empty list commits to 32 zero bytes; a single leaf is its own root;
otherwise adjacent nodes are paired (the last duplicated when a level is
odd) and hashed SHA-256(left || right) up to a single root.
"""

from __future__ import annotations

from typing import Sequence

from .crypto import HASH_LEN, ZERO_HASH, sha256


def merkle_root(tx_hashes: Sequence[bytes]) -> bytes:
    for h in tx_hashes:
        if len(h) != HASH_LEN:
            raise ValueError(f"leaf must be {HASH_LEN} bytes")
    if not tx_hashes:
        return ZERO_HASH
    level = list(tx_hashes)
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]
