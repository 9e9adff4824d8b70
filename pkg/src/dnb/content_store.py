"""Content-addressed blob storage and deterministic share links.

Blobs are stored one file per CID under a single directory; the directory
itself is the index. Writes land in a temporary file and are renamed into
place, so concurrent putters of the same bytes converge on one file.
"""

from __future__ import annotations

import base64
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .crypto import HASH_LEN, sha256
from .errors import BlobTooLarge, CorruptBlob, MalformedCid, NotFound, UnknownPlatform

RAW_CODEC = 0x00
CODEC_NAMES = {RAW_CODEC: "raw"}

DEFAULT_MAX_BLOB = 16 * 1024 * 1024

SHARE_PLATFORMS = ("twitter", "facebook", "whatsapp", "instagram")


def _b32(data: bytes) -> str:
    return base64.b32encode(data).decode("ascii").lower().rstrip("=")


def _unb32(text: str) -> bytes:
    padded = text.upper() + "=" * (-len(text) % 8)
    return base64.b32decode(padded)


@dataclass(frozen=True)
class Cid:
    """Self-describing content identifier: codec byte plus SHA-256 digest."""

    digest: bytes
    codec: int = RAW_CODEC

    def __post_init__(self):
        if len(self.digest) != HASH_LEN:
            raise MalformedCid(f"digest must be {HASH_LEN} bytes")
        if self.codec not in CODEC_NAMES:
            raise MalformedCid(f"unknown codec {self.codec}")

    def to_bytes(self) -> bytes:
        return bytes([self.codec]) + self.digest

    def text(self) -> str:
        return "b" + _b32(self.to_bytes())

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Cid":
        if len(raw) != 1 + HASH_LEN:
            raise MalformedCid(f"cid must be {1 + HASH_LEN} bytes, got {len(raw)}")
        return cls(digest=raw[1:], codec=raw[0])

    @classmethod
    def parse(cls, text: str) -> "Cid":
        if not text.startswith("b"):
            raise MalformedCid("cid text must start with multibase prefix 'b'")
        try:
            raw = _unb32(text[1:])
        except Exception as exc:
            raise MalformedCid(f"invalid base32: {exc}") from exc
        cid = cls.from_bytes(raw)
        if cid.text() != text:
            raise MalformedCid("non-canonical cid text")
        return cid

    @classmethod
    def of(cls, data: bytes) -> "Cid":
        return cls(digest=sha256(data))

    def __str__(self) -> str:
        return self.text()


class BlobStore:
    """Directory-backed store keyed by CID text; idempotent, deduplicating."""

    def __init__(self, root: str | Path, max_blob: int = DEFAULT_MAX_BLOB):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.max_blob = max_blob

    def _path(self, cid: Cid) -> Path:
        return self.root / cid.text()

    def put(self, data: bytes) -> Cid:
        if len(data) > self.max_blob:
            raise BlobTooLarge(f"{len(data)} bytes exceeds max_blob {self.max_blob}")
        cid = Cid.of(data)
        path = self._path(cid)
        if path.exists():
            return cid
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".put-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return cid

    def get(self, cid: Cid) -> bytes:
        path = self._path(cid)
        if not path.is_file():
            raise NotFound(cid.text())
        data = path.read_bytes()
        if sha256(data) != cid.digest:
            raise CorruptBlob(f"{cid.text()}: stored bytes do not match digest")
        return data

    def has(self, cid: Cid) -> bool:
        return self._path(cid).is_file()

    def size(self) -> int:
        """Number of blobs currently stored."""
        return sum(1 for p in self.root.iterdir() if not p.name.startswith("."))


def share_link(event_id: bytes, cid: Cid, platform: str) -> str:
    """Deterministic share URI; no network activity."""
    if platform not in SHARE_PLATFORMS:
        raise UnknownPlatform(platform)
    return f"dnb://share/{platform}/{cid.text()}?event={event_id.hex()}"
