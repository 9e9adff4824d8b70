"""Exception hierarchy.

Every domain failure is a subclass of :class:`DnbError`; the class name is
the error kind shown to CLI users (``error: <Kind>: <detail>``).
"""

from __future__ import annotations


class DnbError(Exception):
    """Base class for all domain errors."""

    @property
    def kind(self) -> str:
        return type(self).__name__


# ---------------------------------------------------------------------------
# ledger

class AmountOverflow(DnbError):
    """Arithmetic left the unsigned 128-bit amount range."""


class EncodingOverflow(DnbError):
    """A variable-length field exceeds the 4-byte length prefix."""


class BadSignature(DnbError):
    pass


class BadNonce(DnbError):
    pass


class InsufficientBalance(DnbError):
    pass


class InvalidTransaction(DnbError):
    """A pending transaction failed to apply during block building."""

    def __init__(self, index: int, cause: DnbError):
        super().__init__(f"transaction {index}: {cause.kind}: {cause}")
        self.index = index
        self.cause = cause


class NonMonotoneTimestamp(DnbError):
    pass


class MissingRefunds(DnbError):
    """A finalizing block ended with refunds still owed."""


class CorruptChain(DnbError):
    def __init__(self, height: int, cause: str):
        super().__init__(f"height {height}: {cause}")
        self.height = height
        self.cause = cause


class EmptyStore(DnbError):
    """No chain file exists at the given location."""


class StoreLocked(DnbError):
    """Another mutating process holds the data-directory lock."""


# ---------------------------------------------------------------------------
# contracts

class ZeroTarget(DnbError):
    pass


class DeadlineInPast(DnbError):
    pass


class TitleInvalid(DnbError):
    pass


class DescriptionTooLarge(DnbError):
    pass


class DuplicateEventId(DnbError):
    pass


class UnknownEvent(DnbError):
    pass


class EventNotActive(DnbError):
    pass


class DeadlinePassed(DnbError):
    pass


class DeadlineNotReached(DnbError):
    pass


class ZeroAmount(DnbError):
    pass


class AlreadyFinal(DnbError):
    pass


class BadRefund(DnbError):
    """A refund transaction does not match any owed refund."""


# ---------------------------------------------------------------------------
# identity

class MalformedDid(DnbError):
    pass


# ---------------------------------------------------------------------------
# content store

class BlobTooLarge(DnbError):
    pass


class NotFound(DnbError):
    pass


class CorruptBlob(DnbError):
    pass


class MalformedCid(DnbError):
    pass


class UnknownPlatform(DnbError):
    pass


# ---------------------------------------------------------------------------
# simnet

class InvalidSimConfig(DnbError):
    pass


class EmptySearchSpace(DnbError):
    pass
