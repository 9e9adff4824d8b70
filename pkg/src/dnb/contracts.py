"""Campaign escrow and donation-tracking state machines.

Two cooperating pieces of contract state live in the world state:

* one escrow record per campaign, holding the donated pool until the
  deadline decides success (payout to the owner) or failure (refunds);
* a single append-only tracking ledger of every donation, indexed per
  donor and per campaign.

Status transitions are one-way: ACTIVE -> SUCCEEDED, or
ACTIVE -> FAILED -> REFUNDED. Donations are accepted only while ACTIVE and
strictly before the deadline; finalization happens at the first block whose
timestamp reaches the deadline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .content_store import Cid
from .errors import (
    AlreadyFinal,
    BadRefund,
    DeadlineInPast,
    DeadlineNotReached,
    DeadlinePassed,
    DescriptionTooLarge,
    DuplicateEventId,
    EventNotActive,
    TitleInvalid,
    UnknownEvent,
    ZeroAmount,
    ZeroTarget,
)
from .transactions import (
    MAX_DESCRIPTION_BYTES,
    MAX_TITLE_BYTES,
    CreateEventPayload,
    add_amounts,
)


class EventStatus(enum.Enum):
    ACTIVE = "active"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    REFUNDED = "refunded"


@dataclass
class DonationEventState:
    event_id: bytes
    owner: bytes
    owner_name: str
    title: str
    description: str
    target: int
    deadline: int
    image: Cid
    pool: int = 0
    total_donated: int = 0
    donors: list[bytes] = field(default_factory=list)  # first-donation order
    donor_totals: dict[bytes, int] = field(default_factory=dict)
    status: EventStatus = EventStatus.ACTIVE
    # set when the event FAILS; drained by refund transactions
    pending_refunds: dict[bytes, int] = field(default_factory=dict)

    def clone(self) -> "DonationEventState":
        return DonationEventState(
            event_id=self.event_id,
            owner=self.owner,
            owner_name=self.owner_name,
            title=self.title,
            description=self.description,
            target=self.target,
            deadline=self.deadline,
            image=self.image,
            pool=self.pool,
            total_donated=self.total_donated,
            donors=list(self.donors),
            donor_totals=dict(self.donor_totals),
            status=self.status,
            pending_refunds=dict(self.pending_refunds),
        )


@dataclass(frozen=True)
class DonationRecord:
    event_id: bytes
    donor: bytes
    amount: int
    timestamp: int
    tx_hash: bytes


@dataclass
class TrackingLedger:
    records: list[DonationRecord] = field(default_factory=list)
    by_donor: dict[bytes, list[int]] = field(default_factory=dict)
    by_event: dict[bytes, list[int]] = field(default_factory=dict)

    def append(self, record: DonationRecord) -> None:
        pos = len(self.records)
        self.records.append(record)
        self.by_donor.setdefault(record.donor, []).append(pos)
        self.by_event.setdefault(record.event_id, []).append(pos)

    def clone(self) -> "TrackingLedger":
        return TrackingLedger(
            records=list(self.records),
            by_donor={k: list(v) for k, v in self.by_donor.items()},
            by_event={k: list(v) for k, v in self.by_event.items()},
        )


@dataclass
class ContractState:
    # insertion order is creation (chain) order
    events: dict[bytes, DonationEventState] = field(default_factory=dict)
    tracking: TrackingLedger = field(default_factory=TrackingLedger)

    def clone(self) -> "ContractState":
        return ContractState(
            events={k: v.clone() for k, v in self.events.items()},
            tracking=self.tracking.clone(),
        )

    def require_event(self, event_id: bytes) -> DonationEventState:
        event = self.events.get(event_id)
        if event is None:
            raise UnknownEvent(event_id.hex())
        return event


def create_donation_event(
    state: ContractState, event_id: bytes, payload: CreateEventPayload, now: int
) -> DonationEventState:
    """Open a new campaign; the event id is the creating transaction's hash."""
    if payload.target <= 0:
        raise ZeroTarget("target must be positive")
    if payload.deadline <= now:
        raise DeadlineInPast(f"deadline {payload.deadline} <= now {now}")
    title_bytes = payload.title.encode("utf-8")
    if not title_bytes or len(title_bytes) > MAX_TITLE_BYTES:
        raise TitleInvalid(f"title must be 1..{MAX_TITLE_BYTES} UTF-8 bytes")
    if len(payload.description.encode("utf-8")) > MAX_DESCRIPTION_BYTES:
        raise DescriptionTooLarge(f"description exceeds {MAX_DESCRIPTION_BYTES} bytes")
    if event_id in state.events:
        raise DuplicateEventId(event_id.hex())
    event = DonationEventState(
        event_id=event_id,
        owner=payload.owner,
        owner_name=payload.owner_name,
        title=payload.title,
        description=payload.description,
        target=payload.target,
        deadline=payload.deadline,
        image=payload.image,
    )
    state.events[event_id] = event
    return event


def donate_to_event(
    state: ContractState,
    event_id: bytes,
    donor: bytes,
    amount: int,
    now: int,
    tx_hash: bytes,
) -> DonationRecord:
    """Move `amount` into the campaign pool and record it in the tracking ledger.

    The caller (the ledger's transition function) has already debited the
    donor's balance; this layer owns the escrow and tracking bookkeeping.
    """
    event = state.require_event(event_id)
    if event.status is not EventStatus.ACTIVE:
        raise EventNotActive(f"{event_id.hex()} is {event.status.value}")
    if now >= event.deadline:
        raise DeadlinePassed(f"block time {now} >= deadline {event.deadline}")
    if amount <= 0:
        raise ZeroAmount("donation amount must be positive")
    event.pool = add_amounts(event.pool, amount, "pool")
    event.total_donated = add_amounts(event.total_donated, amount, "total_donated")
    if donor not in event.donor_totals:
        event.donors.append(donor)
        event.donor_totals[donor] = 0
    event.donor_totals[donor] = add_amounts(event.donor_totals[donor], amount)
    record = DonationRecord(
        event_id=event_id, donor=donor, amount=amount, timestamp=now, tx_hash=tx_hash
    )
    state.tracking.append(record)
    return record


def finalize_event(
    state: ContractState, balances: dict[bytes, int], event_id: bytes, now: int
) -> list[tuple[bytes, int]]:
    """Settle a campaign whose deadline has arrived.

    On success the pool is credited to the owner. On failure each donor is
    owed their total contribution back; the owed list is returned in
    first-donation order and must be drained by refund transactions within
    the same block. Fees are never refunded.
    """
    event = state.require_event(event_id)
    if event.status is not EventStatus.ACTIVE:
        raise AlreadyFinal(f"{event_id.hex()} is {event.status.value}")
    if now < event.deadline:
        raise DeadlineNotReached(f"block time {now} < deadline {event.deadline}")
    if event.total_donated >= event.target:
        payout = event.pool
        event.pool = 0
        event.status = EventStatus.SUCCEEDED
        balances[event.owner] = add_amounts(balances.get(event.owner, 0), payout)
        return []
    event.status = EventStatus.FAILED
    owed = [(donor, event.donor_totals[donor]) for donor in event.donors]
    event.pending_refunds = dict(owed)
    if not owed:
        # nothing to repay: the failed campaign settles immediately
        event.status = EventStatus.REFUNDED
    return owed


def apply_refund(
    state: ContractState, event_id: bytes, recipient: bytes, amount: int
) -> None:
    """Consume one owed refund; flips FAILED -> REFUNDED once drained."""
    event = state.require_event(event_id)
    if event.status is not EventStatus.FAILED:
        raise BadRefund(f"{event_id.hex()} is {event.status.value}, not failed")
    owed = event.pending_refunds.get(recipient)
    if owed is None or owed != amount:
        raise BadRefund(
            f"no refund of {amount} owed to {recipient.hex()} for {event_id.hex()}"
        )
    del event.pending_refunds[recipient]
    event.pool -= amount
    if not event.pending_refunds:
        if event.pool != 0:
            raise BadRefund(f"{event_id.hex()} pool nonzero after last refund")
        event.status = EventStatus.REFUNDED


def due_events(state: ContractState, now: int) -> list[bytes]:
    """Active events whose deadline has arrived, in creation order."""
    return [
        event_id
        for event_id, event in state.events.items()
        if event.status is EventStatus.ACTIVE and now >= event.deadline
    ]


def get_donors(state: ContractState, event_id: bytes) -> list[tuple[bytes, int]]:
    """Per-donor totals in first-donation order; read-only."""
    event = state.require_event(event_id)
    return [(donor, event.donor_totals[donor]) for donor in event.donors]


def get_donation_events(state: ContractState) -> list[DonationEventState]:
    """All events in creation order, including finalized ones; read-only."""
    return list(state.events.values())


def get_donation_history(state: ContractState, donor: bytes) -> list[DonationRecord]:
    """A donor's records across all events in chain order; read-only."""
    return [state.tracking.records[i] for i in state.tracking.by_donor.get(donor, [])]
