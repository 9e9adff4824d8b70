"""Independent reference implementations used as test oracles.

Nothing here calls into the package's contract or chain logic; everything
is recomputed from raw data with plain dicts and hashlib, so agreement is
evidence rather than tautology.
"""

from __future__ import annotations

import copy
import hashlib


def merkle_reference(leaves: list[bytes]) -> bytes:
    """Recursive pairwise-hash commitment, written independently."""
    if not leaves:
        return b"\x00" * 32
    if len(leaves) == 1:
        return leaves[0]
    padded = list(leaves) + ([leaves[-1]] if len(leaves) % 2 else [])
    parents = [
        hashlib.sha256(padded[i] + padded[i + 1]).digest()
        for i in range(0, len(padded), 2)
    ]
    return merkle_reference(parents)


def address_of(public_key: bytes) -> bytes:
    return hashlib.sha256(public_key).digest()[-20:]


class LedgerOracle:
    """Brute-force debit/credit accounting over raw block data.

    Maintains its own balances, escrow pools, and campaign outcomes from
    nothing but genesis allocations and the transactions in each block.
    """

    SINK = b"\x00" * 20

    def __init__(self, allocations):
        self.balances: dict[bytes, int] = {}
        for address, amount in allocations:
            self.balances[address] = self.balances.get(address, 0) + amount
        self.initial_total = sum(self.balances.values())
        # event_id -> dict(owner, target, deadline, pool, donor_totals,
        #                  donor_order, status, owed)
        self.events: dict[bytes, dict] = {}

    def _credit(self, address: bytes, amount: int) -> None:
        self.balances[address] = self.balances.get(address, 0) + amount

    def _debit(self, address: bytes, amount: int) -> None:
        balance = self.balances.get(address, 0)
        assert balance >= amount, "oracle saw an overdraft"
        self.balances[address] = balance - amount

    def _finalize_due(self, timestamp: int) -> None:
        for event in self.events.values():
            if event["status"] != "active" or timestamp < event["deadline"]:
                continue
            total = sum(event["donor_totals"].values())
            if total >= event["target"]:
                self._credit(event["owner"], event["pool"])
                event["pool"] = 0
                event["status"] = "succeeded"
            else:
                event["owed"] = {
                    d: event["donor_totals"][d] for d in event["donor_order"]
                }
                event["status"] = "refunded" if not event["owed"] else "failed"

    def apply_block(self, block) -> None:
        self._finalize_due(block.timestamp)
        for tx in block.transactions:
            kind = tx.kind.value
            if kind == "create_event":
                sender = address_of(tx.sender_pk)
                self._debit(sender, tx.fee)
                self._credit(self.SINK, tx.fee)
                self.events[tx.tx_hash] = {
                    "owner": tx.payload.owner,
                    "target": tx.payload.target,
                    "deadline": tx.payload.deadline,
                    "pool": 0,
                    "donor_totals": {},
                    "donor_order": [],
                    "status": "active",
                    "owed": {},
                }
            elif kind == "donate":
                sender = address_of(tx.sender_pk)
                event = self.events[tx.payload.event_id]
                assert event["status"] == "active"
                assert block.timestamp < event["deadline"]
                self._debit(sender, tx.fee + tx.payload.amount)
                self._credit(self.SINK, tx.fee)
                event["pool"] += tx.payload.amount
                if tx.payload.donor_key(tx) not in event["donor_totals"] if False else sender not in event["donor_totals"]:
                    event["donor_order"].append(sender)
                    event["donor_totals"][sender] = 0
                event["donor_totals"][sender] += tx.payload.amount
            elif kind == "refund":
                event = self.events[tx.payload.event_id]
                owed = event["owed"].pop(tx.payload.recipient)
                assert owed == tx.payload.amount, "oracle disagrees on refund amount"
                event["pool"] -= tx.payload.amount
                self._credit(tx.payload.recipient, tx.payload.amount)
                if not event["owed"]:
                    assert event["pool"] == 0
                    event["status"] = "refunded"
            else:
                raise AssertionError(f"unknown kind {kind}")

    def total(self) -> int:
        return sum(self.balances.values()) + sum(
            e["pool"] for e in self.events.values()
        )

    def check_against(self, state) -> None:
        """Compare predicted balances and pools with a real world state."""
        real = {a: v for a, v in state.balances.items() if v}
        mine = {a: v for a, v in self.balances.items() if v}
        assert real == mine, "balances diverge from accounting oracle"
        real_pools = {
            eid: e.pool for eid, e in state.contracts.events.items() if e.pool
        }
        my_pools = {eid: e["pool"] for eid, e in self.events.items() if e["pool"]}
        assert real_pools == my_pools, "pools diverge from accounting oracle"


# ---------------------------------------------------------------------------
# operation-level reference interpreter for the contract state machines


class ReferenceInterpreter:
    """Minimal model of campaigns driven by (create, donate, finalize) ops.

    Each op stands for one block: time moves 1 s (finalize jumps to the
    deadline), overdue campaigns settle first, then the op applies. A failed
    op leaves the model untouched, mirroring a rejected block.
    """

    SINK = b"\x00" * 20
    STEP_MS = 1000

    def __init__(self, funding: dict[bytes, int], fee: int):
        self.balances = dict(funding)
        self.fee = fee
        self.now = 0
        self.events: list[dict] = []
        self.records: list[tuple[int, bytes, int, int]] = []  # idx, donor, amount, ts

    def _settle_due(self, state: dict, now: int) -> None:
        for event in state["events"]:
            if event["status"] != "active" or now < event["deadline"]:
                continue
            total = sum(event["donor_totals"].values())
            if total >= event["target"]:
                state["balances"][event["owner"]] = (
                    state["balances"].get(event["owner"], 0) + event["pool"]
                )
                event["pool"] = 0
                event["status"] = "succeeded"
            else:
                for donor in event["donor_order"]:
                    state["balances"][donor] = (
                        state["balances"].get(donor, 0) + event["donor_totals"][donor]
                    )
                event["pool"] = 0
                event["status"] = "refunded"

    def _snapshot(self) -> dict:
        return {
            "balances": dict(self.balances),
            "events": copy.deepcopy(self.events),
            "records": list(self.records),
        }

    def _commit(self, state: dict, now: int) -> None:
        self.balances = state["balances"]
        self.events = state["events"]
        self.records = state["records"]
        self.now = now

    def create(self, owner: bytes, target: int, deadline_offset_ms: int) -> str | None:
        now = self.now + self.STEP_MS
        state = self._snapshot()
        self._settle_due(state, now)
        if state["balances"].get(owner, 0) < self.fee:
            return "InsufficientBalance"
        state["balances"][owner] -= self.fee
        state["balances"][self.SINK] = state["balances"].get(self.SINK, 0) + self.fee
        state["events"].append(
            {
                "owner": owner,
                "target": target,
                "deadline": now + deadline_offset_ms,
                "pool": 0,
                "donor_totals": {},
                "donor_order": [],
                "status": "active",
            }
        )
        self._commit(state, now)
        return None

    def donate(self, donor: bytes, event_index: int, amount: int) -> str | None:
        now = self.now + self.STEP_MS
        state = self._snapshot()
        self._settle_due(state, now)
        if event_index >= len(state["events"]):
            return "UnknownEvent"
        event = state["events"][event_index]
        if event["status"] != "active":
            return "EventNotActive"
        if now >= event["deadline"]:
            return "DeadlinePassed"
        if amount <= 0:
            return "ZeroAmount"
        if state["balances"].get(donor, 0) < self.fee + amount:
            return "InsufficientBalance"
        state["balances"][donor] -= self.fee + amount
        state["balances"][self.SINK] = state["balances"].get(self.SINK, 0) + self.fee
        event["pool"] += amount
        if donor not in event["donor_totals"]:
            event["donor_order"].append(donor)
            event["donor_totals"][donor] = 0
        event["donor_totals"][donor] += amount
        state["records"].append((event_index, donor, amount, now))
        self._commit(state, now)
        return None

    def finalize(self, event_index: int) -> str | None:
        if event_index >= len(self.events):
            return "UnknownEvent"
        now = max(self.now + self.STEP_MS, self.events[event_index]["deadline"])
        state = self._snapshot()
        self._settle_due(state, now)
        self._commit(state, now)
        return None

    def view(self) -> tuple:
        """Comparable projection: statuses, pools, donor totals, records,
        balances."""
        events = tuple(
            (
                e["status"],
                e["pool"],
                sum(e["donor_totals"].values()),
                tuple((d, e["donor_totals"][d]) for d in e["donor_order"]),
            )
            for e in self.events
        )
        balances = tuple(
            sorted((a, v) for a, v in self.balances.items() if v)
        )
        return events, tuple(self.records), balances
