"""World state: balances, per-sender nonces, and contract state.

State is derived purely by folding transactions over the genesis
allocation; two replays of the same blocks yield byte-identical snapshots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .contracts import ContractState
from .crypto import sha256


@dataclass
class WorldState:
    balances: dict[bytes, int] = field(default_factory=dict)
    nonces: dict[bytes, int] = field(default_factory=dict)
    contracts: ContractState = field(default_factory=ContractState)

    def clone(self) -> "WorldState":
        return WorldState(
            balances=dict(self.balances),
            nonces=dict(self.nonces),
            contracts=self.contracts.clone(),
        )

    def balance(self, address: bytes) -> int:
        return self.balances.get(address, 0)

    def snapshot_bytes(self) -> bytes:
        """Canonical JSON rendering of the full state."""
        events = []
        for event in self.contracts.events.values():
            events.append(
                {
                    "event_id": event.event_id.hex(),
                    "owner": event.owner.hex(),
                    "owner_name": event.owner_name,
                    "title": event.title,
                    "description": event.description,
                    "target": str(event.target),
                    "deadline": event.deadline,
                    "image": event.image.text(),
                    "pool": str(event.pool),
                    "total_donated": str(event.total_donated),
                    "donors": [d.hex() for d in event.donors],
                    "donor_totals": [
                        [d.hex(), str(event.donor_totals[d])] for d in event.donors
                    ],
                    "status": event.status.value,
                    "pending_refunds": [
                        [a.hex(), str(v)] for a, v in event.pending_refunds.items()
                    ],
                }
            )
        records = [
            {
                "event_id": r.event_id.hex(),
                "donor": r.donor.hex(),
                "amount": str(r.amount),
                "timestamp": r.timestamp,
                "tx_hash": r.tx_hash.hex(),
            }
            for r in self.contracts.tracking.records
        ]
        doc = {
            "balances": {
                a.hex(): str(v) for a, v in sorted(self.balances.items()) if v
            },
            "nonces": {a.hex(): v for a, v in sorted(self.nonces.items())},
            "events": events,
            "tracking": records,
        }
        return json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def snapshot_hash(self) -> bytes:
        return sha256(self.snapshot_bytes())
