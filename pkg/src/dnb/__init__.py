"""dnb: a deterministic donation-tracking blockchain.

Signed, hash-linked ledger running campaign-escrow and donation-tracking
state machines, with content-addressed media storage, DID wallets, and a
seeded virtual-time network simulator.
"""

from .blocks import Block, make_genesis
from .chain import (
    Chain,
    ValidationReport,
    apply_transaction,
    build_block,
    load_chain,
    save_chain,
    validate_chain,
)
from .content_store import BlobStore, Cid, share_link
from .contracts import (
    DonationEventState,
    DonationRecord,
    EventStatus,
    TrackingLedger,
    get_donation_events,
    get_donation_history,
    get_donors,
)
from .identity import Wallet, authenticate, new_wallet, wallet_info
from .merkle import merkle_root
from .simnet import (
    SimConfig,
    SimMetrics,
    calibrate,
    run_simulation,
    sweep,
)
from .transactions import (
    Transaction,
    TxKind,
    canonical_encode,
    sign_transaction,
    verify_transaction,
)

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlobStore",
    "Chain",
    "Cid",
    "DonationEventState",
    "DonationRecord",
    "EventStatus",
    "SimConfig",
    "SimMetrics",
    "TrackingLedger",
    "Transaction",
    "TxKind",
    "ValidationReport",
    "Wallet",
    "apply_transaction",
    "authenticate",
    "build_block",
    "calibrate",
    "canonical_encode",
    "get_donation_events",
    "get_donation_history",
    "get_donors",
    "load_chain",
    "make_genesis",
    "merkle_root",
    "new_wallet",
    "run_simulation",
    "save_chain",
    "share_link",
    "sign_transaction",
    "sweep",
    "validate_chain",
    "verify_transaction",
    "wallet_info",
]
