"""The hash-linked ledger: state transitions, block building, validation,
and JSONL persistence.

A chain is single-writer: blocks are built against the current state, every
transaction is verified and applied in order, and campaigns whose deadline
has arrived are settled automatically at the start of the first block whose
timestamp reaches it (system refund transactions are emitted inside that
block). Replaying the stored blocks from genesis reproduces the state
byte-for-byte; any single-byte mutation of the stored form is detectable.

Chain file format: one JSON object per line with fields in canonical order
(height, prev_hash, merkle_root, timestamp, txs, and for genesis scheme and
allocations, then block_hash). Hashes and keys are lowercase hex, amounts
decimal strings. All content hashing is over the canonical binary encoding,
never over this JSON.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import contracts
from .blocks import Allocation, Block, make_genesis
from .content_store import Cid
from .crypto import ADDRESS_LEN, FEE_SINK, HASH_LEN, SCHEME_ID, ZERO_HASH
from .errors import (
    BadNonce,
    BadSignature,
    CorruptChain,
    DnbError,
    EmptyStore,
    InsufficientBalance,
    InvalidTransaction,
    MissingRefunds,
    NonMonotoneTimestamp,
)
from .merkle import merkle_root
from .state import WorldState
from .transactions import (
    AMOUNT_MAX,
    CreateEventPayload,
    DonatePayload,
    RefundPayload,
    Transaction,
    TxKind,
    add_amounts,
    make_refund,
    verify_transaction,
)

CHAIN_FILE = "chain.jsonl"


# ---------------------------------------------------------------------------
# state transition


def apply_transaction(state: WorldState, tx: Transaction, block_timestamp: int) -> None:
    """Apply one verified transaction to the state, atomically.

    Checks run in the order signature, nonce, balance, then contract
    preconditions; nothing is mutated until all checks for the transaction
    kind have passed.
    """
    if not verify_transaction(tx):
        raise BadSignature(tx.tx_hash.hex())

    if tx.kind is TxKind.REFUND:
        payload: RefundPayload = tx.payload
        contracts.apply_refund(
            state.contracts, payload.event_id, payload.recipient, payload.amount
        )
        state.balances[payload.recipient] = add_amounts(
            state.balances.get(payload.recipient, 0), payload.amount
        )
        return

    sender = tx.sender_address
    if tx.nonce != state.nonces.get(sender, 0):
        raise BadNonce(
            f"expected {state.nonces.get(sender, 0)}, got {tx.nonce} for {sender.hex()}"
        )
    required = tx.fee
    if tx.kind is TxKind.DONATE:
        required = add_amounts(required, tx.payload.amount, "fee plus donation")
    if state.balance(sender) < required:
        raise InsufficientBalance(
            f"{sender.hex()} has {state.balance(sender)}, needs {required}"
        )

    if tx.kind is TxKind.CREATE_EVENT:
        contracts.create_donation_event(
            state.contracts, tx.tx_hash, tx.payload, block_timestamp
        )
    else:
        contracts.donate_to_event(
            state.contracts,
            tx.payload.event_id,
            sender,
            tx.payload.amount,
            block_timestamp,
            tx.tx_hash,
        )

    state.balances[sender] -= required
    state.balances[FEE_SINK] = add_amounts(state.balances.get(FEE_SINK, 0), tx.fee)
    state.nonces[sender] = tx.nonce + 1


def run_finalizations(state: WorldState, timestamp: int) -> list[Transaction]:
    """Settle every campaign whose deadline `timestamp` has reached.

    Mutates the state (success payouts, refund scheduling) and returns the
    system refund transactions that the enclosing block must carry.
    """
    refunds: list[Transaction] = []
    for event_id in contracts.due_events(state.contracts, timestamp):
        owed = contracts.finalize_event(
            state.contracts, state.balances, event_id, timestamp
        )
        refunds.extend(make_refund(event_id, donor, amount) for donor, amount in owed)
    return refunds


def apply_block(state: WorldState, block: Block) -> None:
    """Replay one block: finalization pass, then its transactions in order.

    A finalizing block must drain every refund it scheduled; anything left
    owed at the end makes the block invalid.
    """
    run_finalizations(state, block.timestamp)
    for index, tx in enumerate(block.transactions):
        try:
            apply_transaction(state, tx, block.timestamp)
        except InvalidTransaction:
            raise
        except DnbError as exc:
            raise InvalidTransaction(index, exc) from exc
    for event in state.contracts.events.values():
        if event.status is contracts.EventStatus.FAILED:
            raise MissingRefunds(event.event_id.hex())


def state_from_genesis(genesis: Block) -> WorldState:
    state = WorldState()
    for address, amount in genesis.allocations or ():
        state.balances[address] = amount
    return state


# ---------------------------------------------------------------------------
# the chain


class Chain:
    """Ordered blocks plus the state derived from replaying them."""

    def __init__(self, blocks: list[Block], state: WorldState):
        self.blocks = blocks
        self.state = state

    @classmethod
    def genesis(
        cls, allocations: list[Allocation], timestamp: int = 0, scheme: str = SCHEME_ID
    ) -> "Chain":
        block = make_genesis(allocations, timestamp, scheme)
        return cls([block], state_from_genesis(block))

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.height

    def extend(self, pending: list[Transaction], timestamp: int) -> Block:
        """Build, apply, and append a block carrying `pending`."""
        block, state = _build(self, pending, timestamp)
        self.blocks.append(block)
        self.state = state
        return block


def _build(
    chain: Chain, pending: list[Transaction], timestamp: int
) -> tuple[Block, WorldState]:
    tip = chain.tip
    if timestamp < tip.timestamp:
        raise NonMonotoneTimestamp(f"block time {timestamp} < tip {tip.timestamp}")
    state = chain.state.clone()
    refunds = run_finalizations(state, timestamp)
    for refund in refunds:
        apply_transaction(state, refund, timestamp)
    for index, tx in enumerate(pending):
        try:
            apply_transaction(state, tx, timestamp)
        except DnbError as exc:
            raise InvalidTransaction(index, exc) from exc
    txs = tuple(refunds) + tuple(pending)
    block = Block(
        height=tip.height + 1,
        prev_hash=tip.block_hash,
        merkle_root=merkle_root([tx.tx_hash for tx in txs]),
        timestamp=timestamp,
        transactions=txs,
    )
    return block, state


def build_block(chain: Chain, pending: list[Transaction], timestamp: int) -> Block:
    """Build (without appending) the next block; pending txs must all apply."""
    return _build(chain, pending, timestamp)[0]


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Failure:
    height: int
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failures: tuple[Failure, ...] = ()

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "failures": [
                {"height": f.height, "kind": f.kind, "detail": f.detail}
                for f in self.failures
            ],
        }


def _validate(blocks: list[Block]) -> tuple[ValidationReport, WorldState | None]:
    def fail(height: int, kind: str, detail: str):
        return ValidationReport(False, (Failure(height, kind, detail),)), None

    if not blocks:
        return fail(0, "EmptyChain", "no blocks")
    genesis = blocks[0]
    if genesis.height != 0:
        return fail(0, "BadHeight", f"genesis height {genesis.height}")
    if genesis.prev_hash != ZERO_HASH:
        return fail(0, "PrevHashMismatch", "genesis prev_hash not zero")
    if genesis.transactions:
        return fail(0, "BadGenesis", "genesis carries transactions")
    if genesis.scheme != SCHEME_ID:
        return fail(0, "BadGenesis", f"unknown scheme {genesis.scheme!r}")
    try:
        expected = make_genesis(
            list(genesis.allocations or ()), genesis.timestamp, genesis.scheme
        )
    except (ValueError, DnbError) as exc:
        return fail(0, "BadGenesis", str(exc))
    if expected.block_hash != genesis.block_hash:
        return fail(0, "BlockHashMismatch", "genesis hash disagrees")

    state = state_from_genesis(genesis)
    for i, block in enumerate(blocks[1:], start=1):
        if block.height != i:
            return fail(i, "BadHeight", f"stored height {block.height} at index {i}")
        if block.scheme is not None or block.allocations is not None:
            return fail(i, "BadGenesis", "genesis fields on non-genesis block")
        if block.prev_hash != blocks[i - 1].block_hash:
            return fail(i, "PrevHashMismatch", "broken link to parent")
        if block.timestamp < blocks[i - 1].timestamp:
            return fail(
                i,
                "NonMonotoneTimestamp",
                f"{block.timestamp} < {blocks[i - 1].timestamp}",
            )
        recomputed = merkle_root([tx.tx_hash for tx in block.transactions])
        if recomputed != block.merkle_root:
            return fail(i, "MerkleMismatch", "merkle root disagrees with transactions")
        try:
            apply_block(state, block)
        except DnbError as exc:
            return fail(i, exc.kind, str(exc))
    return ValidationReport(True), state


def validate_chain(chain: Chain) -> ValidationReport:
    """OK iff hash links, Merkle roots, signatures, nonces, and replayed
    state all check; otherwise names the first failing height."""
    return _validate(chain.blocks)[0]


# ---------------------------------------------------------------------------
# persistence


def _hex(s, length: int, what: str, height: int) -> bytes:
    if not isinstance(s, str) or s != s.lower():
        raise CorruptChain(height, f"{what}: not lowercase hex")
    try:
        raw = bytes.fromhex(s)
    except ValueError:
        raise CorruptChain(height, f"{what}: invalid hex") from None
    if len(raw) != length:
        raise CorruptChain(height, f"{what}: expected {length} bytes")
    return raw


def _hex_any(s, what: str, height: int) -> bytes:
    if not isinstance(s, str) or s != s.lower():
        raise CorruptChain(height, f"{what}: not lowercase hex")
    try:
        return bytes.fromhex(s)
    except ValueError:
        raise CorruptChain(height, f"{what}: invalid hex") from None


def _dec(s, what: str, height: int) -> int:
    if not isinstance(s, str) or not s.isdigit() or str(int(s)) != s:
        raise CorruptChain(height, f"{what}: not a canonical decimal string")
    value = int(s)
    if value > AMOUNT_MAX:
        raise CorruptChain(height, f"{what}: exceeds 128-bit range")
    return value


def _int(v, what: str, height: int, bound: int = 2**64 - 1) -> int:
    if type(v) is not int or not 0 <= v <= bound:
        raise CorruptChain(height, f"{what}: not an in-range integer")
    return v


def _keys(d: dict, keys: tuple[str, ...], what: str, height: int) -> None:
    if not isinstance(d, dict) or tuple(d.keys()) != keys:
        raise CorruptChain(height, f"{what}: fields must be exactly {list(keys)}")


def tx_to_json(tx: Transaction) -> dict:
    if tx.kind is TxKind.CREATE_EVENT:
        p = tx.payload
        payload = {
            "owner": p.owner.hex(),
            "owner_name": p.owner_name,
            "title": p.title,
            "description": p.description,
            "target": str(p.target),
            "deadline": p.deadline,
            "image": p.image.text(),
        }
    elif tx.kind is TxKind.DONATE:
        payload = {"event_id": tx.payload.event_id.hex(), "amount": str(tx.payload.amount)}
    else:
        payload = {
            "event_id": tx.payload.event_id.hex(),
            "recipient": tx.payload.recipient.hex(),
            "amount": str(tx.payload.amount),
        }
    return {
        "kind": tx.kind.value,
        "sender_pk": tx.sender_pk.hex(),
        "nonce": tx.nonce,
        "fee": str(tx.fee),
        "payload": payload,
        "signature": tx.signature.hex(),
    }


def tx_from_json(doc, height: int) -> Transaction:
    _keys(doc, ("kind", "sender_pk", "nonce", "fee", "payload", "signature"), "tx", height)
    try:
        kind = TxKind(doc["kind"])
    except ValueError:
        raise CorruptChain(height, f"unknown tx kind {doc['kind']!r}") from None
    p = doc["payload"]
    if kind is TxKind.CREATE_EVENT:
        _keys(
            p,
            ("owner", "owner_name", "title", "description", "target", "deadline", "image"),
            "create_event payload",
            height,
        )
        if not isinstance(p["owner_name"], str) or not isinstance(p["title"], str) \
                or not isinstance(p["description"], str) or not isinstance(p["image"], str):
            raise CorruptChain(height, "create_event payload: bad field types")
        try:
            image = Cid.parse(p["image"])
        except DnbError as exc:
            raise CorruptChain(height, f"image: {exc}") from None
        payload = CreateEventPayload(
            owner=_hex(p["owner"], ADDRESS_LEN, "owner", height),
            owner_name=p["owner_name"],
            title=p["title"],
            description=p["description"],
            target=_dec(p["target"], "target", height),
            deadline=_int(p["deadline"], "deadline", height),
            image=image,
        )
    elif kind is TxKind.DONATE:
        _keys(p, ("event_id", "amount"), "donate payload", height)
        payload = DonatePayload(
            event_id=_hex(p["event_id"], HASH_LEN, "event_id", height),
            amount=_dec(p["amount"], "amount", height),
        )
    else:
        _keys(p, ("event_id", "recipient", "amount"), "refund payload", height)
        payload = RefundPayload(
            event_id=_hex(p["event_id"], HASH_LEN, "event_id", height),
            recipient=_hex(p["recipient"], ADDRESS_LEN, "recipient", height),
            amount=_dec(p["amount"], "amount", height),
        )
    return Transaction(
        kind=kind,
        sender_pk=_hex_any(doc["sender_pk"], "sender_pk", height),
        nonce=_int(doc["nonce"], "nonce", height),
        fee=_dec(doc["fee"], "fee", height),
        payload=payload,
        signature=_hex_any(doc["signature"], "signature", height),
    )


def block_to_record(block: Block) -> dict:
    record = {
        "height": block.height,
        "prev_hash": block.prev_hash.hex(),
        "merkle_root": block.merkle_root.hex(),
        "timestamp": block.timestamp,
        "txs": [tx_to_json(tx) for tx in block.transactions],
    }
    if block.is_genesis:
        record["scheme"] = block.scheme
        record["allocations"] = [[a.hex(), str(v)] for a, v in block.allocations or ()]
    record["block_hash"] = block.block_hash.hex()
    return record


def record_to_block(doc, height: int) -> Block:
    base = ("height", "prev_hash", "merkle_root", "timestamp", "txs")
    if not isinstance(doc, dict):
        raise CorruptChain(height, "record is not an object")
    if "scheme" in doc:
        _keys(doc, base + ("scheme", "allocations", "block_hash"), "block", height)
        if not isinstance(doc["scheme"], str):
            raise CorruptChain(height, "scheme: not a string")
        if not isinstance(doc["allocations"], list):
            raise CorruptChain(height, "allocations: not a list")
        allocations = []
        for entry in doc["allocations"]:
            if not isinstance(entry, list) or len(entry) != 2:
                raise CorruptChain(height, "allocations: entries must be [address, amount]")
            allocations.append(
                (_hex(entry[0], ADDRESS_LEN, "allocation address", height),
                 _dec(entry[1], "allocation amount", height))
            )
        scheme: str | None = doc["scheme"]
        allocs: tuple[Allocation, ...] | None = tuple(allocations)
    else:
        _keys(doc, base + ("block_hash",), "block", height)
        scheme, allocs = None, None
    if not isinstance(doc["txs"], list):
        raise CorruptChain(height, "txs: not a list")
    block = Block(
        height=_int(doc["height"], "height", height),
        prev_hash=_hex(doc["prev_hash"], HASH_LEN, "prev_hash", height),
        merkle_root=_hex(doc["merkle_root"], HASH_LEN, "merkle_root", height),
        timestamp=_int(doc["timestamp"], "timestamp", height),
        transactions=tuple(tx_from_json(t, height) for t in doc["txs"]),
        scheme=scheme,
        allocations=allocs,
    )
    stored = _hex(doc["block_hash"], HASH_LEN, "block_hash", height)
    if stored != block.block_hash:
        raise CorruptChain(height, "stored block_hash disagrees with recomputed header hash")
    return block


def chain_path(directory: str | Path) -> Path:
    return Path(directory) / CHAIN_FILE


def save_chain(chain: Chain, directory: str | Path) -> Path:
    """Write the chain file atomically; round trip is byte-identical."""
    path = chain_path(directory)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = "".join(
        json.dumps(block_to_record(b), separators=(",", ":"), ensure_ascii=False) + "\n"
        for b in chain.blocks
    ).encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".chain-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_blocks(directory: str | Path) -> list[Block]:
    """Parse the chain file; structural damage raises CorruptChain with the
    height (line index) where it was found."""
    path = chain_path(directory)
    if not path.is_file():
        raise EmptyStore(str(path))
    raw = path.read_bytes()
    if not raw:
        raise EmptyStore(f"{path} is empty")
    blocks = []
    for height, line in enumerate(raw.split(b"\n")[:-1] if raw.endswith(b"\n") else raw.split(b"\n")):
        try:
            doc = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptChain(height, f"unparseable record: {exc}") from None
        blocks.append(record_to_block(doc, height))
    return blocks


def load_chain(directory: str | Path) -> Chain:
    """Load, re-validate, and re-derive state; any failure is CorruptChain."""
    blocks = load_blocks(directory)
    report, state = _validate(blocks)
    if not report.ok:
        failure = report.failures[0]
        raise CorruptChain(failure.height, f"{failure.kind}: {failure.detail}")
    assert state is not None
    return Chain(blocks, state)
