"""Operator command line: wallets, campaigns, donations, verification,
simulation.

Interactive mode appends one block per state-changing command (there is no
mempool); block timestamps are virtual and advance by --advance seconds per
action. Deadlines are given as +<seconds> relative to the current chain tip
timestamp. Read commands print JSON; exit codes are 0 on success, 1 on
domain errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import chain as chainmod
from . import simnet
from .blocks import Allocation
from .chain import Chain, load_blocks, load_chain, save_chain, validate_chain
from .contracts import DonationEventState, DonationRecord, get_donation_history, get_donors
from .content_store import DEFAULT_MAX_BLOB, BlobStore, Cid
from .crypto import ADDRESS_LEN, sha256
from .errors import DnbError, EmptyStore, StoreLocked, UnknownEvent
from .identity import Wallet, load_wallet, new_wallet, save_wallet, wallet_info
from .simnet import DEFAULT_SIM_CONFIG, SimConfig
from .transactions import (
    CreateEventPayload,
    DonatePayload,
    Transaction,
    TxKind,
    sign_transaction,
)

DEFAULT_DATA_DIR = "dnb-data"
DATA_DIR_ENV = "DNB_DATA_DIR"
DEFAULT_NETWORK = "dnb-local"
DEFAULT_FEE = 1000
LOCK_FILE = ".lock"

CLI_CONFIG_KEYS = ("data_dir", "network_name", "fee", "max_blob")


class UsageError(Exception):
    """Bad command-line input; exits with status 2."""


@dataclass
class CliConfig:
    data_dir: Path
    network_name: str = DEFAULT_NETWORK
    fee: int = DEFAULT_FEE
    max_blob: int = DEFAULT_MAX_BLOB
    sim: SimConfig = DEFAULT_SIM_CONFIG

    @property
    def chain_dir(self) -> Path:
        return self.data_dir / "chain"

    @property
    def blobs_dir(self) -> Path:
        return self.data_dir / "blobs"

    @property
    def wallets_dir(self) -> Path:
        return self.data_dir / "wallets"


def resolve_config(args) -> CliConfig:
    entries: dict[str, str] = {}
    if args.config:
        entries = simnet.parse_flat_config(Path(args.config).read_text())
    sim_entries = {k: v for k, v in entries.items() if k in simnet.CONFIG_FIELDS}
    cli_entries = {k: v for k, v in entries.items() if k in CLI_CONFIG_KEYS}
    unknown = set(entries) - set(sim_entries) - set(cli_entries)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")

    data_dir = (
        args.data_dir
        or os.environ.get(DATA_DIR_ENV)
        or cli_entries.get("data_dir")
        or DEFAULT_DATA_DIR
    )
    return CliConfig(
        data_dir=Path(data_dir),
        network_name=cli_entries.get("network_name", DEFAULT_NETWORK),
        fee=int(cli_entries.get("fee", DEFAULT_FEE)),
        max_blob=int(cli_entries.get("max_blob", DEFAULT_MAX_BLOB)),
        sim=simnet.sim_config_from_mapping(sim_entries, DEFAULT_SIM_CONFIG),
    )


class store_lock:
    """Exclusive advisory lock for mutating commands; one writer at a time."""

    def __init__(self, config: CliConfig):
        self.path = config.data_dir / LOCK_FILE

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StoreLocked(f"{self.path} exists; another writer is active") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        try:
            os.unlink(self.path)
        except FileNotFoundError:
            pass
        return False


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def event_to_json(event: DonationEventState) -> dict:
    return {
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
        "status": event.status.value,
    }


def record_to_json(record: DonationRecord) -> dict:
    return {
        "event_id": record.event_id.hex(),
        "donor": record.donor.hex(),
        "amount": str(record.amount),
        "timestamp": record.timestamp,
        "tx_hash": record.tx_hash.hex(),
    }


def _parse_units(text: str, what: str) -> int:
    if not text.isdigit():
        raise UsageError(f"{what} must be a nonnegative integer in smallest units")
    return int(text)

def _parse_hash(text: str, what: str) -> bytes:
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raise UsageError(f"{what} must be hex") from None
    if len(raw) != 32:
        raise UsageError(f"{what} must be 32 bytes of hex")
    return raw


def _parse_deadline(text: str, tip_timestamp: int) -> int:
    if not text.startswith("+") or not text[1:].isdigit():
        raise UsageError("deadline must be +<seconds> relative to the chain tip")
    return tip_timestamp + int(text[1:]) * 1000


def _wallet_path(config: CliConfig, name: str) -> Path:
    if not name or not all(c.isalnum() or c in "_-" for c in name):
        raise UsageError(f"wallet name {name!r} must be alphanumeric/_/-")
    return config.wallets_dir / f"{name}.json"


def _load_wallet(config: CliConfig, name: str) -> Wallet:
    path = _wallet_path(config, name)
    if not path.is_file():
        raise UsageError(f"no wallet named {name!r} in {config.wallets_dir}")
    return load_wallet(path)


def _open_chain(config: CliConfig) -> Chain:
    return load_chain(config.chain_dir)


def _next_timestamp(chain: Chain, advance_s: int) -> int:
    return chain.tip.timestamp + advance_s * 1000


# ---------------------------------------------------------------------------
# subcommands


def cmd_init(config: CliConfig, args) -> int:
    if chainmod.chain_path(config.chain_dir).exists():
        raise UsageError(f"{config.chain_dir} already holds a chain")
    config.data_dir.mkdir(parents=True, exist_ok=True)
    config.chain_dir.mkdir(parents=True, exist_ok=True)
    config.blobs_dir.mkdir(parents=True, exist_ok=True)
    config.wallets_dir.mkdir(parents=True, exist_ok=True)

    allocations: list[Allocation] = []
    created = []
    with store_lock(config):
        for spec_text in args.alloc or []:
            name, _, amount_text = spec_text.partition("=")
            if not amount_text:
                raise UsageError("--alloc expects <wallet-or-hex-address>=<amount>")
            amount = _parse_units(amount_text, "allocation amount")
            if len(name) == ADDRESS_LEN * 2 and all(c in "0123456789abcdef" for c in name):
                allocations.append((bytes.fromhex(name), amount))
                continue
            seed = None
            if args.seed is not None:
                digest = sha256(
                    b"dnb cli wallet" + args.seed.to_bytes(8, "big") + name.encode()
                )
                seed = int.from_bytes(digest[:8], "big")
            wallet = new_wallet(name, seed, config.network_name)
            save_wallet(wallet, _wallet_path(config, name))
            created.append(wallet)
            allocations.append((wallet.address, amount))
        chain = Chain.genesis(allocations, timestamp=args.timestamp)
        save_chain(chain, config.chain_dir)
    _emit(
        {
            "data_dir": str(config.data_dir),
            "network_name": config.network_name,
            "genesis": chain.tip.block_hash.hex(),
            "allocations": [[a.hex(), str(v)] for a, v in allocations],
            "wallets": [
                {"name": w.name, "address": w.address.hex(), "did": w.did}
                for w in created
            ],
        }
    )
    return 0


def cmd_wallet_new(config: CliConfig, args) -> int:
    path = _wallet_path(config, args.name)
    if path.exists():
        raise UsageError(f"wallet {args.name!r} already exists")
    with store_lock(config):
        wallet = new_wallet(args.name, args.seed, config.network_name)
        save_wallet(wallet, path)
    _emit(
        {
            "name": wallet.name,
            "address": wallet.address.hex(),
            "did": wallet.did,
            "network_name": wallet.network_name,
        }
    )
    return 0


def cmd_wallet_info(config: CliConfig, args) -> int:
    wallet = _load_wallet(config, args.name)
    info = wallet_info(wallet, _open_chain(config))
    _emit(
        {
            "name": wallet.name,
            "address": info.address,
            "balance": str(info.balance),
            "network_name": info.network_name,
            "did": wallet.did,
        }
    )
    return 0


def cmd_event_create(config: CliConfig, args) -> int:
    wallet = _load_wallet(config, args.wallet)
    image_bytes = Path(args.image).read_bytes()
    with store_lock(config):
        chain = _open_chain(config)
        # image first, then the creating transaction referencing its CID
        cid = BlobStore(config.blobs_dir, config.max_blob).put(image_bytes)
        deadline = _parse_deadline(args.deadline, chain.tip.timestamp)
        tx = sign_transaction(
            Transaction(
                kind=TxKind.CREATE_EVENT,
                sender_pk=wallet.public,
                nonce=chain.state.nonces.get(wallet.address, 0),
                fee=config.fee,
                payload=CreateEventPayload(
                    owner=wallet.address,
                    owner_name=wallet.name,
                    title=args.title,
                    description=args.desc,
                    target=_parse_units(args.target, "target"),
                    deadline=deadline,
                    image=cid,
                ),
            ),
            wallet.secret,
        )
        block = chain.extend([tx], _next_timestamp(chain, args.advance))
        save_chain(chain, config.chain_dir)
    _emit(
        {
            "event_id": tx.tx_hash.hex(),
            "tx_hash": tx.tx_hash.hex(),
            "block": block.height,
            "timestamp": block.timestamp,
            "deadline": deadline,
            "image": cid.text(),
        }
    )
    return 0


def cmd_donate(config: CliConfig, args) -> int:
    wallet = _load_wallet(config, args.wallet)
    event_id = _parse_hash(args.event_id, "event id")
    amount = _parse_units(args.amount, "amount")
    with store_lock(config):
        chain = _open_chain(config)
        tx = sign_transaction(
            Transaction(
                kind=TxKind.DONATE,
                sender_pk=wallet.public,
                nonce=chain.state.nonces.get(wallet.address, 0),
                fee=config.fee,
                payload=DonatePayload(event_id=event_id, amount=amount),
            ),
            wallet.secret,
        )
        block = chain.extend([tx], _next_timestamp(chain, args.advance))
        save_chain(chain, config.chain_dir)
    _emit(
        {
            "event_id": event_id.hex(),
            "amount": str(amount),
            "tx_hash": tx.tx_hash.hex(),
            "block": block.height,
            "timestamp": block.timestamp,
        }
    )
    return 0


def cmd_tick(config: CliConfig, args) -> int:
    with store_lock(config):
        chain = _open_chain(config)
        block = chain.extend([], _next_timestamp(chain, args.advance))
        save_chain(chain, config.chain_dir)
    _emit({"block": block.height, "timestamp": block.timestamp})
    return 0


def cmd_events_list(config: CliConfig, args) -> int:
    chain = _open_chain(config)
    _emit([event_to_json(e) for e in chain.state.contracts.events.values()])
    return 0


def cmd_event_show(config: CliConfig, args) -> int:
    chain = _open_chain(config)
    event_id = _parse_hash(args.event_id, "event id")
    event = chain.state.contracts.events.get(event_id)
    if event is None:
        raise UnknownEvent(event_id.hex())
    donors = get_donors(chain.state.contracts, event_id)
    _emit(
        {
            "event": event_to_json(event),
            "donors": [[a.hex(), str(v)] for a, v in donors],
        }
    )
    return 0


def cmd_history(config: CliConfig, args) -> int:
    chain = _open_chain(config)
    try:
        address = bytes.fromhex(args.address)
    except ValueError:
        raise UsageError("address must be hex") from None
    if len(address) != ADDRESS_LEN:
        raise UsageError(f"address must be {ADDRESS_LEN} bytes of hex")
    records = get_donation_history(chain.state.contracts, address)
    _emit([record_to_json(r) for r in records])
    return 0


def cmd_verify(config: CliConfig, args) -> int:
    try:
        blocks = load_blocks(config.chain_dir)
    except chainmod.CorruptChain as exc:
        _emit(
            {
                "ok": False,
                "failures": [
                    {"height": exc.height, "kind": "CorruptChain", "detail": exc.cause}
                ],
            }
        )
        sys.stderr.write(f"error: CorruptChain: {exc}\n")
        return 1
    report, _state = chainmod._validate(blocks)
    _emit(report.to_json())
    if not report.ok:
        failure = report.failures[0]
        sys.stderr.write(
            f"error: {failure.kind}: height {failure.height}: {failure.detail}\n"
        )
        return 1
    return 0


def _sim_config(config: CliConfig, args) -> SimConfig:
    overrides = {}
    for field_name in simnet.CONFIG_FIELDS:
        value = getattr(args, field_name, None)
        if value is not None:
            overrides[field_name] = value
    sim = replace(config.sim, **overrides)
    sim.validate()
    return sim


def cmd_simulate(config: CliConfig, args) -> int:
    sim = _sim_config(config, args)
    run = simnet.run_simulation(sim, args.txs, args.workload)
    _emit(
        {
            "workload": run.workload,
            "metrics": run.metrics.to_json(),
            "chain_height": run.chain.height,
            "chain_tip": run.chain.tip.block_hash.hex(),
        }
    )
    return 0


def cmd_sweep(config: CliConfig, args) -> int:
    sim = _sim_config(config, args)
    start, stop, step = getattr(args, "from"), args.to, args.step
    if step <= 0 or stop < start:
        raise UsageError("sweep needs --from <= --to and --step > 0")
    n_list = list(range(start, stop + 1, step))
    rows = simnet.sweep(sim, n_list, args.workload)
    csv_text = simnet.metrics_csv(rows)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(csv_text)
    _emit({"out": str(out), "points": n_list})
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_sim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workload", choices=simnet.WORKLOADS, default="donate_storm")
    parser.add_argument("--num-nodes", dest="num_nodes", type=int)
    parser.add_argument("--quorum-fraction", dest="quorum_fraction", type=float)
    parser.add_argument("--base-approval-delay-ms", dest="base_approval_delay_ms", type=int)
    parser.add_argument("--per-pending-tx-delay-ms", dest="per_pending_tx_delay_ms", type=int)
    parser.add_argument("--jitter-ms", dest="jitter_ms", type=int)
    parser.add_argument("--block-interval-ms", dest="block_interval_ms", type=int)
    parser.add_argument(
        "--submission-interarrival-ms", dest="submission_interarrival_ms", type=int
    )
    parser.add_argument("--seed", dest="seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnb", description="donation-tracking blockchain tool"
    )
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--data-dir", help=f"data directory (or ${DATA_DIR_ENV})")
    parser.add_argument(
        "--json", action="store_true", help="accepted for compatibility; output is JSON"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a data directory and genesis block")
    p.add_argument(
        "--alloc",
        action="append",
        metavar="NAME=AMOUNT",
        help="mint AMOUNT units to a new wallet NAME (or to a raw hex address)",
    )
    p.add_argument("--seed", type=int, help="base seed for reproducible wallets")
    p.add_argument("--timestamp", type=int, default=0, help="genesis timestamp (ms)")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("wallet-new", help="create and store a wallet")
    p.add_argument("name")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_wallet_new)

    p = sub.add_parser("wallet-info", help="address, balance, and network of a wallet")
    p.add_argument("name")
    p.set_defaults(func=cmd_wallet_info)

    p = sub.add_parser("event-create", help="upload an image and open a campaign")
    p.add_argument("wallet")
    p.add_argument("--title", required=True)
    p.add_argument("--desc", default="")
    p.add_argument("--target", required=True, help="target amount in smallest units")
    p.add_argument("--deadline", required=True, help="+<seconds> after the chain tip")
    p.add_argument("--image", required=True, help="path to the campaign image")
    p.add_argument("--advance", type=int, default=1, help="seconds this block advances")
    p.set_defaults(func=cmd_event_create)

    p = sub.add_parser("donate", help="donate to a campaign")
    p.add_argument("wallet")
    p.add_argument("event_id")
    p.add_argument("amount", help="amount in smallest units")
    p.add_argument("--advance", type=int, default=1)
    p.set_defaults(func=cmd_donate)

    p = sub.add_parser("tick", help="append an empty block to advance virtual time")
    p.add_argument("--advance", type=int, default=1)
    p.set_defaults(func=cmd_tick)

    p = sub.add_parser("events-list", help="all campaigns in creation order")
    p.set_defaults(func=cmd_events_list)

    p = sub.add_parser("event-show", help="one campaign with per-donor totals")
    p.add_argument("event_id")
    p.set_defaults(func=cmd_event_show)

    p = sub.add_parser("history", help="a donor's records across all campaigns")
    p.add_argument("address")
    p.set_defaults(func=cmd_history)

    p = sub.add_parser("verify", help="re-validate the stored chain")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run the virtual-time network simulator")
    p.add_argument("-n", "--txs", type=int, required=True)
    _add_sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate a range of transaction counts to CSV")
    p.add_argument("--from", dest="from", type=int, required=True)
    p.add_argument("--to", type=int, required=True)
    p.add_argument("--step", type=int, default=5)
    p.add_argument("--out", required=True, help="CSV output path")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        return args.func(config, args)
    except UsageError as exc:
        sys.stderr.write(f"error: UsageError: {exc}\n")
        return 2
    except EmptyStore as exc:
        sys.stderr.write(f"error: EmptyStore: {exc}\n")
        return 1
    except DnbError as exc:
        sys.stderr.write(f"error: {exc.kind}: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: IoError: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
