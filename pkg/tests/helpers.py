"""Shared test builders: wallets, transactions, and random valid workloads."""

from __future__ import annotations

import random

from dnb.chain import Chain
from dnb.content_store import Cid
from dnb.identity import Wallet
from dnb.transactions import (
    UNITS_PER_TOKEN,
    CreateEventPayload,
    DonatePayload,
    Transaction,
    TxKind,
    sign_transaction,
)

TOKEN = UNITS_PER_TOKEN
FEE = 1000


def make_wallets(count: int, base_seed: int = 1000) -> list[Wallet]:
    return [Wallet.create(f"w{i}", base_seed + i) for i in range(count)]


def funded_chain(wallets, tokens_each: int = 10**6, timestamp: int = 0) -> Chain:
    return Chain.genesis(
        [(w.address, tokens_each * TOKEN) for w in wallets], timestamp=timestamp
    )


def create_tx(
    chain: Chain,
    wallet: Wallet,
    *,
    title: str = "Flood relief",
    description: str = "",
    target: int = 10 * TOKEN,
    deadline: int | None = None,
    deadline_offset: int = 86_400_000,
    image: Cid | None = None,
    fee: int = FEE,
    owner: bytes | None = None,
) -> Transaction:
    if deadline is None:
        deadline = chain.tip.timestamp + deadline_offset
    return sign_transaction(
        Transaction(
            kind=TxKind.CREATE_EVENT,
            sender_pk=wallet.public,
            nonce=chain.state.nonces.get(wallet.address, 0),
            fee=fee,
            payload=CreateEventPayload(
                owner=owner if owner is not None else wallet.address,
                owner_name=wallet.name,
                title=title,
                description=description,
                target=target,
                deadline=deadline,
                image=image or Cid.of(b"test image"),
            ),
        ),
        wallet.secret,
    )


def donate_tx(
    chain: Chain,
    wallet: Wallet,
    event_id: bytes,
    amount: int,
    *,
    fee: int = FEE,
    nonce: int | None = None,
) -> Transaction:
    return sign_transaction(
        Transaction(
            kind=TxKind.DONATE,
            sender_pk=wallet.public,
            nonce=nonce if nonce is not None else chain.state.nonces.get(wallet.address, 0),
            fee=fee,
            payload=DonatePayload(event_id=event_id, amount=amount),
        ),
        wallet.secret,
    )


def random_workload(
    seed: int, n_txs: int, n_wallets: int = 8, fee: int = FEE
) -> tuple[Chain, list[Wallet]]:
    """Build a chain from n_txs random but always-valid transactions.

    Deadlines between 5 s and 120 s out and block advances of 1 s to 30 s
    mean campaigns routinely expire mid-run, exercising success payouts and
    failure refunds alongside ordinary donations.
    """
    rng = random.Random(seed)
    wallets = make_wallets(n_wallets, base_seed=seed * 1009 + 7)
    chain = funded_chain(wallets)

    nonces = {w.address: 0 for w in wallets}
    created = 0
    remaining = n_txs
    while remaining > 0:
        batch_size = rng.randint(1, min(12, remaining))
        ts = chain.tip.timestamp + rng.randint(1, 30) * 1000
        # events that will survive this block's finalization pass
        open_events = [
            e.event_id
            for e in chain.state.contracts.events.values()
            if e.status.value == "active" and e.deadline > ts
        ]
        batch = []
        for _ in range(batch_size):
            wallet = rng.choice(wallets)
            if open_events and rng.random() < 0.85:
                amount = rng.randint(1, 5 * TOKEN)
                tx = donate_tx(
                    chain,
                    wallet,
                    rng.choice(open_events),
                    amount,
                    fee=fee,
                    nonce=nonces[wallet.address],
                )
            else:
                created += 1
                tx = sign_transaction(
                    Transaction(
                        kind=TxKind.CREATE_EVENT,
                        sender_pk=wallet.public,
                        nonce=nonces[wallet.address],
                        fee=fee,
                        payload=CreateEventPayload(
                            owner=wallet.address,
                            owner_name=wallet.name,
                            title=f"campaign {created}",
                            description="",
                            target=rng.randint(1, 20) * TOKEN,
                            deadline=ts + rng.randint(5, 120) * 1000,
                            image=Cid.of(f"image {created}".encode()),
                        ),
                    ),
                    wallet.secret,
                )
                open_events.append(tx.tx_hash)
            nonces[wallet.address] += 1
            batch.append(tx)
        chain.extend(batch, ts)
        remaining -= batch_size
    return chain, wallets
