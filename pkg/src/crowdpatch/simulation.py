"""Single-threaded engine tying ledger, network, zk backend and actors together.

One iteration of :meth:`Simulation.run` is one block:

1. deliver up to ``steps_per_block`` due envelopes;
2. advance the ledger, letting the adversary reorder or defer;
3. check currency conservation and hand receipts to their submitters;
4. give every actor its ``on_block`` turn.

The run stops at quiescence (nothing queued, nothing pending, no actor
busy) or after ``max_blocks``.
"""

from __future__ import annotations

import logging
from typing import Any

from . import crypto_core as cc
from .actors.base import Actor
from .ledger import Ledger, Transaction
from .network import Adversary, Envelope, Network
from .trace import Trace
from .zk import ZkBackend

log = logging.getLogger(__name__)


class Simulation:
    def __init__(self, seed: int, *, legacy: bool = False, adversary: Adversary | None = None,
                 max_tx_delay: int = 1, steps_per_block: int = 64, max_blocks: int = 200):
        self.seed = seed
        self.legacy = legacy
        self.rng = cc.SeededRandom(seed)
        self.trace = Trace()
        self.ledger = Ledger(max_tx_delay=max_tx_delay, on_event=self._on_ledger_event)
        self.zk = ZkBackend()
        self.adversary = adversary
        self.network = Network(self, adversary)
        self.steps_per_block = steps_per_block
        self.max_blocks = max_blocks
        self.actors: dict[str, Actor] = {}
        self.tx_owner: dict[int, str] = {}
        # witness material registered by honest provers: (kind, secret, commitment)
        self.secrets: list[tuple[str, bytes, bytes]] = []
        self.started = False
        if adversary is not None:
            adversary.attach(self)

    # -- wiring ---------------------------------------------------------------

    def add(self, actor: Actor, balance: int = 0) -> Actor:
        if actor.name in self.actors:
            raise ValueError(f"duplicate actor name {actor.name!r}")
        self.actors[actor.name] = actor
        self.ledger.genesis(actor.address, balance)
        return actor

    def record(self, actor: str, kind: str, **payload: Any) -> int:
        return self.trace.record(self.ledger.height, actor, kind, **payload)

    def register_secret(self, kind: str, value: bytes, commitment: bytes) -> None:
        self.secrets.append((kind, bytes(value), bytes(commitment)))

    def _on_ledger_event(self, kind: str, payload: dict[str, Any]) -> None:
        seq = self.record("ledger", kind, **payload)
        if kind == "KeyPublished" and self.adversary is not None:
            self.adversary.knowledge.learn(payload["r"], "ledger", seq)

    # -- callbacks used by actors and the network -----------------------------

    def dispatch(self, env: Envelope) -> None:
        actor = self.actors.get(env.to)
        if actor is None:
            log.debug("envelope %d to unknown actor %s dropped", env.id, env.to)
            return
        actor.handle(env)

    def submit(self, actor: Actor, tx: Transaction) -> int:
        tx_id = self.ledger.submit_tx(tx)
        self.tx_owner[tx_id] = actor.name
        r = tx.args.get("r")
        seq = self.record(actor.name, "TxSubmitted", tx=tx_id, call=tx.call, target=tx.target,
                          discloses=cc.hash(r) if isinstance(r, bytes) else None)
        if self.adversary is not None:
            self.adversary.observe_tx(tx, seq)
        return tx_id

    # -- main loop ------------------------------------------------------------

    def quiescent(self) -> bool:
        return (not self.network.pending() and not self.ledger.pending
                and not any(a.busy() for a in self.actors.values()))

    def step_block(self) -> None:
        for _ in range(self.steps_per_block):
            if self.network.step() is None:
                break
        scheduler = self.adversary.schedule_block if self.adversary is not None else None
        receipts = self.ledger.advance_block(scheduler)
        supply = self.ledger.total_supply()
        self.record("engine", "Block", supply=supply)
        if supply != self.ledger.genesis_supply:
            self.record("engine", "Violation", check="CurrencyConservation",
                        session=f"block-{self.ledger.height}",
                        expected=self.ledger.genesis_supply, actual=supply)
        for receipt in receipts:
            owner = self.actors.get(self.tx_owner.get(receipt.tx_id, ""))
            if owner is not None:
                owner.on_receipt(receipt)
        for actor in list(self.actors.values()):
            actor.on_block()

    def start(self) -> None:
        if not self.started:
            self.started = True
            for actor in list(self.actors.values()):
                actor.start()

    def run(self) -> Trace:
        self.start()
        while self.ledger.height < self.max_blocks:
            self.step_block()
            if self.quiescent():
                break
        self.record("engine", "RunEnd", quiescent=self.quiescent())
        return self.trace

    # -- convenience ----------------------------------------------------------

    def balance(self, name: str) -> int:
        return self.ledger.balance(self.actors[name].address)

    def actor(self, name: str) -> Actor:
        return self.actors[name]
