"""Shared fixtures: a bare ledger driven directly with real keys."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import pytest

from crowdpatch import contracts as ct
from crowdpatch import crypto_core as cc
from crowdpatch.ledger import Ledger, Receipt, Transaction, address_of


@dataclass
class Chain:
    """Manufacturer, devices and distributors on one ledger, no network."""

    n_devices: int = 3
    n_distributors: int = 3
    a_d: int = 5
    a_h: int = 2
    e: int = 40
    reset_period: int = 10
    legacy: bool = False
    seed: int = 11
    funds: int = 100
    events: list[tuple[str, dict[str, Any]]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.rng = cc.SeededRandom(self.seed)
        self.ledger = Ledger(max_tx_delay=1, on_event=lambda k, p: self.events.append((k, p)))
        self.mfr = self.rng.keypair()
        self.devices = [self.rng.keypair() for _ in range(self.n_devices)]
        self.dists = [self.rng.keypair() for _ in range(self.n_distributors)]
        self.hub = self.rng.keypair()
        self.stranger = self.rng.keypair()
        self.update = self.rng.randbytes(64)
        self.update_hash = cc.hash(self.update)
        for kp in (self.mfr, *self.dists, self.hub, self.stranger):
            self.ledger.genesis(address_of(kp.public), self.funds)
        self.ssc: str | None = None

    @staticmethod
    def addr(kp: cc.KeyPair) -> str:
        return address_of(kp.public)

    def run(self, tx: Transaction) -> Receipt:
        """Submit ``tx`` and seal one block; return its receipt."""
        tx_id = self.ledger.submit_tx(tx)
        receipts = self.ledger.advance_block()
        return next(r for r in receipts if r.tx_id == tx_id)

    def idle(self, blocks: int) -> None:
        for _ in range(blocks):
            self.ledger.advance_block()

    def run_at(self, height: int, tx: Transaction) -> Receipt:
        """Execute ``tx`` in the block sealed at ``height``."""
        assert self.ledger.height < height
        self.idle(height - 1 - self.ledger.height)
        return self.run(tx)

    def deploy_ssc(self) -> str:
        rc = self.run(ct.deploy_ssc_tx(self.addr(self.mfr), self.reset_period, self.legacy))
        assert rc.ok, rc.error
        self.ssc = rc.result
        return rc.result

    def create_dsc_tx(self, deposit: int | None = None, sender: cc.KeyPair | None = None,
                      targets=None) -> Transaction:
        if deposit is None:
            deposit = ct.deposit_bound(self.n_devices, self.a_d, self.a_h)
        targets = [d.public for d in self.devices] if targets is None else targets
        return ct.create_dsc_tx(
            self.addr(sender or self.mfr), self.ssc, deposit, e=self.e,
            update_hash=self.update_hash, package_hash=cc.hash(b"P"),
            vk_d_hash=cc.hash(b"vkd"), vk_e_hash=cc.hash(b"vke"), pk_e_hash=cc.hash(b"pke"),
            targets=targets, a_d=self.a_d, a_h=self.a_h)

    def release(self, **kw: Any) -> str:
        if self.ssc is None:
            self.deploy_ssc()
        rc = self.run(self.create_dsc_tx(**kw))
        assert rc.ok, rc.error
        return rc.result

    def pod_args(self, device: int, dist: int, t: bytes | None = None) -> dict[str, bytes]:
        """Honest (t, r, s) for ``dist`` and the device's PoD over s."""
        t = self.rng.nonce() if t is None else t
        dev = self.devices[device]
        r = ct.delivery_key(t, dev.public, self.dists[dist].public)
        s = cc.hash(r)
        pod = cc.sign(dev.private, ct.pod_message(self.update_hash, s, self.legacy)).value
        return {"device": dev.public, "t": t, "r": r, "s": s, "pod": pod}

    def submit_pod(self, dsc: str, device: int, dist: int, **override: bytes) -> Transaction:
        args = {**self.pod_args(device, dist), **override}
        return ct.submit_pod_tx(self.addr(self.dists[dist]), dsc, **args)

    def pofd(self, device: int, hub: cc.KeyPair | None = None) -> bytes:
        hub = hub or self.hub
        return cc.sign(self.devices[device].private,
                       ct.pofd_message(self.update_hash, hub.public)).value

    def balance(self, who: cc.KeyPair | str) -> int:
        return self.ledger.balance(who if isinstance(who, str) else self.addr(who))

    def kinds(self) -> list[str]:
        return [k for k, _ in self.events]


@pytest.fixture
def chain() -> Chain:
    return Chain()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
