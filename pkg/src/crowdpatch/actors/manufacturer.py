from __future__ import annotations

from typing import TYPE_CHECKING

from .. import contracts as ct
from .. import crypto_core as cc
from .. import zk
from ..ledger import Receipt
from ..messages import MessageKind
from .base import Actor, Package

if TYPE_CHECKING:
    from ..simulation import Simulation


class SeedClosed(Exception):
    pass


class Manufacturer(Actor):
    """Deploys the SSC, releases one update and seeds it for a while.

    The manufacturer also plays the trusted-setup role for both statements.
    """

    role = "manufacturer"

    def __init__(self, name: str, sim: Simulation, *, update: bytes, targets: list[bytes],
                 e: int, a_d: int, a_h: int, deposit: int, reset_period: int,
                 seed_window: int, reclaim: bool = False, keys: cc.KeyPair | None = None):
        super().__init__(name, sim, keys)
        self.update = update
        self.targets = list(targets)
        self.e = e
        self.a_d = a_d
        self.a_h = a_h
        self.deposit = deposit
        self.reset_period = reset_period
        self.seed_window = seed_window
        self.reclaim = reclaim
        self.ssc: str | None = None
        self.dsc: str | None = None
        self.dsc_created_at: int | None = None
        self.package: Package | None = None
        self.exchange_keys: tuple[zk.ProvingKey, zk.VerifyingKey] | None = None
        self.release_failed: str | None = None
        self._reclaim_sent = False
        self.refunded = False

    def start(self) -> None:
        self.submit(ct.deploy_ssc_tx(self.address, self.reset_period, legacy=self.sim.legacy))

    def on_receipt(self, receipt: Receipt) -> None:
        if receipt.call == "deploy":
            if receipt.ok:
                self.ssc = receipt.result
                self.release()
            else:
                self.release_failed = receipt.error
        elif receipt.call == "create_dsc":
            if receipt.ok:
                self.dsc = receipt.result
                self.dsc_created_at = receipt.height
                self.sim.network.dht_announce(self.package.digest(), self.name)
                self.record("SeedWindowOpen", dsc=self.dsc,
                            until=self.dsc_created_at + self.seed_window)
            else:
                self.release_failed = receipt.error
                self.record("ReleaseFailed", error=receipt.error)
        elif receipt.call == "reclaim_after_expiry":
            self.refunded = receipt.ok

    def build_release(self) -> dict:
        """Trusted setup for both statements and the package; no ledger effect."""
        rng = self.sim.rng
        pk_d, vk_d = self.sim.zk.setup(zk.StatementShape(zk.StatementKind.S_D, len(self.update)), rng)
        update_hash = cc.hash(self.update)
        sig_m = self.sign(cc.Context.MANUFACTURER, update_hash)
        package = Package(self.update, pk_d, vk_d, sig_m)
        package_bytes = package.to_bytes()
        pk_e, vk_e = self.sim.zk.setup(zk.StatementShape(zk.StatementKind.S_E, len(package_bytes)), rng)
        self.package = package
        self.exchange_keys = (pk_e, vk_e)
        return {
            "update_hash": update_hash,
            "package_hash": cc.hash(package_bytes),
            "vk_d_hash": cc.hash(vk_d.to_bytes()),
            "vk_e_hash": cc.hash(vk_e.to_bytes()),
            "pk_e_hash": cc.hash(pk_e.to_bytes()),
        }

    def release(self) -> None:
        hashes = self.build_release()
        self.submit(ct.create_dsc_tx(
            self.address, self.ssc, self.deposit, e=self.e, targets=self.targets,
            a_d=self.a_d, a_h=self.a_h, **hashes,
        ))

    def seed_open(self) -> bool:
        return (self.dsc_created_at is not None
                and self.dsc_created_at <= self.height < self.dsc_created_at + self.seed_window)

    def serve_seed(self, package_hash: bytes) -> tuple[bytes, bytes, bytes]:
        if not self.seed_open() or package_hash != self.package.digest():
            raise SeedClosed()
        pk_e, vk_e = self.exchange_keys
        return self.package.to_bytes(), pk_e.to_bytes(), vk_e.to_bytes()

    def on_seed_request(self, sender: str, f: dict[str, bytes]) -> None:
        try:
            package, pk_e, vk_e = self.serve_seed(f["package_hash"])
        except SeedClosed:
            self.send(sender, MessageKind.SEED_REFUSED, package_hash=f["package_hash"])
            return
        self.send(sender, MessageKind.SEED_DELIVERY, package=package, pk_e=pk_e, vk_e=vk_e)

    def on_block(self) -> None:
        if (self.reclaim and self.dsc is not None and not self._reclaim_sent
                and self.height - self.dsc_created_at >= self.e):
            self._reclaim_sent = True
            self.submit(ct.reclaim_tx(self.address, self.dsc))

    def busy(self) -> bool:
        if self.release_failed:
            return False
        if self.dsc is None:
            return True
        return self.reclaim and not self._reclaim_sent
