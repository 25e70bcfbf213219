"""Distributor state machine.

A distributor first obtains the package, from the manufacturer during the
seed window (it is then an FHD) or afterwards through an exchange with an
FHD paid via an ESC (an SHD). From then on both kinds behave identically:
they answer hub requests, prove correct encryption of the update and redeem
the device's PoD on the DSC.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from .. import contracts as ct
from .. import crypto_core as cc
from .. import zk
from ..ledger import NotFound, Receipt, address_of
from ..messages import MessageKind
from .base import Actor, Package, dsc_expired
from .device import id_response_message

if TYPE_CHECKING:
    from ..simulation import Simulation

KEY_SEED_SIZE = 32


@dataclass
class DeliverySession:
    hub: str
    device: bytes
    n1: bytes
    c: bytes
    state: str = "hello"
    t: bytes = b""
    r: bytes = b""
    s: bytes = b""
    submissions: int = 0


@dataclass
class SaleSession:
    shd: str
    c: bytes
    state: str = "challenged"
    shd_pub: bytes = b""
    t: bytes = b""
    r: bytes = b""
    s: bytes = b""
    claim_sent: bool = False


@dataclass
class Purchase:
    """Buyer-side DDE progress for an SHD."""

    state: str = "idle"
    seller: str | None = None
    c: bytes = b""
    deadline: int = 0
    tried: set[str] = field(default_factory=set)
    ciphertext: bytes = b""
    s: bytes = b""
    pk_e: bytes = b""
    vk_e: bytes = b""
    esc: str | None = None
    esc_expires: int = 0
    attempts: int = 0


class Distributor(Actor):
    role = "distributor"

    def __init__(self, name: str, sim: Simulation, *, join_at: int = 0, deliver: bool = True,
                 sell: bool = True, dde_threshold: int = 0, offer: int = 0,
                 esc_expiry: int | None = None, exchange_timeout: int = 4,
                 max_purchase_attempts: int = 4, keys: cc.KeyPair | None = None):
        super().__init__(name, sim, keys)
        self.join_at = join_at
        self.deliver = deliver
        self.sell = sell
        self.dde_threshold = dde_threshold
        self.offer = offer
        self.esc_expiry = esc_expiry
        self.exchange_timeout = exchange_timeout
        self.max_purchase_attempts = max_purchase_attempts

        self.dsc: str | None = None
        self.release: dict[str, Any] | None = None
        self.package: Package | None = None
        self.exchange_keys: tuple[bytes, bytes] | None = None  # (pk_E, vk_E) octets
        self.acquired_via: str | None = None
        self.announced = False
        self.sessions: dict[bytes, DeliverySession] = {}
        self.sales: dict[bytes, SaleSession] = {}
        self.purchase = Purchase()
        self.seed_sources: list[str] = []

    # -- release discovery and package acquisition ---------------------------

    def _refresh_release(self) -> None:
        if self.dsc is None:
            dscs = self.read("contracts", "dsc")
            if not dscs:
                return
            self.dsc = dscs[0]
        self.release = self.read("contract", self.dsc)

    def on_block(self) -> None:
        self._refresh_release()
        if self.release is None:
            return
        if self.package is None:
            if self.height >= self.join_at:
                self._acquire()
        elif not self.announced:
            self._announce()
        if self.sell:
            self._claim_exchanges()

    def _announce(self) -> None:
        self.announced = True
        if self.deliver:
            self.sim.network.dht_announce(self.release["update_hash"], self.name)
        if self.sell:
            self.sim.network.dht_announce(self.release["package_hash"], self.name)

    def _acquire(self) -> None:
        p = self.purchase
        if p.state == "idle":
            sources = [a for a in self.sim.network.dht_lookup(self.release["package_hash"])
                       if a != self.name]
            if not sources:
                return
            p.state = "seed_requested"
            p.deadline = self.height + self.exchange_timeout
            for src in sources:
                self.send(src, MessageKind.SEED_REQUEST, package_hash=self.release["package_hash"],
                          distributor=self.pub)
        elif p.state == "seed_requested" and self.height >= p.deadline:
            p.state = "dde_idle"
        elif p.state == "dde_idle":
            self._start_purchase()
        elif p.state in ("dde_requested", "dde_proof") and self.height >= p.deadline:
            self.record("ExchangeAbort", seller=p.seller, reason="timeout")
            p.state = "dde_idle"
        elif p.state == "esc_live":
            self._poll_exchange_key()

    def _start_purchase(self) -> None:
        p = self.purchase
        if p.attempts >= self.max_purchase_attempts:
            p.state = "gave_up"
            self.record("ExchangeGaveUp")
            return
        sellers = [a for a in self.sim.network.dht_lookup(self.release["package_hash"])
                   if a != self.name and a not in p.tried and a not in self.seed_sources]
        if not sellers:
            return
        p.seller = sellers[0]
        p.tried.add(p.seller)
        p.attempts += 1
        p.state = "dde_requested"
        p.deadline = self.height + self.exchange_timeout
        self.send(p.seller, MessageKind.DDE_REQUEST, package_hash=self.release["package_hash"],
                  shd=self.pub)

    def on_seed_delivery(self, sender: str, f: dict[str, bytes]) -> None:
        if self.package is not None or self.release is None:
            return
        if self._accept_package(f["package"], f["pk_e"], f["vk_e"], session=f"seed-{sender}"):
            self.acquired_via = "seed"
            self.purchase.state = "done"
            self.record("PackageAcquired", via="seed", source=sender)

    def on_seed_refused(self, sender: str, f: dict[str, bytes]) -> None:
        if sender not in self.seed_sources:
            self.seed_sources.append(sender)
        if self.purchase.state == "seed_requested":
            self.record("SeedClosed", source=sender)
            self.purchase.state = "dde_idle"

    def _accept_package(self, data: bytes, pk_e: bytes, vk_e: bytes, session: str) -> bool:
        rel = self.release
        if cc.hash(data) != rel["package_hash"]:
            self.violation("PackageHash", session=session)
            return False
        package = Package.from_bytes(data)
        if package.update_hash != rel["update_hash"]:
            self.violation("UpdateHash", session=session)
            return False
        if cc.hash(pk_e) != rel["pk_e_hash"] or cc.hash(vk_e) != rel["vk_e_hash"]:
            self.violation("ExchangeKeyHash", session=session)
            return False
        self.package = package
        self.exchange_keys = (pk_e, vk_e)
        return True

    # -- DDE, buyer side ------------------------------------------------------

    def on_dde_challenge(self, sender: str, f: dict[str, bytes]) -> None:
        p = self.purchase
        if p.state != "dde_requested" or sender != p.seller:
            return
        p.c = f["c"]
        sig = self.sign(cc.Context.DDE_CHALLENGE, f["c"])
        self.send(sender, MessageKind.DDE_CHALLENGE_RESPONSE, c=f["c"], shd=self.pub, sig=sig)
        p.state = "dde_proof"

    def on_dde_refused(self, sender: str, f: dict[str, bytes]) -> None:
        p = self.purchase
        if p.state in ("dde_requested", "dde_proof") and sender == p.seller and f["c"] in (p.c, b""):
            self.record("ExchangeRefused", seller=sender, reason=f["reason"].decode())
            p.state = "dde_idle"

    def on_dde_proof_delivery(self, sender: str, f: dict[str, bytes]) -> None:
        p = self.purchase
        if p.state != "dde_proof" or sender != p.seller or f["c"] != p.c:
            return
        rel = self.release
        session = f"dde-{p.c.hex()[:12]}"
        if cc.hash(f["vk"]) != rel["vk_e_hash"] or cc.hash(f["pk"]) != rel["pk_e_hash"]:
            self.violation("ExchangeKeyHash", session=session, seller=sender)
            p.state = "dde_idle"
            return
        try:
            vk = zk.key_from_bytes(f["vk"])
            proof = zk.Proof.from_bytes(f["proof"])
        except ValueError:
            vk = proof = None
        public = zk.PublicInputs(rel["package_hash"], f["ciphertext"], f["s"])
        if not isinstance(vk, zk.VerifyingKey) or not self.sim.zk.verify(vk, public, proof):
            self.violation("ProofInvalid", session=session, seller=sender)
            p.state = "dde_idle"
            return
        self.record("ZkVerified", session=session, statement="S_E", s=f["s"])
        p.ciphertext, p.s, p.pk_e, p.vk_e = f["ciphertext"], f["s"], f["pk"], f["vk"]
        p.state = "esc_pending"
        e_prime = self.esc_expiry if self.esc_expiry is not None else rel["e"]
        self.submit(ct.create_esc_tx(self.address, rel["parent_ssc"], self.offer,
                                     address_of(f["fhd"]), f["s"], e_prime))

    def _poll_exchange_key(self) -> None:
        p = self.purchase
        try:
            r = self.read("published_key", p.s)
        except NotFound:
            if self.height >= p.esc_expires:
                self.record("ExchangeExpired", esc=p.esc)
                self.submit(ct.reclaim_tx(self.address, p.esc))
                p.state = "dde_idle"
            return
        try:
            data = cc.sym_decrypt(p.ciphertext, r)
        except cc.WrongKey:
            self.violation("DecryptionFailure", session=f"dde-{p.c.hex()[:12]}")
            p.state = "dde_idle"
            return
        if self._accept_package(data, p.pk_e, p.vk_e, session=f"dde-{p.c.hex()[:12]}"):
            if not cc.verify_sig(self._manufacturer_pub(), ct.manufacturer_message(self.package.update_hash),
                                 self.package.sig_m):
                self.violation("BadManufacturerSignature", session=f"dde-{p.c.hex()[:12]}")
            self.acquired_via = "dde"
            p.state = "done"
            self.record("PackageAcquired", via="dde", source=p.seller, esc=p.esc)

    def _manufacturer_pub(self) -> bytes:
        return bytes.fromhex(self.release["creator"])

    # -- DDE, seller side -----------------------------------------------------

    def on_dde_request(self, sender: str, f: dict[str, bytes]) -> None:
        if not self.sell or self.package is None or f["package_hash"] != self.release["package_hash"]:
            return
        c = self.sim.rng.nonce()
        self.sales[c] = SaleSession(shd=sender, c=c)
        self.send(sender, MessageKind.DDE_CHALLENGE, c=c)

    def on_dde_challenge_response(self, sender: str, f: dict[str, bytes]) -> None:
        sale = self.sales.get(f["c"])
        if sale is None or sale.state != "challenged" or sender != sale.shd:
            return
        session = f"sale-{sale.c.hex()[:12]}"
        msg = cc.CanonicalMessage.of(cc.Context.DDE_CHALLENGE, f["c"])
        if not cc.verify_sig(f["shd"], msg, f["sig"]):
            self.violation("DdeChallengeSignature", session=session)
            sale.state = "aborted"
            return
        score = self.read("score", self.release["parent_ssc"], address_of(f["shd"]))
        if score < self.dde_threshold:
            sale.state = "refused"
            self.record("ExchangeRefused", session=session, reason="ScoreTooLow", score=score)
            self.send(sender, MessageKind.DDE_REFUSED, c=f["c"], reason=b"ScoreTooLow")
            return
        sale.shd_pub = f["shd"]
        sale.t = self.sim.rng.randbytes(KEY_SEED_SIZE)
        sale.r = ct.exchange_key(sale.t, self.pub)
        sale.s = cc.hash(sale.r)
        self.sim.register_secret("r", sale.r, sale.s)
        package_bytes = self.package.to_bytes()
        ciphertext = cc.sym_encrypt(package_bytes, sale.r, self.sim.rng)
        pk_e_bytes, vk_e_bytes = self.exchange_keys
        pk_e = zk.key_from_bytes(pk_e_bytes)
        public = zk.PublicInputs(self.release["package_hash"], ciphertext, sale.s)
        proof = self.sim.zk.prove(pk_e, public, zk.Witness(package_bytes, sale.r))
        self.record("GenExchangeProof", fhd=self.address, shd=address_of(f["shd"]),
                    package=self.release["package_hash"])
        sale.state = "proved"
        self.send(sender, MessageKind.DDE_PROOF_DELIVERY, c=sale.c, proof=proof.to_bytes(),
                  ciphertext=ciphertext, s=sale.s, vk=vk_e_bytes, pk=pk_e_bytes, fhd=self.pub)

    def _claim_exchanges(self) -> None:
        pending = {s.s: s for s in self.sales.values() if s.state == "proved" and not s.claim_sent}
        if not pending:
            return
        for esc in self.read("contracts", "esc"):
            view = self.read("contract", esc)
            sale = pending.get(view["s"])
            if (sale is None or view["payee"] != self.address or view["claimed"]
                    or self.height - view["created_at"] >= view["e_prime"]):
                continue
            sale.claim_sent = True
            self.submit(ct.esc_claim_tx(self.address, esc, sale.t, sale.r))

    # -- delivery -------------------------------------------------------------

    def on_update_request(self, sender: str, f: dict[str, bytes]) -> None:
        if not self.deliver or self.package is None or f["update_hash"] != self.release["update_hash"]:
            return
        c = self.sim.rng.nonce()
        self.sessions[c] = DeliverySession(hub=sender, device=f["device"], n1=f["n1"], c=c)
        sig = self.sign(cc.Context.DISTRIBUTOR_NONCE, f["n1"])
        self.send(sender, MessageKind.DISTRIBUTOR_HELLO, distributor=self.pub, n1=f["n1"],
                  sig_n1=sig, c=c)

    def on_id_response(self, sender: str, f: dict[str, bytes]) -> None:
        sess = self.sessions.get(f["c"])
        if sess is None or sess.state != "hello" or sender != sess.hub:
            return
        session = f"dlv-{sess.c.hex()[:12]}"
        msg = id_response_message(f["c"], f["n2"], self.sim.legacy)
        if not cc.verify_sig(f["device"], msg, f["sig_id"]):
            self.violation("IdResponseSignature", session=session)
            sess.state = "aborted"
            return
        self.release = self.read("contract", self.dsc)
        if f["device"] not in self.release["targets"]:
            self.record("SessionAbort", session=session, reason="DeviceNotInList")
            sess.state = "aborted"
            return
        sess.device = f["device"]
        self.prove_delivery(sess)

    def prove_delivery(self, sess: DeliverySession) -> None:
        sess.t = self.sim.rng.randbytes(KEY_SEED_SIZE)
        sess.r = ct.delivery_key(sess.t, sess.device, self.pub)
        sess.s = cc.hash(sess.r)
        self.sim.register_secret("r", sess.r, sess.s)
        pkg = self.package
        ciphertext = cc.sym_encrypt(pkg.update, sess.r, self.sim.rng)
        public = zk.PublicInputs(pkg.update_hash, ciphertext, sess.s)
        proof = self.sim.zk.prove(pkg.proving_key, public, zk.Witness(pkg.update, sess.r))
        self.record("GenProof", distributor=self.address, device=sess.device,
                    update=pkg.update_hash, session=f"dlv-{sess.c.hex()[:12]}")
        sess.state = "proved"
        self.send(sess.hub, MessageKind.ZK_PROOF_DELIVERY, c=sess.c, proof=proof.to_bytes(),
                  ciphertext=ciphertext, s=sess.s, vk=pkg.verifying_key.to_bytes(), sig_m=pkg.sig_m)

    def on_pod_forward(self, sender: str, f: dict[str, bytes]) -> None:
        sess = self.sessions.get(f["c"])
        if sess is None or sess.state not in ("proved", "submitted") or sender != sess.hub:
            return
        msg = ct.pod_message(self.release["update_hash"], sess.s, self.sim.legacy)
        if not cc.verify_sig(sess.device, msg, f["pod"]):
            self.violation("PodSignature", session=f"dlv-{sess.c.hex()[:12]}")
            return
        self.redeem(sess, f["pod"])

    def redeem(self, sess: DeliverySession, pod: bytes) -> None:
        sess.state = "submitted"
        sess.submissions += 1
        self.submit(ct.submit_pod_tx(self.address, self.dsc, sess.device, sess.t, sess.r, sess.s, pod))

    def on_receipt(self, receipt: Receipt) -> None:
        if receipt.call == "create_esc":
            p = self.purchase
            if receipt.ok and p.state == "esc_pending":
                p.esc = receipt.result
                e_prime = self.esc_expiry if self.esc_expiry is not None else self.release["e"]
                p.esc_expires = receipt.height + e_prime
                p.state = "esc_live"
            elif not receipt.ok:
                self.record("ExchangeAbort", reason=receipt.error)
                p.state = "dde_idle"

    def busy(self) -> bool:
        if self.release is None:
            return False
        if dsc_expired(self.release, self.height) and self.purchase.state != "esc_live":
            return False
        if self.package is None and self.purchase.state not in ("gave_up",):
            return True
        return any(s.state == "proved" and not s.claim_sent for s in self.sales.values())
