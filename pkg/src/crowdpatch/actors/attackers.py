"""Malicious participants used by the attack scenarios.

Each class overrides only the step it subverts; everything else is the
honest behaviour it inherits. None of them holds another party's private
key or can mint proofs.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from .. import contracts as ct
from .. import crypto_core as cc
from .. import zk
from ..ledger import Receipt, Transaction
from ..messages import MessageKind
from .base import Actor
from .distributor import KEY_SEED_SIZE, DeliverySession, Distributor
from .hub import Hub, Task

if TYPE_CHECKING:
    from ..network import Adversary
    from ..simulation import Simulation


class ChallengeForger(Actor):
    """Poses as a distributor and crafts the ID challenge ``c = U_h || s``.

    Under raw framing the device's signature over ``c`` is byte-identical
    to a PoD over ``(U_h, s)``, so the forger can redeem it without ever
    holding the update. Under canonical framing the same signature is
    bound to the ID-response context and a device nonce and the DSC
    rejects it.
    """

    role = "attacker"

    def __init__(self, name: str, sim: Simulation, *, keys: cc.KeyPair | None = None):
        super().__init__(name, sim, keys)
        self.dsc: str | None = None
        self.update_hash: bytes | None = None
        self.forged: dict[bytes, tuple[bytes, bytes, bytes, bytes]] = {}
        self.outcomes: list[Receipt] = []

    def on_block(self) -> None:
        if self.dsc is not None:
            return
        dscs = self.read("contracts", "dsc")
        if dscs:
            self.dsc = dscs[0]
            self.update_hash = self.read("contract", self.dsc)["update_hash"]
            # announce content it does not hold
            self.sim.network.dht_announce(self.update_hash, self.name)

    def on_update_request(self, sender: str, f: dict[str, bytes]) -> None:
        if f["update_hash"] != self.update_hash:
            return
        t = self.sim.rng.randbytes(KEY_SEED_SIZE)
        r = ct.delivery_key(t, f["device"], self.pub)
        s = cc.hash(r)
        c = f["update_hash"] + s
        self.forged[c] = (f["device"], t, r, s)
        self.record("ChallengeCrafted", device=f["device"], s=s)
        sig = self.sign(cc.Context.DISTRIBUTOR_NONCE, f["n1"])
        self.send(sender, MessageKind.DISTRIBUTOR_HELLO, distributor=self.pub, n1=f["n1"],
                  sig_n1=sig, c=c)

    def on_id_response(self, sender: str, f: dict[str, bytes]) -> None:
        entry = self.forged.pop(f["c"], None)
        if entry is None:
            return
        device, t, r, s = entry
        self.record("ForgedPodSubmitted", device=device, s=s)
        self.submit(ct.submit_pod_tx(self.address, self.dsc, device, t, r, s, f["sig_id"]))

    def on_receipt(self, receipt: Receipt) -> None:
        self.outcomes.append(receipt)


class PodThief(Actor):
    """Watches the mempool for PoD submissions and races them.

    For each honest ``submit_pod`` it front-runs two transactions: a fresh
    ``(t', r', s')`` bound to its own key with the captured PoD, and a
    verbatim copy of the captured ``(t, r, s, pod)`` under its own sender.
    All values are built through the adversary's knowledge base.
    """

    role = "attacker"

    def __init__(self, name: str, sim: Simulation, *, keys: cc.KeyPair | None = None):
        super().__init__(name, sim, keys)
        self.adversary: Adversary | None = None
        self.outcomes: list[Receipt] = []

    def attach(self, adversary: Adversary) -> None:
        self.adversary = adversary
        adversary.knowledge.learn(self.pub, "own-key")
        adversary.mempool_hooks.append(self.observe)
        adversary.tx_front.add(self.address)

    def observe(self, tx: Transaction) -> None:
        if tx.sender == self.address or tx.call != "submit_pod":
            return
        k = self.adversary.knowledge
        a = tx.args
        k.require(a["device"], a["t"], a["r"], a["s"], a["pod"])
        t2 = k.fresh(KEY_SEED_SIZE, self.adversary.rng)
        r2 = k.derive_hash(k.derive_encode(cc.Context.DELIVERY_KEY, [t2, a["device"], self.pub]))
        s2 = k.derive_hash(r2)
        self.record("PodIntercepted", victim=tx.sender, device=a["device"])
        self.submit(ct.submit_pod_tx(self.address, tx.target, a["device"], t2, r2, s2, a["pod"]))
        self.submit(ct.submit_pod_tx(self.address, tx.target, a["device"], a["t"], a["r"], a["s"],
                                     a["pod"]))

    def on_receipt(self, receipt: Receipt) -> None:
        self.outcomes.append(receipt)


class WithholdingDistributor(Distributor):
    """Runs the delivery honestly up to the PoD and then never redeems it."""

    def redeem(self, sess: DeliverySession, pod: bytes) -> None:
        if sess.state != "withheld":
            sess.state = "withheld"
            self.record("PodWithheld", device=sess.device)


class TamperingDistributor(Distributor):
    """Tries to deliver a modified update.

    The prover refuses the false statement, so it falls back to sending an
    arbitrary token shaped like a proof.
    """

    def tampered(self) -> bytes:
        u = bytearray(self.package.update)
        u[0] ^= 0xFF
        return bytes(u)

    def prove_delivery(self, sess: DeliverySession) -> None:
        pkg = self.package
        sess.t = self.sim.rng.randbytes(KEY_SEED_SIZE)
        sess.r = ct.delivery_key(sess.t, sess.device, self.pub)
        sess.s = cc.hash(sess.r)
        bad = self.tampered()
        ciphertext = cc.sym_encrypt(bad, sess.r, self.sim.rng)
        public = zk.PublicInputs(pkg.update_hash, ciphertext, sess.s)
        try:
            proof = self.sim.zk.prove(pkg.proving_key, public, zk.Witness(bad, sess.r))
        except zk.InvalidWitness:
            self.record("ProveRefused", device=sess.device)
            proof = zk.Proof(pkg.verifying_key.id, self.sim.rng.randbytes(32))
        sess.state = "proved"
        self.send(sess.hub, MessageKind.ZK_PROOF_DELIVERY, c=sess.c, proof=proof.to_bytes(),
                  ciphertext=ciphertext, s=sess.s, vk=pkg.verifying_key.to_bytes(), sig_m=pkg.sig_m)


class CompromisedHub(Hub):
    """Hands its devices a modified update instead of the decrypted one."""

    def final_delivery(self, task: Task, update: bytes) -> None:
        bad = bytearray(update)
        bad[-1] ^= 0x01
        self.send(task.device, MessageKind.FINAL_DELIVERY, update=bytes(bad), hub=self.pub)
