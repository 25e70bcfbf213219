"""Hub: gateway acting on behalf of its devices.

For each (DSC, device) pair the hub runs a small state machine::

    idle -> requested -> challenged -> proving -> pod -> await_key
         -> finalizing -> done

``requested`` broadcasts an UpdateRequest to the DHT announcers and waits
one block for hellos; the best-scoring verified hello wins. Any failed check
or timeout aborts the session and returns to ``idle`` until the retry budget
runs out. A distributor caught failing a cryptographic check is banned for
the task; one that merely timed out is skipped until every other candidate
has had a turn. Keys are matched by ``s`` across
every session that reached ``await_key``, so a late redemption by an
abandoned distributor still unlocks the update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from .. import contracts as ct
from .. import crypto_core as cc
from .. import zk
from ..ledger import NotFound, Receipt, address_of
from ..messages import MessageKind
from .base import Actor, dsc_expired

if TYPE_CHECKING:
    from ..simulation import Simulation


@dataclass
class Hello:
    distributor: str
    pub: bytes
    c: bytes
    score: int
    order: int


@dataclass
class Task:
    device: str
    device_pub: bytes
    dsc: str
    view: dict[str, Any]
    state: str = "idle"
    n1: bytes = b""
    deadline: int = 0
    hellos: list[Hello] = field(default_factory=list)
    contacted: list[str] = field(default_factory=list)
    chosen: Hello | None = None
    s: bytes = b""
    ciphertext: bytes = b""
    awaiting: dict[bytes, tuple[bytes, str]] = field(default_factory=dict)
    tried: set[str] = field(default_factory=set)
    banned: set[str] = field(default_factory=set)
    aborts: int = 0
    sessions: int = 0
    update: bytes = b""
    final_attempts: int = 0

    @property
    def session_id(self) -> str:
        return f"{self.device}#{self.sessions}"


class Hub(Actor):
    role = "hub"

    def __init__(self, name: str, sim: Simulation, *, devices: dict[str, bytes],
                 score_threshold: int = 0, session_timeout: int = 3, key_timeout: int = 3,
                 retry_budget: int = 5, fanout: int = 8, keys: cc.KeyPair | None = None):
        super().__init__(name, sim, keys)
        self.devices = dict(devices)  # device actor name -> public key
        self.score_threshold = score_threshold
        self.session_timeout = session_timeout
        self.key_timeout = key_timeout
        self.retry_budget = retry_budget
        self.fanout = fanout
        self.tasks: dict[tuple[str, str], Task] = {}
        self._by_n1: dict[bytes, Task] = {}
        self._hello_order = 0

    # -- task management -----------------------------------------------------

    def _discover(self) -> None:
        dscs = self.read("contracts", "dsc")
        for dev, pub in self.devices.items():
            for dsc in dscs:
                if (dsc, dev) in self.tasks:
                    continue
                view = self.read("contract", dsc)
                if pub in view["targets"]:
                    self.tasks[(dsc, dev)] = Task(dev, pub, dsc, view)

    def _task_for_device(self, device: str, states: tuple[str, ...]) -> Task | None:
        for task in self.tasks.values():
            if task.device == device and task.state in states:
                return task
        return None

    def _task_for_c(self, c: bytes, states: tuple[str, ...]) -> Task | None:
        for task in self.tasks.values():
            if task.chosen is not None and task.chosen.c == c and task.state in states:
                return task
        return None

    def abort(self, task: Task, reason: str, culprit: str | None = None,
              ban: bool = False) -> None:
        self.record("SessionAbort", session=task.session_id, reason=reason,
                    distributor=culprit or "")
        if culprit:
            task.tried.add(culprit)
            if ban:
                task.banned.add(culprit)
        task.aborts += 1
        task.chosen = None
        task.hellos = []
        task.s = b""
        if task.aborts > self.retry_budget:
            task.state = "gave_up"
            self.record("HubGaveUp", session=task.session_id, device=task.device_pub)
        else:
            task.state = "idle"

    def score_of(self, task: Task, pub: bytes) -> int:
        return self.read("score", task.view["parent_ssc"], address_of(pub))

    # -- per-block driver ----------------------------------------------------

    def on_block(self) -> None:
        self._discover()
        for task in self.tasks.values():
            if task.state in ("done", "gave_up"):
                continue
            if dsc_expired(task.view, self.height) and task.state != "finalizing":
                task.state = "gave_up"
                self.record("HubGaveUp", session=task.session_id, device=task.device_pub,
                            reason="Expired")
                continue
            if task.awaiting and task.state not in ("finalizing",):
                if self._try_finalize(task):
                    continue
            self._advance(task)

    def _advance(self, task: Task) -> None:
        h = self.height
        if task.state == "idle":
            announcers = [d for d in self.sim.network.dht_lookup(task.view["update_hash"])
                          if d not in task.banned]
            candidates = [d for d in announcers if d not in task.tried]
            if not candidates and announcers:
                task.tried.clear()
                candidates = announcers
            candidates = candidates[: self.fanout]
            if not candidates:
                return
            task.sessions += 1
            task.n1 = self.sim.rng.nonce()
            self._by_n1[task.n1] = task
            task.hellos = []
            task.contacted = candidates
            task.state = "requested"
            task.deadline = h + self.session_timeout
            for d in candidates:
                self.send(d, MessageKind.UPDATE_REQUEST, update_hash=task.view["update_hash"],
                          n1=task.n1, device=task.device_pub, hub=self.pub)
        elif task.state == "requested":
            acceptable = [x for x in task.hellos if x.score >= self.score_threshold]
            for x in task.hellos:
                if x.score < self.score_threshold:
                    task.tried.add(x.distributor)
                    self.record("DistributorRejected", session=task.session_id,
                                distributor=x.distributor, score=x.score)
            task.hellos = []
            if acceptable:
                best = max(acceptable, key=lambda x: (x.score, -x.order))
                task.chosen = best
                task.state = "challenged"
                task.deadline = h + self.session_timeout
                self.record("DistributorChosen", session=task.session_id,
                            distributor=best.distributor, score=best.score)
                self.send(task.device, MessageKind.ID_CHALLENGE, c=best.c)
            elif h >= task.deadline:
                task.tried.update(task.contacted)
                self.abort(task, "NoAcceptableDistributor")
        elif task.state in ("challenged", "proving", "pod", "await_key") and h >= task.deadline:
            self.abort(task, f"Timeout:{task.state}", task.chosen.distributor if task.chosen else None)
        elif task.state == "finalizing" and h >= task.deadline:
            self._retry_final(task, "Timeout:finalizing")

    def _try_finalize(self, task: Task) -> bool:
        for s, (ciphertext, distributor) in task.awaiting.items():
            try:
                r = self.read("published_key", s)
            except NotFound:
                continue
            try:
                update = cc.sym_decrypt(ciphertext, r)
            except cc.WrongKey:
                self.violation("DecryptionFailure", session=task.session_id, distributor=distributor)
                continue
            if cc.hash(update) != task.view["update_hash"]:
                self.violation("UpdateHash", session=task.session_id, distributor=distributor)
                continue
            self.record("UpdateReadyForIoT", device=task.device_pub, update=task.view["update_hash"],
                        session=task.session_id, s=s)
            task.state = "finalizing"
            task.update = update
            task.final_attempts = 1
            task.deadline = self.height + self.session_timeout
            self.final_delivery(task, update)
            return True
        return False

    def final_delivery(self, task: Task, update: bytes) -> None:
        self.send(task.device, MessageKind.FINAL_DELIVERY, update=update, hub=self.pub)

    # -- message handlers ----------------------------------------------------

    def on_distributor_hello(self, sender: str, f: dict[str, bytes]) -> None:
        task = self._by_n1.get(f["n1"])
        if task is None or task.state != "requested" or sender not in task.contacted:
            return
        msg = cc.CanonicalMessage.of(cc.Context.DISTRIBUTOR_NONCE, f["n1"])
        if not cc.verify_sig(f["distributor"], msg, f["sig_n1"]):
            self.violation("DistributorSignature", session=task.session_id, distributor=sender)
            task.banned.add(sender)
            return
        if any(x.distributor == sender for x in task.hellos):
            return
        self._hello_order += 1
        task.hellos.append(Hello(sender, f["distributor"], f["c"],
                                 self.score_of(task, f["distributor"]), self._hello_order))

    def on_id_response(self, sender: str, f: dict[str, bytes]) -> None:
        task = self._task_for_device(sender, ("challenged",))
        if task is None or f["c"] != task.chosen.c:
            return
        task.state = "proving"
        self.send(task.chosen.distributor, MessageKind.ID_RESPONSE, c=f["c"], n2=f["n2"],
                  sig_id=f["sig_id"], device=task.device_pub)

    def on_zk_proof_delivery(self, sender: str, f: dict[str, bytes]) -> None:
        task = self._task_for_c(f["c"], ("proving",))
        if task is None or sender != task.chosen.distributor:
            return
        if cc.hash(f["vk"]) != task.view["vk_d_hash"]:
            self.violation("VerifyingKeyHash", session=task.session_id, distributor=sender)
            self.abort(task, "VerifyingKeyHash", sender, ban=True)
            return
        try:
            vk = zk.key_from_bytes(f["vk"])
            proof = zk.Proof.from_bytes(f["proof"])
        except ValueError:
            vk = proof = None
        public = zk.PublicInputs(task.view["update_hash"], f["ciphertext"], f["s"])
        if not isinstance(vk, zk.VerifyingKey) or not self.sim.zk.verify(vk, public, proof):
            self.violation("ProofInvalid", session=task.session_id, distributor=sender)
            self.abort(task, "ProofInvalid", sender, ban=True)
            return
        self.record("ZkVerified", session=task.session_id, statement="S_D", s=f["s"],
                    distributor=sender)
        task.s, task.ciphertext = f["s"], f["ciphertext"]
        task.state = "pod"
        self.record("PodRequested", session=task.session_id, s=f["s"])
        self.send(task.device, MessageKind.POD_REQUEST, update_hash=task.view["update_hash"],
                  sig_m=f["sig_m"], s=f["s"])

    def on_pod_response(self, sender: str, f: dict[str, bytes]) -> None:
        task = self._task_for_device(sender, ("pod",))
        if task is None or f["s"] != task.s:
            return
        task.awaiting[task.s] = (task.ciphertext, task.chosen.distributor)
        task.state = "await_key"
        task.deadline = self.height + self.key_timeout
        self.send(task.chosen.distributor, MessageKind.POD_FORWARD, c=task.chosen.c,
                  device=task.device_pub, pod=f["pod"])

    def on_pod_refused(self, sender: str, f: dict[str, bytes]) -> None:
        task = self._task_for_device(sender, ("pod",))
        if task is not None and f["s"] == task.s:
            self.abort(task, "PodRefused:" + f["reason"].decode(), task.chosen.distributor,
                       ban=True)

    def on_pofd_forward(self, sender: str, f: dict[str, bytes]) -> None:
        task = self._task_for_device(sender, ("finalizing",))
        if task is None:
            return
        task.state = "done"
        self.submit(ct.submit_pofd_tx(self.address, task.dsc, task.device_pub, f["pofd"]))

    def on_final_refused(self, sender: str, f: dict[str, bytes]) -> None:
        task = self._task_for_device(sender, ("finalizing",))
        if task is None:
            return
        # the device only refuses bytes that fail its hash check; resend ours
        self._retry_final(task, f["reason"].decode())

    def _retry_final(self, task: Task, reason: str) -> None:
        if task.final_attempts > self.retry_budget:
            task.state = "gave_up"
            self.record("HubGaveUp", session=task.session_id, device=task.device_pub, reason=reason)
            return
        task.final_attempts += 1
        task.deadline = self.height + self.session_timeout
        self.record("FinalDeliveryRetry", session=task.session_id, reason=reason)
        self.final_delivery(task, task.update)

    def on_receipt(self, receipt: Receipt) -> None:
        if receipt.call == "submit_pofd" and not receipt.ok:
            self.record("PofdRejected", error=receipt.error)

    def busy(self) -> bool:
        return any(t.state not in ("done", "gave_up") for t in self.tasks.values())
