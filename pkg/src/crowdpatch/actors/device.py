from __future__ import annotations

from typing import TYPE_CHECKING

from .. import contracts as ct
from .. import crypto_core as cc
from ..messages import MessageKind
from .base import Actor

if TYPE_CHECKING:
    from ..simulation import Simulation


class DeviceRefusal(Exception):
    pass


class BadManufacturerSignature(DeviceRefusal):
    pass


class HashMismatch(DeviceRefusal):
    pass


class NoCommitment(DeviceRefusal):
    pass


def id_response_message(c: bytes, n2: bytes, legacy: bool) -> cc.CanonicalMessage:
    if legacy:
        # legacy scheme: raw signature over the challenge, no device nonce
        return cc.CanonicalMessage.of(cc.Context.ID_RESPONSE, c, raw=True)
    return cc.CanonicalMessage.of(cc.Context.ID_RESPONSE, c, n2)


class IoTDevice(Actor):
    """Constrained device: talks only to its hub and trusts it.

    It knows its own key pair and the manufacturer's public key, nothing
    else. It will only sign a PoD after authenticating ``sig_m`` and only
    install bytes whose hash matches an authenticated update hash.
    """

    role = "device"

    def __init__(self, name: str, sim: Simulation, *, manufacturer_pub: bytes, hub: str,
                 keys: cc.KeyPair | None = None):
        super().__init__(name, sim, keys)
        self.manufacturer_pub = manufacturer_pub
        self.hub = hub
        self.commitments: dict[bytes, set[bytes]] = {}
        self.installed_update_hash: bytes | None = None

    # operations

    def iot_sign_id(self, c: bytes) -> tuple[bytes, bytes]:
        legacy = self.sim.legacy
        n2 = b"" if legacy else self.sim.rng.nonce()
        sig = cc.sign(self.keys.private, id_response_message(c, n2, legacy)).value
        return n2, sig

    def iot_issue_pod(self, update_hash: bytes, sig_m: bytes, s: bytes) -> bytes:
        if not cc.verify_sig(self.manufacturer_pub, ct.manufacturer_message(update_hash), sig_m):
            raise BadManufacturerSignature(update_hash.hex()[:16])
        self.commitments.setdefault(update_hash, set()).add(s)
        return cc.sign(self.keys.private, ct.pod_message(update_hash, s, self.sim.legacy)).value

    def iot_finalize(self, update: bytes, hub_pub: bytes) -> bytes:
        if not self.commitments:
            raise NoCommitment("no authenticated update hash")
        update_hash = cc.hash(update)
        if update_hash not in self.commitments:
            raise HashMismatch(update_hash.hex()[:16])
        if self.installed_update_hash != update_hash:
            self.installed_update_hash = update_hash
            self.record("UpdateInstalled", device=self.pub, update=update_hash)
        return cc.sign(self.keys.private, ct.pofd_message(update_hash, hub_pub)).value

    # message handlers; anything not from the managing hub is ignored

    def on_id_challenge(self, sender: str, f: dict[str, bytes]) -> None:
        if sender != self.hub:
            return
        n2, sig = self.iot_sign_id(f["c"])
        self.send(self.hub, MessageKind.ID_RESPONSE, c=f["c"], n2=n2, sig_id=sig, device=self.pub)

    def on_pod_request(self, sender: str, f: dict[str, bytes]) -> None:
        if sender != self.hub:
            return
        try:
            pod = self.iot_issue_pod(f["update_hash"], f["sig_m"], f["s"])
        except BadManufacturerSignature as exc:
            self.violation("BadManufacturerSignature", session=f["s"].hex()[:16], detail=str(exc))
            self.send(self.hub, MessageKind.POD_REFUSED, s=f["s"], reason=b"BadManufacturerSignature")
            return
        self.send(self.hub, MessageKind.POD_RESPONSE, s=f["s"], pod=pod)

    def on_final_delivery(self, sender: str, f: dict[str, bytes]) -> None:
        if sender != self.hub:
            return
        try:
            pofd = self.iot_finalize(f["update"], f["hub"])
        except DeviceRefusal as exc:
            self.violation(type(exc).__name__, session=self.name, detail=str(exc))
            self.send(self.hub, MessageKind.FINAL_REFUSED, reason=type(exc).__name__.encode())
            return
        self.send(self.hub, MessageKind.POFD_FORWARD, pofd=pofd)
