"""Common plumbing for protocol participants."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from .. import crypto_core as cc
from .. import zk
from ..ledger import Receipt, Transaction, address_of
from ..messages import MalformedMessage, MessageKind, pack, unpack

if TYPE_CHECKING:
    from ..network import Envelope
    from ..simulation import Simulation

log = logging.getLogger(__name__)


class Actor:
    role = "actor"

    def __init__(self, name: str, sim: Simulation, keys: cc.KeyPair | None = None):
        self.name = name
        self.sim = sim
        self.keys = keys if keys is not None else sim.rng.keypair()
        self.address = address_of(self.keys.public)

    @property
    def pub(self) -> bytes:
        return self.keys.public

    @property
    def height(self) -> int:
        return self.sim.ledger.height

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"

    # hooks driven by the engine

    def start(self) -> None:
        pass

    def on_block(self) -> None:
        pass

    def on_receipt(self, receipt: Receipt) -> None:
        pass

    def busy(self) -> bool:
        return False

    def handle(self, env: Envelope) -> None:
        try:
            kind, fields = unpack(env.payload)
        except MalformedMessage as exc:
            self.violation("MalformedMessage", session=f"env-{env.id}", detail=str(exc))
            return
        handler = getattr(self, "on_" + kind.name.lower(), None)
        if handler is not None:
            handler(env.sender, fields)

    # helpers

    def send(self, to: str, kind: MessageKind, **fields: bytes) -> None:
        self.sim.network.send(self.name, to, kind, pack(kind, **fields))

    def submit(self, tx: Transaction) -> int:
        return self.sim.submit(self, tx)

    def read(self, query: str, *args: Any) -> Any:
        return self.sim.ledger.read_public(query, *args)

    def record(self, kind: str, **payload: Any) -> int:
        return self.sim.record(self.name, kind, **payload)

    def violation(self, check: str, session: str, **detail: Any) -> None:
        self.record("Violation", check=check, session=session, **detail)

    def sign(self, context: cc.Context, *parts: bytes, raw: bool = False) -> bytes:
        return cc.sign(self.keys.private, cc.CanonicalMessage.of(context, *parts, raw=raw)).value


@dataclass(frozen=True)
class Package:
    """The seeded bundle: update, S_D key pair and the manufacturer signature."""

    update: bytes
    proving_key: zk.ProvingKey
    verifying_key: zk.VerifyingKey
    sig_m: bytes

    def to_bytes(self) -> bytes:
        return cc.canonical_encode(cc.Context.PACKAGE, [
            self.update, self.proving_key.to_bytes(), self.verifying_key.to_bytes(), self.sig_m,
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> Package:
        ctx, parts = cc.canonical_decode(data)
        if ctx != cc.Context.PACKAGE or len(parts) != 4:
            raise ValueError("not a package")
        update, pk, vk, sig_m = parts
        proving_key, verifying_key = zk.key_from_bytes(pk), zk.key_from_bytes(vk)
        if not isinstance(proving_key, zk.ProvingKey) or not isinstance(verifying_key, zk.VerifyingKey):
            raise ValueError("package keys have the wrong roles")
        return cls(update, proving_key, verifying_key, sig_m)

    @property
    def update_hash(self) -> bytes:
        return cc.hash(self.update)

    def digest(self) -> bytes:
        return cc.hash(self.to_bytes())


def dsc_expired(view: dict[str, Any], height: int) -> bool:
    return height - view["created_at"] >= view["e"]
