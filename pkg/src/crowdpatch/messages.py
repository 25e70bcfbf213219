"""Wire formats for every P2P and hub-local message.

Each kind has a fixed field order. A payload is
``canonical_encode(kind.tag, [field octets in order])``; ``unpack`` refuses
anything with the wrong tag or arity. See ``docs/protocol.md`` for the
sequence diagrams.
"""

from __future__ import annotations

from enum import Enum

from .crypto_core import canonical_decode, canonical_encode


class MessageKind(Enum):
    # delivery (hub <-> distributor over P2P, hub <-> device over the LAN)
    UPDATE_REQUEST = (100, ("update_hash", "n1", "device", "hub"))
    DISTRIBUTOR_HELLO = (101, ("distributor", "n1", "sig_n1", "c"))
    ID_CHALLENGE = (102, ("c",))
    ID_RESPONSE = (103, ("c", "n2", "sig_id", "device"))
    ZK_PROOF_DELIVERY = (104, ("c", "proof", "ciphertext", "s", "vk", "sig_m"))
    POD_REQUEST = (105, ("update_hash", "sig_m", "s"))
    POD_RESPONSE = (106, ("s", "pod"))
    POD_REFUSED = (107, ("s", "reason"))
    POD_FORWARD = (108, ("c", "device", "pod"))
    FINAL_DELIVERY = (109, ("update", "hub"))
    POFD_FORWARD = (110, ("pofd",))
    FINAL_REFUSED = (111, ("reason",))
    # seeding and distributor-distributor exchange
    SEED_REQUEST = (120, ("package_hash", "distributor"))
    SEED_DELIVERY = (121, ("package", "pk_e", "vk_e"))
    SEED_REFUSED = (122, ("package_hash",))
    DDE_REQUEST = (130, ("package_hash", "shd"))
    DDE_CHALLENGE = (131, ("c",))
    DDE_CHALLENGE_RESPONSE = (132, ("c", "shd", "sig"))
    DDE_PROOF_DELIVERY = (133, ("c", "proof", "ciphertext", "s", "vk", "pk", "fhd"))
    DDE_REFUSED = (134, ("c", "reason"))

    def __init__(self, tag: int, fields: tuple[str, ...]):
        self.tag = tag
        self.fields = fields

    @property
    def label(self) -> str:
        return "".join(w.capitalize() for w in self.name.split("_"))

    @classmethod
    def from_tag(cls, tag: int) -> MessageKind:
        for kind in cls:
            if kind.tag == tag:
                return kind
        raise ValueError(f"unknown message tag {tag}")


# P2P envelopes may be seen and sent by anyone; these never leave the LAN
LOCAL_KINDS = frozenset({
    MessageKind.ID_CHALLENGE, MessageKind.ID_RESPONSE, MessageKind.POD_REQUEST,
    MessageKind.POD_RESPONSE, MessageKind.POD_REFUSED, MessageKind.FINAL_DELIVERY,
    MessageKind.POFD_FORWARD, MessageKind.FINAL_REFUSED,
})
SEED_KINDS = frozenset({MessageKind.SEED_DELIVERY})


class MalformedMessage(ValueError):
    pass


def pack(kind: MessageKind, **fields: bytes) -> bytes:
    missing = set(kind.fields) - set(fields)
    extra = set(fields) - set(kind.fields)
    if missing or extra:
        raise MalformedMessage(f"{kind.label}: missing {sorted(missing)} extra {sorted(extra)}")
    return canonical_encode(kind.tag, [bytes(fields[name]) for name in kind.fields])


def unpack(payload: bytes, expected: MessageKind | None = None) -> tuple[MessageKind, dict[str, bytes]]:
    try:
        tag, parts = canonical_decode(payload)
        kind = MessageKind.from_tag(tag)
    except ValueError as exc:
        raise MalformedMessage(str(exc)) from exc
    if expected is not None and kind is not expected:
        raise MalformedMessage(f"expected {expected.label}, got {kind.label}")
    if len(parts) != len(kind.fields):
        raise MalformedMessage(f"{kind.label}: {len(parts)} fields, want {len(kind.fields)}")
    return kind, dict(zip(kind.fields, parts))
