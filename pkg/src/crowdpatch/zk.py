"""Symbolic zk-SNARK backend for the two encryption statements.

Both statements have the same form: the prover knows a payload ``x`` and a
key ``k`` such that ``key_hash = H(k)``, ``file_hash = H(x)`` and
``ciphertext`` decrypts to ``x`` under ``k``. ``S_D`` covers the bare update,
``S_E`` the whole package; they only differ in payload size.

Proofs are HMAC tags over ``(setup id, public inputs)`` under a trapdoor that
never leaves the :class:`ZkBackend`. Only :meth:`ZkBackend.prove` mints them
and it refuses unless the relation holds, so soundness is structural and no
witness byte can end up inside a proof.
"""

from __future__ import annotations

import hmac
import random
from dataclasses import dataclass, field
from enum import Enum

from . import crypto_core as cc


class ZkError(Exception):
    pass


class InvalidWitness(ZkError):
    """The witness does not satisfy the statement; no proof is produced."""


class StatementKind(Enum):
    S_D = "S_D"
    S_E = "S_E"


@dataclass(frozen=True)
class StatementShape:
    kind: StatementKind
    payload_size: int


@dataclass(frozen=True)
class ProvingKey:
    shape: StatementShape
    id: bytes

    def to_bytes(self) -> bytes:
        return _key_bytes(b"pk", self)


@dataclass(frozen=True)
class VerifyingKey:
    shape: StatementShape
    id: bytes

    def to_bytes(self) -> bytes:
        return _key_bytes(b"vk", self)


def _key_bytes(role: bytes, key: ProvingKey | VerifyingKey) -> bytes:
    return cc.canonical_encode(
        cc.Context.ZK_KEY,
        [
            role,
            key.shape.kind.value.encode(),
            key.shape.payload_size.to_bytes(8, "big"),
            key.id,
        ],
    )


def key_from_bytes(data: bytes) -> ProvingKey | VerifyingKey:
    ctx, parts = cc.canonical_decode(data)
    if ctx != cc.Context.ZK_KEY or len(parts) != 4:
        raise ValueError("not a serialized zk key")
    role, kind, size, key_id = parts
    shape = StatementShape(StatementKind(kind.decode()), int.from_bytes(size, "big"))
    if role == b"pk":
        return ProvingKey(shape, key_id)
    if role == b"vk":
        return VerifyingKey(shape, key_id)
    raise ValueError(f"unknown key role {role!r}")


@dataclass(frozen=True)
class PublicInputs:
    file_hash: cc.Digest
    ciphertext: cc.Ciphertext
    key_hash: cc.Digest

    def encode(self) -> bytes:
        return cc.canonical_encode(0, [self.file_hash, self.ciphertext, self.key_hash])


@dataclass(frozen=True)
class Witness:
    file: bytes = field(repr=False)
    key: cc.SymKey = field(repr=False)

    def __reduce__(self):
        raise TypeError("witnesses are never serialized")


@dataclass(frozen=True)
class Proof:
    setup_id: bytes
    tag: bytes

    def to_bytes(self) -> bytes:
        return cc.canonical_encode(0, [self.setup_id, self.tag])

    @classmethod
    def from_bytes(cls, data: bytes) -> Proof:
        _, parts = cc.canonical_decode(data)
        if len(parts) != 2:
            raise ValueError("malformed proof")
        return cls(parts[0], parts[1])


def relation_holds(shape: StatementShape, public: PublicInputs, witness: Witness) -> bool:
    """Evaluate ``key_hash = H(k) and file_hash = H(x) and ciphertext = Enc(x, k)``.

    The encryption clause is checked by authenticated decryption since the
    AEAD nonce makes ``Enc`` randomized. The payload must also match the
    shape's size, which is what distinguishes the two statements.
    """
    if len(witness.file) != shape.payload_size or len(witness.key) != cc.SYM_KEY_SIZE:
        return False
    key_ok = cc.hash(witness.key) == public.key_hash
    file_ok = cc.hash(witness.file) == public.file_hash
    try:
        enc_ok = cc.sym_decrypt(public.ciphertext, witness.key) == witness.file
    except cc.WrongKey:
        enc_ok = False
    return key_ok and file_ok and enc_ok


class ZkBackend:
    """Per-run trusted setup authority and proof mint."""

    def __init__(self) -> None:
        self._trapdoors: dict[bytes, bytes] = {}
        self.minted: list[tuple[bytes, bytes]] = []
        self.verified: list[tuple[bytes, bytes]] = []

    def setup(
        self, shape: StatementShape, rng: random.Random
    ) -> tuple[ProvingKey, VerifyingKey]:
        setup_id = rng.randbytes(16)
        self._trapdoors[setup_id] = rng.randbytes(32)
        return ProvingKey(shape, setup_id), VerifyingKey(shape, setup_id)

    def _tag(self, setup_id: bytes, public: PublicInputs) -> bytes | None:
        trapdoor = self._trapdoors.get(setup_id)
        if trapdoor is None:
            return None
        return hmac.new(trapdoor, setup_id + public.encode(), "sha256").digest()

    def prove(self, pk: ProvingKey, public: PublicInputs, witness: Witness) -> Proof:
        if pk.id not in self._trapdoors:
            raise ZkError("proving key not issued by this backend")
        if not relation_holds(pk.shape, public, witness):
            raise InvalidWitness(f"relation {pk.shape.kind.value} does not hold")
        tag = self._tag(pk.id, public)
        self.minted.append((pk.id, public.encode()))
        return Proof(pk.id, tag)

    def verify(self, vk: VerifyingKey, public: PublicInputs, proof: Proof) -> bool:
        if proof.setup_id != vk.id:
            return False
        expected = self._tag(vk.id, public)
        ok = expected is not None and hmac.compare_digest(expected, proof.tag)
        if ok:
            self.verified.append((vk.id, public.encode()))
        return ok
