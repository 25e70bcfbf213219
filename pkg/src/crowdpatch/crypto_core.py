"""Byte-level primitives shared by every other module.

Hashing is SHA-256, symmetric encryption is AES-256-GCM and signatures are
Ed25519 (deterministic). All randomness comes from a :class:`SeededRandom`
owned by the simulation, so identical seeds reproduce identical bytes.

Every protocol-level concatenation goes through :func:`canonical_encode`,
which prefixes a context tag and length-prefixes each part. The only place
raw concatenation survives is ``CanonicalMessage(raw=True)``, used to model
the vulnerable framing of the legacy ID-challenge scheme.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

DIGEST_SIZE = 32
SYM_KEY_SIZE = 32
NONCE_SIZE = 16
AEAD_NONCE_SIZE = 12
_LEN_PREFIX = 4

Digest = bytes
SymKey = bytes
Nonce = bytes
Ciphertext = bytes


class CryptoError(Exception):
    pass


class WrongKey(CryptoError):
    """Authenticated decryption failed."""


class Context(IntEnum):
    """Domain-separation tags prepended to every canonical encoding."""

    MANUFACTURER = 1
    ID_RESPONSE = 2
    POD = 3
    POFD = 4
    DISTRIBUTOR_NONCE = 5
    DDE_CHALLENGE = 6
    # key-derivation inputs, not signatures
    DELIVERY_KEY = 7
    EXCHANGE_KEY = 8
    # structured payloads (packages, serialized keys)
    PACKAGE = 9
    ZK_KEY = 10


def canonical_encode(context: int, parts: Iterable[bytes]) -> bytes:
    out = bytearray([int(context)])
    for part in parts:
        part = bytes(part)
        out += len(part).to_bytes(_LEN_PREFIX, "big")
        out += part
    return bytes(out)


def canonical_decode(data: bytes) -> tuple[int, list[bytes]]:
    """Inverse of :func:`canonical_encode`.

    Raises ``ValueError`` on truncated or trailing-garbage input.
    """
    if not data:
        raise ValueError("empty encoding")
    context = data[0]
    parts = []
    i = 1
    while i < len(data):
        if i + _LEN_PREFIX > len(data):
            raise ValueError("truncated length prefix")
        n = int.from_bytes(data[i : i + _LEN_PREFIX], "big")
        i += _LEN_PREFIX
        if i + n > len(data):
            raise ValueError("truncated part")
        parts.append(bytes(data[i : i + n]))
        i += n
    return context, parts


@dataclass(frozen=True)
class CanonicalMessage:
    context: Context
    parts: tuple[bytes, ...]
    raw: bool = False

    @classmethod
    def of(cls, context: Context, *parts: bytes, raw: bool = False) -> CanonicalMessage:
        return cls(context, tuple(bytes(p) for p in parts), raw)

    def encode(self) -> bytes:
        if self.raw:
            # legacy framing: bare concatenation, no tag
            return b"".join(self.parts)
        return canonical_encode(self.context, self.parts)


@dataclass(frozen=True)
class KeyPair:
    public: bytes
    private: bytes


@dataclass(frozen=True)
class Signature:
    """Signature octets plus the context the signer intended.

    The context label is bookkeeping only; :func:`verify_sig` looks at the
    octets and the encoded message, never at this label.
    """

    value: bytes
    context: Context


def hash(data: bytes) -> Digest:  # noqa: A001 - mirrors the protocol's H()
    return hashlib.sha256(data).digest()


def hash_parts(context: Context, *parts: bytes) -> Digest:
    return hash(canonical_encode(context, parts))


def keypair_from_seed(seed: bytes) -> KeyPair:
    if len(seed) != 32:
        raise ValueError("Ed25519 seed must be 32 octets")
    sk = Ed25519PrivateKey.from_private_bytes(seed)
    pub = sk.public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )
    return KeyPair(public=pub, private=seed)


def sign(private: bytes, msg: CanonicalMessage) -> Signature:
    sk = Ed25519PrivateKey.from_private_bytes(private)
    return Signature(sk.sign(msg.encode()), msg.context)


def verify_sig(public: bytes, msg: CanonicalMessage, sig: Signature | bytes) -> bool:
    value = sig.value if isinstance(sig, Signature) else bytes(sig)
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(value, msg.encode())
    except (InvalidSignature, ValueError):
        return False
    return True


def _check_key(key: bytes) -> None:
    if len(key) != SYM_KEY_SIZE:
        raise ValueError(f"symmetric key must be {SYM_KEY_SIZE} octets, got {len(key)}")


def sym_encrypt(plaintext: bytes, key: SymKey, rng: random.Random) -> Ciphertext:
    """AES-256-GCM with a nonce drawn from the run's seeded RNG."""
    _check_key(key)
    nonce = rng.randbytes(AEAD_NONCE_SIZE)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def sym_decrypt(ciphertext: Ciphertext, key: SymKey) -> bytes:
    _check_key(key)
    if len(ciphertext) < AEAD_NONCE_SIZE + 16:
        raise WrongKey("ciphertext too short")
    nonce, body = ciphertext[:AEAD_NONCE_SIZE], ciphertext[AEAD_NONCE_SIZE:]
    try:
        return AESGCM(key).decrypt(nonce, body, None)
    except InvalidTag as exc:
        raise WrongKey("authentication failed") from exc


class SeededRandom(random.Random):
    """The single randomness source of a run.

    Tracks issued nonces so that a repeat (astronomically unlikely with 128
    bits) is caught rather than silently weakening freshness.
    """

    def __init__(self, seed: int | None = None) -> None:
        super().__init__(seed)
        self._issued: set[bytes] = set()

    def nonce(self) -> Nonce:
        n = self.randbytes(NONCE_SIZE)
        if n in self._issued:
            raise CryptoError("nonce repeated within run")
        self._issued.add(n)
        return n

    def sym_key(self) -> SymKey:
        return self.randbytes(SYM_KEY_SIZE)

    def keypair(self) -> KeyPair:
        return keypair_from_seed(self.randbytes(32))
