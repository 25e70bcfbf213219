"""Deterministic message scheduler, DHT index and Dolev-Yao adversary.

Every envelope passes through the adversary at send time. The adversary sees
all of them, may drop, delay, replay or substitute them according to its
script, and accumulates everything it sees in a :class:`Knowledge` base.
Substituted payloads must be derivable from that knowledge; the network
rejects anything else with :class:`CapabilityViolation`.

Ledger transactions are out of the adversary's reach except for bounded
deferral and within-block reordering, applied through
:meth:`Adversary.schedule_block`.
"""

from __future__ import annotations

import logging
import random
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Callable, Iterable

from . import crypto_core as cc
from .ledger import Transaction
from .messages import LOCAL_KINDS, SEED_KINDS, MessageKind

if TYPE_CHECKING:
    from .simulation import Simulation

log = logging.getLogger(__name__)


class CapabilityViolation(Exception):
    """The adversary tried to emit a value it cannot derive."""


@dataclass(frozen=True)
class Envelope:
    id: int
    sender: str
    to: str
    kind: MessageKind
    payload: bytes
    deliver_at: int
    sent_at: int = 0
    seq: int = -1  # trace position of the MessageSent event
    injected: bool = False

    @property
    def local(self) -> bool:
        return self.kind in LOCAL_KINDS


class DhtIndex:
    """Content digest -> announcing actors, in announcement order."""

    def __init__(self) -> None:
        self._index: dict[bytes, OrderedDict[str, None]] = {}

    def announce(self, digest: bytes, actor: str) -> None:
        self._index.setdefault(digest, OrderedDict())[actor] = None

    def withdraw(self, digest: bytes, actor: str) -> None:
        self._index.get(digest, OrderedDict()).pop(actor, None)

    def lookup(self, digest: bytes) -> list[str]:
        return list(self._index.get(digest, ()))


# -- adversary knowledge -------------------------------------------------------


@dataclass
class KnownValue:
    value: bytes
    seq: int
    source: str  # message kind label, "ledger", or "derived"


class Knowledge:
    """Symbolic knowledge base.

    Observed payloads are decomposed into their canonical parts (recursively
    where a part is itself a canonical encoding). New values enter only via
    the derivation methods, each of which checks its inputs are known.
    """

    def __init__(self, keypair: cc.KeyPair | None = None) -> None:
        self.items: dict[bytes, KnownValue] = {}
        self.keypair = keypair
        self._seq = 0
        if keypair is not None:
            self._add(keypair.public, "own-key")
            self._add(keypair.private, "own-key")

    def __contains__(self, value: bytes) -> bool:
        return bytes(value) in self.items

    def __iter__(self):
        return iter(self.items.values())

    def _add(self, value: bytes, source: str, seq: int | None = None) -> bytes:
        value = bytes(value)
        if seq is not None:
            self._seq = max(self._seq, seq)
        if value not in self.items:
            self.items[value] = KnownValue(value, self._seq if seq is None else seq, source)
        return value

    def observe(self, payload: bytes, source: str, seq: int) -> None:
        self._seq = max(self._seq, seq)
        self._decompose(payload, source, seq, depth=0)

    def _decompose(self, data: bytes, source: str, seq: int, depth: int) -> None:
        self._add(data, source, seq)
        if depth > 3 or len(data) < 1:
            return
        try:
            _, parts = cc.canonical_decode(data)
        except ValueError:
            return
        for part in parts:
            self._decompose(part, source, seq, depth + 1)

    def learn(self, value: bytes, source: str = "ledger", seq: int | None = None) -> bytes:
        return self._add(value, source, seq)

    def require(self, *values: bytes) -> None:
        for v in values:
            if bytes(v) not in self.items:
                raise CapabilityViolation(f"value not in knowledge base: {bytes(v)[:16].hex()}...")

    # derivation rules

    def fresh(self, n: int, rng: random.Random) -> bytes:
        return self._add(rng.randbytes(n), "fresh")

    def derive_hash(self, value: bytes) -> bytes:
        self.require(value)
        return self._add(cc.hash(value), "derived")

    def derive_encode(self, context: int, parts: Iterable[bytes]) -> bytes:
        parts = [bytes(p) for p in parts]
        self.require(*parts)
        return self._add(cc.canonical_encode(context, parts), "derived")

    def derive_concat(self, *parts: bytes) -> bytes:
        self.require(*parts)
        return self._add(b"".join(parts), "derived")

    def derive_decrypt(self, ciphertext: bytes, key: bytes) -> bytes:
        self.require(ciphertext, key)
        return self._add(cc.sym_decrypt(ciphertext, key), "derived")

    def derive_sign(self, msg: cc.CanonicalMessage) -> bytes:
        if self.keypair is None:
            raise CapabilityViolation("adversary holds no signing key")
        self.require(*msg.parts)
        return self._add(cc.sign(self.keypair.private, msg).value, "derived")

    def derivable_payload(self, payload: bytes) -> bool:
        if payload in self.items:
            return True
        try:
            _, parts = cc.canonical_decode(payload)
        except ValueError:
            return False
        return all(p in self.items for p in parts)


# -- adversary scripts ---------------------------------------------------------

PASS, DROP, DELAY, REPLAY, SUBSTITUTE = "pass", "drop", "delay", "replay", "substitute"


@dataclass
class Rule:
    """Match (kind, sender, to, predicate) and apply ``action``.

    ``arg`` is the delay in blocks for delay/replay, or for substitute a
    callable ``(knowledge, envelope) -> payload``. ``limit`` caps how many
    envelopes the rule fires on (None = unlimited).
    """

    action: str
    kind: MessageKind | None = None
    sender: str | None = None
    to: str | None = None
    predicate: Callable[[Envelope], bool] | None = None
    arg: Any = None
    limit: int | None = None
    fired: int = 0

    def matches(self, env: Envelope) -> bool:
        if self.limit is not None and self.fired >= self.limit:
            return False
        if self.kind is not None and env.kind is not self.kind:
            return False
        if self.sender is not None and env.sender != self.sender:
            return False
        if self.to is not None and env.to != self.to:
            return False
        return self.predicate is None or self.predicate(env)


@dataclass
class TxRule:
    """Ledger-side rule. Actions: ``delay`` (defer a block), ``front``,
    ``back`` (reorder within the block) and ``drop``, which the ledger model
    refuses and downgrades to a bounded delay."""

    action: str
    call: str | None = None
    sender: str | None = None

    def matches(self, tx: Transaction) -> bool:
        return (self.call is None or tx.call == self.call) and (
            self.sender is None or tx.sender == self.sender)


@dataclass
class RandomPolicy:
    delay_prob: float = 0.0
    max_delay: int = 2
    replay_prob: float = 0.0
    reorder: bool = False
    tx_defer_prob: float = 0.0


class Adversary:
    """Scripted Dolev-Yao network attacker.

    Rules are tried in order; the first match decides. With no matching rule
    the optional :class:`RandomPolicy` draws an action from the adversary's
    own RNG stream, so honest actors' randomness is unaffected by how often
    the adversary acts.
    """

    def __init__(self, rules: Iterable[Rule] = (), tx_rules: Iterable[TxRule] = (),
                 policy: RandomPolicy | None = None, seed: int = 0,
                 keypair: cc.KeyPair | None = None):
        self.rules = list(rules)
        self.tx_rules = list(tx_rules)
        self.policy = policy
        self.rng = random.Random(f"adversary-{seed}")
        self.knowledge = Knowledge(keypair)
        self.sim: Simulation | None = None
        self.mempool_hooks: list[Callable[[Transaction], None]] = []
        self.tx_front: set[str] = set()  # senders whose txs go first
        self.crafted: list[bytes] = []  # commitments chosen by substitutions

    def attach(self, sim: Simulation) -> None:
        self.sim = sim

    def _note(self, action: str, env: Envelope, **extra: Any) -> None:
        if self.sim is not None:
            self.sim.record("adversary", "AdversaryAction",
                            action=action, envelope=env.id, msg=env.kind.label, **extra)

    def intercept(self, env: Envelope) -> list[Envelope]:
        """Observe ``env`` and return the envelopes to actually enqueue."""
        self.knowledge.observe(env.payload, env.kind.label, env.seq)
        for rule in self.rules:
            if rule.matches(env):
                rule.fired += 1
                return self._apply(rule.action, rule.arg, env)
        if self.policy is not None:
            p = self.policy
            roll = self.rng.random()
            if roll < p.delay_prob:
                return self._apply(DELAY, self.rng.randint(1, p.max_delay), env)
            if roll < p.delay_prob + p.replay_prob:
                return self._apply(REPLAY, self.rng.randint(0, p.max_delay), env)
        return [env]

    def _apply(self, action: str, arg: Any, env: Envelope) -> list[Envelope]:
        if action == PASS:
            return [env]
        if action == DROP:
            self._note(DROP, env)
            return []
        if action == DELAY:
            k = int(arg or 1)
            self._note(DELAY, env, blocks=k)
            return [replace(env, deliver_at=env.deliver_at + k)]
        if action == REPLAY:
            k = int(arg or 0)
            self._note(REPLAY, env, blocks=k)
            return [env, replace(env, deliver_at=env.deliver_at + k, injected=True)]
        if action == SUBSTITUTE:
            payload = arg(self.knowledge, env)
            if not self.knowledge.derivable_payload(payload):
                raise CapabilityViolation(f"substituted {env.kind.label} is not derivable")
            self._note(SUBSTITUTE, env)
            return [replace(env, payload=payload, injected=True)]
        raise ValueError(f"unknown adversary action {action!r}")

    # ledger side

    def observe_tx(self, tx: Transaction, seq: int | None = None) -> None:
        for value in tx.args.values():
            if isinstance(value, bytes):
                self.knowledge.learn(value, "mempool", seq)
        for hook in list(self.mempool_hooks):
            hook(tx)

    def schedule_block(self, pending: list[Transaction]) -> tuple[list[Transaction], list[Transaction]]:
        now: list[Transaction] = []
        later: list[Transaction] = []
        front: list[Transaction] = []
        back: list[Transaction] = []
        for tx in pending:
            rule = next((r for r in self.tx_rules if r.matches(tx)), None)
            action = rule.action if rule else None
            if action == "drop":
                if self.sim is not None:
                    self.sim.record("adversary", "AdversaryDenied", action="drop", tx=tx.id,
                                    reason="ledger transactions cannot be dropped")
                action = "delay"
            if action is None and self.policy is not None and self.rng.random() < self.policy.tx_defer_prob:
                action = "delay"
            if action == "delay":
                later.append(tx)
            elif action == "front" or tx.sender in self.tx_front:
                front.append(tx)
            elif action == "back":
                back.append(tx)
            else:
                now.append(tx)
        if self.policy is not None and self.policy.reorder:
            self.rng.shuffle(now)
        return front + now + back, later


class Network:
    """Single-threaded envelope queue keyed on logical block height."""

    def __init__(self, sim: Simulation, adversary: Adversary | None = None):
        self.sim = sim
        self.adversary = adversary
        self.queue: list[Envelope] = []
        self.log: list[Envelope] = []
        self.dht = DhtIndex()
        self._next_id = 0
        self.delivered = 0

    def send(self, sender: str, to: str, kind: MessageKind, payload: bytes) -> Envelope:
        height = self.sim.ledger.height
        self._next_id += 1
        seq = self.sim.record(sender, "MessageSent", id=self._next_id, to=to, msg=kind.label,
                              digest=cc.hash(payload)[:8], size=len(payload))
        env = Envelope(self._next_id, sender, to, kind, payload, deliver_at=height,
                       sent_at=height, seq=seq)
        out = self.adversary.intercept(env) if self.adversary is not None else [env]
        for e in out:
            if e.injected:
                self._next_id += 1
                e = replace(e, id=self._next_id)
            self.log.append(e)
            self.queue.append(e)
        return env

    def pending(self) -> bool:
        return bool(self.queue)

    def step(self) -> Envelope | None:
        """Deliver the oldest envelope that is due, or return None."""
        height = self.sim.ledger.height
        for i, env in enumerate(self.queue):
            if env.deliver_at <= height:
                del self.queue[i]
                self.delivered += 1
                self.sim.dispatch(env)
                return env
        return None

    # DHT facade
    def dht_announce(self, digest: bytes, actor: str) -> None:
        self.dht.announce(digest, actor)
        self.sim.record(actor, "DhtAnnounce", digest=digest[:8])

    def dht_lookup(self, digest: bytes) -> list[str]:
        return self.dht.lookup(digest)


def is_seed_channel(kind: MessageKind) -> bool:
    return kind in SEED_KINDS
