"""Turn an :class:`AdversarySpec` into a live :class:`Adversary`.

Substitutions are referenced by name in configs. Each entry is a factory
taking the adversary and returning the ``(knowledge, envelope) -> payload``
callable a substitute rule runs; every value it emits goes through the
knowledge base's derivation rules.
"""

from __future__ import annotations

from typing import Callable

from .. import crypto_core as cc
from ..messages import MessageKind, unpack
from ..network import Adversary, Envelope, Knowledge, RandomPolicy, Rule, TxRule
from .config import AdversarySpec

Substitution = Callable[[Knowledge, Envelope], bytes]


def _tamper_update(adversary: Adversary) -> Substitution:
    """Replace the update in a FinalDelivery with a value the adversary can
    compute (the hash of the captured update)."""

    def fn(k: Knowledge, env: Envelope) -> bytes:
        kind, f = unpack(env.payload, MessageKind.FINAL_DELIVERY)
        return k.derive_encode(kind.tag, [k.derive_hash(f["update"]), f["hub"]])

    return fn


def _crafted_challenge(adversary: Adversary) -> Substitution:
    """Replace an IdChallenge with ``U_h || s`` for an ``s`` of its choosing."""

    def fn(k: Knowledge, env: Envelope) -> bytes:
        kind, _ = unpack(env.payload, MessageKind.ID_CHALLENGE)
        dscs = adversary.sim.ledger.read_public("contracts", "dsc")
        u_h = k.learn(adversary.sim.ledger.read_public("contract", dscs[0])["update_hash"])
        s = k.derive_hash(k.derive_hash(k.fresh(32, adversary.rng)))
        adversary.crafted.append(s)
        return k.derive_encode(kind.tag, [k.derive_concat(u_h, s)])

    return fn


def _garble(adversary: Adversary) -> Substitution:
    """Swap the payload for another payload already seen on the wire."""

    def fn(k: Knowledge, env: Envelope) -> bytes:
        return k.derive_hash(env.payload)

    return fn


SUBSTITUTIONS: dict[str, Callable[[Adversary], Substitution]] = {
    "tamper_update": _tamper_update,
    "crafted_challenge": _crafted_challenge,
    "garble": _garble,
}


def build_adversary(spec: AdversarySpec | None, seed: int,
                    keypair: cc.KeyPair | None = None) -> Adversary | None:
    if spec is None:
        return None
    policy = None
    if spec.policy is not None:
        p = spec.policy
        policy = RandomPolicy(p.delay_prob, p.max_delay, p.replay_prob, p.reorder, p.tx_defer_prob)
    adversary = Adversary(tx_rules=[TxRule(r.action, r.call, r.sender) for r in spec.tx_rules],
                          policy=policy, seed=seed, keypair=keypair)
    kinds = {k.label: k for k in MessageKind}
    for r in spec.rules:
        arg = SUBSTITUTIONS[r.arg](adversary) if r.action == "substitute" else r.arg
        adversary.rules.append(Rule(r.action, kinds[r.kind] if r.kind else None,
                                    r.sender, r.to, None, arg, r.limit))
    return adversary
