"""Witness-confinement scan.

Secrets are the honest provers' symmetric keys ``r`` (registered with the
simulation as they are generated) and the update ``U`` itself. A secret is
*disclosed* at the first of:

* a ``KeyPublished`` event for its commitment ``s``;
* its owner's own ledger submission carrying it (``TxSubmitted`` with
  ``discloses = s``), since the mempool is public.

Before that point no network payload may contain it and the adversary's
knowledge base may not hold it. ``U`` is disclosed once any key is, because
any published key opens a ciphertext already on the wire. Package seeding
is a deliberate public hand-over of ``U`` to distributors, so seed payloads
and knowledge learned from them are exempt.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from ..messages import SEED_KINDS
from .lemmas import CONFINEMENT, LemmaReport

if TYPE_CHECKING:
    from ..simulation import Simulation

_SEED_LABELS = {k.label for k in SEED_KINDS}
_NEVER = float("inf")


def disclosure_points(sim: Simulation) -> dict[str, float]:
    """Commitment (hex) -> trace seq of first disclosure."""
    out: dict[str, float] = {}
    for ev in sim.trace:
        s = ev.get("s") if ev.kind == "KeyPublished" else (
            ev.get("discloses") if ev.kind == "TxSubmitted" else None)
        if s and s not in out:
            out[s] = ev.seq
    return out


def scan_confinement(sim: Simulation, update: bytes | None = None) -> LemmaReport:
    points = disclosure_points(sim)
    secrets: list[tuple[str, bytes, float]] = [
        (f"r[{s.hex()[:12]}]", r, points.get(s.hex(), _NEVER)) for _, r, s in sim.secrets
    ]
    if update is not None:
        first_key = min(points.values(), default=_NEVER)
        secrets.append(("U", update, first_key))
    knowledge = list(sim.adversary.knowledge) if sim.adversary is not None else []
    for label, secret, until in secrets:
        for env in sim.network.log:
            if env.seq >= until:
                continue
            if label == "U" and env.kind.label in _SEED_LABELS:
                continue
            if secret in env.payload:
                return LemmaReport(CONFINEMENT, False, [sim.trace.events[env.seq]],
                                   f"{label} inside {env.kind.label} #{env.id}")
        for item in knowledge:
            if item.seq >= until or (label == "U" and item.source in _SEED_LABELS):
                continue
            if secret in item.value:
                return LemmaReport(CONFINEMENT, False, [],
                                   f"adversary learned {label} from {item.source} at seq {item.seq}")
    return LemmaReport(CONFINEMENT, True, note=f"{len(secrets)} secrets scanned")
