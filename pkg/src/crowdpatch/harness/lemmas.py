"""Trace properties checked after every run.

The three delivery lemmas are evaluated over one concrete trace, so they
are bounded tests rather than proofs over all traces. Each checker is a
single pass over the events plus dictionary lookups.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..trace import Trace, TraceEvent

PAYMENT_ONLY_IF_PROOF = "PaymentOnlyIfGenerateProof"
ALWAYS_PAID = "AlwaysPaidIfUpdateReady"
MAX_ONE_PAYMENT = "MaxOnePaymentForOneIoT"
CONSERVATION = "CurrencyConservation"
CONFINEMENT = "WitnessConfinement"

LEMMAS = (PAYMENT_ONLY_IF_PROOF, ALWAYS_PAID, MAX_ONE_PAYMENT)


@dataclass
class LemmaReport:
    name: str
    holds: bool
    counterexample: list[TraceEvent] = field(default_factory=list)
    note: str = ""

    def __str__(self) -> str:
        verdict = "holds" if self.holds else "VIOLATED"
        extra = f" ({self.note})" if self.note else ""
        return f"{self.name}: {verdict}{extra}"


def _events(trace: Trace | Iterable[TraceEvent]) -> list[TraceEvent]:
    return list(trace.events if isinstance(trace, Trace) else trace)


def check_lemma_payment_only_if_proof(trace: Trace | Iterable[TraceEvent]) -> LemmaReport:
    """Every PaymentToD(d, o) is preceded by some GenProof(d, o, U)."""
    proved: set[tuple[str, str]] = set()
    for ev in _events(trace):
        if ev.kind == "GenProof":
            proved.add((ev.get("distributor"), ev.get("device")))
        elif ev.kind == "PaymentToD" and (ev.get("distributor"), ev.get("device")) not in proved:
            return LemmaReport(PAYMENT_ONLY_IF_PROOF, False, [ev],
                               f"payment to {ev.get('distributor')[:12]} without a proof")
    return LemmaReport(PAYMENT_ONLY_IF_PROOF, True)


def check_lemma_always_paid(trace: Trace | Iterable[TraceEvent]) -> LemmaReport:
    """Every UpdateReadyForIoT(o, U) has a PaymentToD(d, o) and a
    GenProof(d, o, U) for the same d somewhere in the trace."""
    events = _events(trace)
    proofs: dict[tuple[str, str], set[str]] = {}
    paid: dict[str, set[str]] = {}
    for ev in events:
        if ev.kind == "GenProof":
            proofs.setdefault((ev.get("device"), ev.get("update")), set()).add(ev.get("distributor"))
        elif ev.kind == "PaymentToD":
            paid.setdefault(ev.get("device"), set()).add(ev.get("distributor"))
    for ev in events:
        if ev.kind != "UpdateReadyForIoT":
            continue
        device, update = ev.get("device"), ev.get("update")
        if not paid.get(device, set()) & proofs.get((device, update), set()):
            return LemmaReport(ALWAYS_PAID, False, [ev],
                               f"device {device[:12]} got the update but no prover was paid")
    return LemmaReport(ALWAYS_PAID, True)


def check_lemma_max_one_payment(trace: Trace | Iterable[TraceEvent]) -> LemmaReport:
    """No device triggers two distinct PaymentToD events."""
    first: dict[str, TraceEvent] = {}
    for ev in _events(trace):
        if ev.kind != "PaymentToD":
            continue
        prior = first.setdefault(ev.get("device"), ev)
        if prior is not ev:
            return LemmaReport(MAX_ONE_PAYMENT, False, [prior, ev],
                               f"device {ev.get('device')[:12]} paid twice")
    return LemmaReport(MAX_ONE_PAYMENT, True)


def check_conservation(trace: Trace | Iterable[TraceEvent]) -> LemmaReport:
    bad = [ev for ev in _events(trace)
           if ev.kind == "Violation" and ev.get("check") == CONSERVATION]
    return LemmaReport(CONSERVATION, not bad, bad[:1])


def check_lemmas(trace: Trace | Iterable[TraceEvent]) -> list[LemmaReport]:
    events = _events(trace)
    return [
        check_lemma_payment_only_if_proof(events),
        check_lemma_always_paid(events),
        check_lemma_max_one_payment(events),
    ]
