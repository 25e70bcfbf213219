"""Build a simulation from a :class:`ScenarioConfig`, run it, judge it."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterator

from .. import crypto_core as cc
from ..actors import (
    ChallengeForger,
    CompromisedHub,
    Distributor,
    Hub,
    IoTDevice,
    Manufacturer,
    PodThief,
    TamperingDistributor,
    WithholdingDistributor,
)
from ..simulation import Simulation
from ..trace import Trace, TraceEvent
from .config import ScenarioConfig
from .lemmas import PAYMENT_ONLY_IF_PROOF, LemmaReport, check_conservation, check_lemmas
from .scanner import scan_confinement
from .scripts import build_adversary

EXIT_OK = 0
EXIT_LEMMA = 1
EXIT_CONFIG = 2
EXIT_ATTACK_SUCCEEDED = 3

_DISTRIBUTOR_CLASSES = {
    "honest": Distributor,
    "withholding": WithholdingDistributor,
    "tampering": TamperingDistributor,
}


def build_simulation(config: ScenarioConfig, seed: int | None = None) -> Simulation:
    """Instantiate every actor; nothing runs until ``sim.run()``."""
    config.validate()
    seed = config.seed if seed is None else seed
    adversary = build_adversary(config.adversary, seed)
    sim = Simulation(seed, legacy=config.legacy, adversary=adversary,
                     max_tx_delay=config.max_tx_delay, steps_per_block=config.steps_per_block,
                     max_blocks=config.max_blocks)
    rel = config.release
    device_keys = [sim.rng.keypair() for _ in range(config.devices)]
    trusted = sim.rng.keypair()
    update = sim.rng.randbytes(rel.update_size)

    # an impersonator runs the manufacturer role with its own keys while the
    # devices keep trusting the genuine manufacturer key
    mfr_keys = sim.rng.keypair() if config.impersonation else trusted
    sim.add(Manufacturer("manufacturer", sim, update=update,
                         targets=[k.public for k in device_keys], e=rel.e, a_d=rel.a_d,
                         a_h=rel.a_h, deposit=config.deposit, reset_period=rel.reset_period,
                         seed_window=rel.seed_window, reclaim=rel.reclaim, keys=mfr_keys),
            balance=config.manufacturer_balance + config.deposit)

    for spec in config.attackers:
        if spec.kind == "challenge_forger":
            sim.add(ChallengeForger(spec.name, sim))
        else:
            thief = sim.add(PodThief(spec.name, sim))
            thief.attach(adversary)

    for spec in config.distributors:
        cls = _DISTRIBUTOR_CLASSES[spec.kind]
        sim.add(cls(spec.name, sim, join_at=spec.join_at, deliver=spec.deliver, sell=spec.sell,
                    dde_threshold=spec.dde_threshold, offer=spec.offer,
                    esc_expiry=spec.esc_expiry),
                balance=spec.offer if spec.balance is None else spec.balance)

    hub_of = {d: hub for hub, devs in config.hubs.items() for d in devs}
    for hub, devs in config.hubs.items():
        cls = CompromisedHub if hub in config.compromised_hubs else Hub
        sim.add(cls(hub, sim, devices={f"dev{d}": device_keys[d].public for d in devs},
                    score_threshold=rel.score_threshold,
                    session_timeout=config.hub_session_timeout,
                    key_timeout=config.hub_key_timeout, retry_budget=config.hub_retry_budget))
    for i, keys in enumerate(device_keys):
        sim.add(IoTDevice(f"dev{i}", sim, manufacturer_pub=trusted.public, hub=hub_of[i],
                          keys=keys))
    return sim


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    sim: Simulation
    reports: list[LemmaReport]
    exit_code: int
    elapsed: float
    unexpected: list[TraceEvent] = field(default_factory=list)

    @property
    def trace(self) -> Trace:
        return self.sim.trace

    def __iter__(self) -> Iterator:
        # unpacks as (trace, reports, exit_code)
        return iter((self.trace, self.reports, self.exit_code))

    def report(self, name: str) -> LemmaReport:
        return next(r for r in self.reports if r.name == name)

    @property
    def ok(self) -> bool:
        return all(r.holds for r in self.reports) and not self.unexpected

    def events(self, kind: str) -> list[TraceEvent]:
        return self.trace.of_kind(kind)

    def installed(self) -> dict[str, str]:
        """Device actor -> installed update hash (hex)."""
        return {e.actor: e.get("update") for e in self.events("UpdateInstalled")}

    def balance_of(self, name: str) -> int:
        return self.sim.balance(name)

    def violations(self) -> list[TraceEvent]:
        return self.events("Violation")

    @property
    def update_hash(self) -> bytes:
        return cc.hash(self.sim.actors["manufacturer"].update)


def judge(config: ScenarioConfig, sim: Simulation) -> tuple[list[LemmaReport], list[TraceEvent], int]:
    trace = sim.trace
    reports = check_lemmas(trace)
    reports.append(check_conservation(trace))
    reports.append(scan_confinement(sim, sim.actors["manufacturer"].update))
    expected = set(config.expected_violations)
    unexpected = [e for e in trace.of_kind("Violation")
                  if e.get("check") not in expected and e.get("check") != "CurrencyConservation"]
    failed = {r.name for r in reports if not r.holds}
    if config.legacy and failed == {PAYMENT_ONLY_IF_PROOF} and not unexpected:
        code = EXIT_ATTACK_SUCCEEDED
    elif failed or unexpected:
        code = EXIT_LEMMA
    else:
        code = EXIT_OK
    return reports, unexpected, code


def run_scenario(config: ScenarioConfig, seed: int | None = None) -> RunResult:
    seed = config.seed if seed is None else seed
    t0 = time.perf_counter()
    sim = build_simulation(config, seed)
    sim.run()
    elapsed = time.perf_counter() - t0
    reports, unexpected, code = judge(config, sim)
    return RunResult(config, seed, sim, reports, code, elapsed, unexpected)
