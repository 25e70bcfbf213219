"""Ready-made scenarios and the attack suite.

Every attack scenario is a transformation of a base config plus a predicate
over the run result stating what the protocol claims should happen. A
scenario *passes* when that claim is observed, which for most attacks means
the attack failed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .config import (
    AdversarySpec,
    AttackerSpec,
    DistributorSpec,
    PolicySpec,
    ReleaseParams,
    RuleSpec,
    ScenarioConfig,
    TxRuleSpec,
)
from .runner import RunResult, run_scenario


def happy_path(seed: int = 0, **changes) -> ScenarioConfig:
    """One manufacturer, three devices on two hubs, three distributors."""
    return ScenarioConfig(name="happy-path", seed=seed, **changes).validate()


def random_adversary(seed: int = 0, **changes) -> ScenarioConfig:
    policy = PolicySpec(delay_prob=0.15, max_delay=2, replay_prob=0.15, reorder=True,
                        tx_defer_prob=0.3)
    return ScenarioConfig(name="random-adversary", seed=seed,
                          adversary=AdversarySpec(policy=policy), **changes).validate()


def dde(seed: int = 0, offer: int = 7, **changes) -> ScenarioConfig:
    """A selling-only FHD and an SHD that joins after the seed window."""
    release = ReleaseParams(seed_window=4)
    return ScenarioConfig(
        name="dde", seed=seed, release=release,
        distributors=[DistributorSpec("fhd0", deliver=False),
                      DistributorSpec("shd0", join_at=release.seed_window + 3, offer=offer)],
        **changes,
    ).validate()


def zero_distributors(seed: int = 0) -> ScenarioConfig:
    return ScenarioConfig(name="zero-distributors", seed=seed, distributors=[]).validate()


def racing_distributors(seed: int = 0) -> ScenarioConfig:
    """Hold d0's first PoD forward past the hub's key timeout so the hub
    collects a second PoD from another distributor for the same device."""
    rule = RuleSpec("delay", kind="PodForward", to="d0", arg=5, limit=1)
    return ScenarioConfig(name="race", seed=seed, adversary=AdversarySpec(rules=[rule]),
                          max_tx_delay=1).validate()


def challenge_forgery(seed: int = 0, mode: str = "legacy-leiba") -> ScenarioConfig:
    return ScenarioConfig(name=f"challenge-forgery-{mode}", seed=seed, mode=mode,
                          attackers=[AttackerSpec("mallory", "challenge_forger")]).validate()


# -- attack suite ---------------------------------------------------------------


@dataclass
class AttackOutcome:
    name: str
    passed: bool
    detail: str
    results: list[RunResult] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def __str__(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class AttackScenario:
    name: str
    claim: str
    build: Callable[[ScenarioConfig], list[ScenarioConfig]]
    judge: Callable[[list[RunResult]], tuple[bool, str]]

    def run(self, base: ScenarioConfig | None = None, seed: int | None = None) -> AttackOutcome:
        base = base or happy_path()
        results = [run_scenario(cfg, seed) for cfg in self.build(base)]
        passed, detail = self.judge(results)
        return AttackOutcome(self.name, passed, detail, results)


def _payments(r: RunResult) -> list:
    return r.events("PaymentToD")


def _addr(r: RunResult, name: str) -> str:
    return r.sim.actors[name].address


def _all_installed_genuine(r: RunResult) -> bool:
    return all(h == r.update_hash.hex() for h in r.installed().values())


# 1. impersonation

def _build_impersonation(base: ScenarioConfig) -> list[ScenarioConfig]:
    return [base.with_(name="impersonation", impersonation=True,
                       expected_violations=["BadManufacturerSignature"]).validate()]


def _judge_impersonation(rs: list[RunResult]) -> tuple[bool, str]:
    r = rs[0]
    refusals = [e for e in r.violations() if e.get("check") == "BadManufacturerSignature"]
    ok = not r.installed() and not _payments(r) and bool(refusals) and r.exit_code == 0
    return ok, (f"{len(refusals)} PoD refusals, {len(r.installed())} installs, "
                f"{len(_payments(r))} distributor payouts")


# 2. PoD submission interception

def _build_interception(base: ScenarioConfig) -> list[ScenarioConfig]:
    return [base.with_(name="pod-interception",
                       attackers=[*base.attackers, AttackerSpec("eve", "pod_thief")],
                       adversary=base.adversary or AdversarySpec()).validate()]


def _judge_interception(rs: list[RunResult]) -> tuple[bool, str]:
    r = rs[0]
    thief = r.sim.actors["eve"]
    errors = sorted({rc.error for rc in thief.outcomes})
    honest = {_addr(r, d.name) for d in r.config.distributors}
    paid = [e.get("distributor") for e in _payments(r)]
    ok = (bool(thief.outcomes) and not any(rc.ok for rc in thief.outcomes)
          and "BadSignature" in errors and r.balance_of("eve") == 0
          and len(paid) == r.config.devices and set(paid) <= honest and r.exit_code == 0)
    return ok, (f"{len(thief.outcomes)} thief submissions rejected with {errors}; "
                f"{len(paid)} payouts all to the original distributors")


# 3. malicious distributor withholding the PoD

def _build_withholding(base: ScenarioConfig) -> list[ScenarioConfig]:
    ds = [DistributorSpec("withholder", kind="withholding"), *base.distributors]
    return [base.with_(name="withholding", distributors=ds).validate()]


def _judge_withholding(rs: list[RunResult]) -> tuple[bool, str]:
    r = rs[0]
    w = _addr(r, "withholder")
    withheld = r.events("PodWithheld")
    aborts = [e for e in r.events("SessionAbort") if e.get("distributor") == "withholder"]
    ok = (bool(withheld) and bool(aborts) and len(r.installed()) == r.config.devices
          and _all_installed_genuine(r)
          and all(e.get("distributor") != w for e in _payments(r)) and r.exit_code == 0)
    return ok, (f"{len(withheld)} PoDs withheld, {len(aborts)} hub aborts, "
                f"{len(r.installed())}/{r.config.devices} devices installed via other distributors")


# 4. update integrity

def _build_integrity(base: ScenarioConfig) -> list[ScenarioConfig]:
    ds = [DistributorSpec("tamperer", kind="tampering"), *base.distributors]
    rule = RuleSpec("substitute", kind="FinalDelivery", arg="tamper_update", limit=1)
    adversary = AdversarySpec(rules=[rule])
    last_hub = list(base.hubs)[-1]
    return [base.with_(name="update-integrity", distributors=ds, adversary=adversary,
                       compromised_hubs=[last_hub],
                       expected_violations=["ProofInvalid", "HashMismatch"]).validate()]


def _judge_integrity(rs: list[RunResult]) -> tuple[bool, str]:
    r = rs[0]
    checks = [e.get("check") for e in r.violations()]
    compromised = set(r.config.compromised_hubs)
    behind = {f"dev{d}" for h in compromised for d in r.config.hubs[h]}
    honest_devs = {f"dev{i}" for i in range(r.config.devices)} - behind
    installed = r.installed()
    ok = (_all_installed_genuine(r) and "HashMismatch" in checks and "ProofInvalid" in checks
          and set(installed) == honest_devs and r.exit_code == 0)
    return ok, (f"{checks.count('ProofInvalid')} fake proofs rejected, "
                f"{checks.count('HashMismatch')} tampered updates refused, "
                f"{len(installed)} genuine installs, none behind the compromised hub")


# 5. dropping ledger transactions

def _build_tx_drop(base: ScenarioConfig) -> list[ScenarioConfig]:
    adversary = AdversarySpec(tx_rules=[TxRuleSpec("drop")])
    return [base.with_(name="tx-drop", adversary=adversary).validate()]


def _judge_tx_drop(rs: list[RunResult]) -> tuple[bool, str]:
    r = rs[0]
    denied = r.events("AdversaryDenied")
    submitted = {e.get("tx") for e in r.events("TxSubmitted")}
    executed = {e.get("tx") for e in r.events("TxExecuted")}
    n = r.config.devices
    ok = (bool(denied) and submitted == executed and len(_payments(r)) == n
          and len(r.events("PaymentToH")) == n and len(r.installed()) == n and r.exit_code == 0)
    return ok, (f"{len(denied)} drop attempts downgraded to delays; "
                f"{len(executed)}/{len(submitted)} transactions executed")


# legacy ID-challenge forgery, run in both modes

def _build_forgery(base: ScenarioConfig) -> list[ScenarioConfig]:
    attackers = [*base.attackers, AttackerSpec("mallory", "challenge_forger")]
    return [base.with_(name=f"challenge-forgery-{mode}", mode=mode, attackers=attackers).validate()
            for mode in ("legacy-leiba", "standard")]


def forgery_stats(r: RunResult) -> dict[str, int]:
    m = _addr(r, "mallory")
    return {
        "payouts": sum(1 for e in _payments(r) if e.get("distributor") == m),
        "proofs": sum(1 for e in r.events("GenProof") if e.get("distributor") == m),
        "installs": len(r.installed()),
    }


def _judge_forgery(rs: list[RunResult]) -> tuple[bool, str]:
    legacy, standard = rs
    lg, st = forgery_stats(legacy), forgery_stats(standard)
    n = legacy.config.devices
    ok = (lg == {"payouts": n, "proofs": 0, "installs": 0} and legacy.exit_code == 3
          and st["payouts"] == 0 and st["installs"] == n and standard.exit_code == 0)
    return ok, (f"legacy: {lg['payouts']} forged payouts, {lg['proofs']} proofs, "
                f"{lg['installs']} installs; standard: {st['payouts']} forged payouts, "
                f"{st['installs']} installs")


ATTACKS: dict[str, AttackScenario] = {a.name: a for a in (
    AttackScenario("impersonation", "without the manufacturer key no device signs a PoD",
                   _build_impersonation, _judge_impersonation),
    AttackScenario("pod-interception", "captured PoDs cannot be redeemed by anyone else",
                   _build_interception, _judge_interception),
    AttackScenario("withholding", "a hub recovers from a distributor that never redeems",
                   _build_withholding, _judge_withholding),
    AttackScenario("update-integrity", "devices never install a modified update",
                   _build_integrity, _judge_integrity),
    AttackScenario("tx-drop", "ledger transactions can be delayed but not dropped",
                   _build_tx_drop, _judge_tx_drop),
    AttackScenario("challenge-forgery", "the crafted ID challenge pays out only under raw framing",
                   _build_forgery, _judge_forgery),
)}

SUITE = ("impersonation", "pod-interception", "withholding", "update-integrity", "tx-drop")


def attack_suite(base: ScenarioConfig | None = None, seed: int | None = None,
                 names=SUITE) -> list[AttackOutcome]:
    return [ATTACKS[n].run(base, seed) for n in names]
