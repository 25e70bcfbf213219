"""Declarative scenario description, loadable from YAML.

Example::

    name: happy-path
    seed: 1
    mode: standard            # or legacy-leiba
    devices: 3
    hubs: {hub0: [0, 1], hub1: [2]}
    distributors:
      - {name: d0}
      - {name: shd0, join_at: 14, offer: 7}
    release: {e: 40, a_d: 5, a_h: 2, deposit: bound, reset_period: 100, seed_window: 8}
    adversary:
      policy: {delay_prob: 0.1, replay_prob: 0.1, reorder: true}
      rules: [{action: drop, kind: FinalDelivery, limit: 1}]
      tx_rules: [{action: drop, call: submit_pod}]
    expected_violations: [HashMismatch]
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from ..contracts import deposit_bound
from ..messages import MessageKind

MODES = ("standard", "legacy-leiba")
DISTRIBUTOR_KINDS = ("honest", "withholding", "tampering")
ATTACKER_KINDS = ("challenge_forger", "pod_thief")
RULE_ACTIONS = ("pass", "drop", "delay", "replay", "substitute")
TX_ACTIONS = ("delay", "front", "back", "drop")


class ConfigInvalid(ValueError):
    pass


@dataclass
class ReleaseParams:
    e: int = 40
    a_d: int = 5
    a_h: int = 2
    deposit: int | str = "bound"
    reset_period: int = 100
    seed_window: int = 8
    score_threshold: int = 0
    update_size: int = 256
    reclaim: bool = False

    def resolved_deposit(self, n_devices: int) -> int:
        if self.deposit == "bound":
            return deposit_bound(n_devices, self.a_d, self.a_h)
        return int(self.deposit)


@dataclass
class DistributorSpec:
    name: str
    kind: str = "honest"
    join_at: int = 0
    deliver: bool = True
    sell: bool = True
    offer: int = 0
    balance: int | None = None
    dde_threshold: int = 0
    esc_expiry: int | None = None


@dataclass
class AttackerSpec:
    name: str
    kind: str


@dataclass
class RuleSpec:
    action: str
    kind: str | None = None
    sender: str | None = None
    to: str | None = None
    arg: Any = None
    limit: int | None = None


@dataclass
class TxRuleSpec:
    action: str
    call: str | None = None
    sender: str | None = None


@dataclass
class PolicySpec:
    delay_prob: float = 0.0
    max_delay: int = 2
    replay_prob: float = 0.0
    reorder: bool = False
    tx_defer_prob: float = 0.0


@dataclass
class AdversarySpec:
    rules: list[RuleSpec] = field(default_factory=list)
    tx_rules: list[TxRuleSpec] = field(default_factory=list)
    policy: PolicySpec | None = None


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    mode: str = "standard"
    devices: int = 3
    hubs: dict[str, list[int]] = field(default_factory=lambda: {"hub0": [0, 1], "hub1": [2]})
    distributors: list[DistributorSpec] = field(
        default_factory=lambda: [DistributorSpec(f"d{i}") for i in range(3)])
    attackers: list[AttackerSpec] = field(default_factory=list)
    compromised_hubs: list[str] = field(default_factory=list)
    impersonation: bool = False
    release: ReleaseParams = field(default_factory=ReleaseParams)
    adversary: AdversarySpec | None = None
    hub_session_timeout: int = 3
    hub_key_timeout: int = 3
    hub_retry_budget: int = 5
    max_blocks: int = 200
    steps_per_block: int = 64
    max_tx_delay: int = 1
    manufacturer_balance: int = 0
    expected_violations: list[str] = field(default_factory=list)

    @property
    def legacy(self) -> bool:
        return self.mode == "legacy-leiba"

    @property
    def deposit(self) -> int:
        return self.release.resolved_deposit(self.devices)

    def with_(self, **changes: Any) -> ScenarioConfig:
        return replace(self, **changes)

    # -- validation -----------------------------------------------------------

    def validate(self) -> ScenarioConfig:
        errs: list[str] = []
        if self.mode not in MODES:
            errs.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.devices < 1:
            errs.append("at least one device is required")
        r = self.release
        for key in ("e", "reset_period", "update_size"):
            if getattr(r, key) <= 0:
                errs.append(f"release.{key} must be positive")
        if r.a_d < 0 or r.a_h < 0 or r.seed_window < 0:
            errs.append("rewards and seed_window must be non-negative")
        try:
            if self.deposit < 0:
                errs.append("deposit must be non-negative")
        except (TypeError, ValueError):
            errs.append(f"deposit must be an integer or 'bound', got {r.deposit!r}")
        assigned: list[int] = []
        for hub, devs in self.hubs.items():
            for d in devs:
                if not isinstance(d, int) or not 0 <= d < self.devices:
                    errs.append(f"hub {hub!r} references unknown device {d!r}")
                assigned.append(d)
        if sorted(assigned) != list(range(self.devices)):
            errs.append("every device must be assigned to exactly one hub")
        names = ["manufacturer", *self.hubs, *(d.name for d in self.distributors),
                 *(a.name for a in self.attackers), *(f"dev{i}" for i in range(self.devices))]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            errs.append(f"duplicate actor names: {dupes}")
        for d in self.distributors:
            if d.kind not in DISTRIBUTOR_KINDS:
                errs.append(f"distributor {d.name!r}: unknown kind {d.kind!r}")
            if d.offer < 0 or d.join_at < 0:
                errs.append(f"distributor {d.name!r}: offer and join_at must be non-negative")
        for a in self.attackers:
            if a.kind not in ATTACKER_KINDS:
                errs.append(f"attacker {a.name!r}: unknown kind {a.kind!r}")
        for h in self.compromised_hubs:
            if h not in self.hubs:
                errs.append(f"compromised hub {h!r} is not a hub")
        if any(a.kind == "pod_thief" for a in self.attackers) and self.adversary is None:
            errs.append("pod_thief needs an adversary section (it acts through the mempool)")
        if self.adversary is not None:
            labels = {k.label for k in MessageKind}
            for rule in self.adversary.rules:
                if rule.action not in RULE_ACTIONS:
                    errs.append(f"unknown rule action {rule.action!r}")
                if rule.kind is not None and rule.kind not in labels:
                    errs.append(f"unknown message kind {rule.kind!r}")
                if rule.action == "substitute":
                    from .scripts import SUBSTITUTIONS
                    if rule.arg not in SUBSTITUTIONS:
                        errs.append(f"unknown substitution {rule.arg!r}")
            for rule in self.adversary.tx_rules:
                if rule.action not in TX_ACTIONS:
                    errs.append(f"unknown tx rule action {rule.action!r}")
            p = self.adversary.policy
            if p is not None and not (0 <= p.delay_prob + p.replay_prob <= 1
                                      and 0 <= p.tx_defer_prob <= 1):
                errs.append("policy probabilities must lie in [0, 1]")
        if self.max_blocks <= 0 or self.steps_per_block <= 0 or self.max_tx_delay < 0:
            errs.append("max_blocks and steps_per_block must be positive")
        if errs:
            raise ConfigInvalid("; ".join(errs))
        return self

    # -- (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScenarioConfig:
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a mapping")
        data = dict(data)
        try:
            if "release" in data:
                data["release"] = _build(ReleaseParams, data["release"])
            if "distributors" in data:
                ds = data["distributors"]
                if isinstance(ds, int):
                    data["distributors"] = [DistributorSpec(f"d{i}") for i in range(ds)]
                else:
                    data["distributors"] = [_build(DistributorSpec, d) for d in ds or []]
            if "attackers" in data:
                data["attackers"] = [_build(AttackerSpec, a) for a in data["attackers"] or []]
            if data.get("adversary") is not None:
                adv = dict(data["adversary"])
                adv["rules"] = [_build(RuleSpec, r) for r in adv.get("rules") or []]
                adv["tx_rules"] = [_build(TxRuleSpec, r) for r in adv.get("tx_rules") or []]
                if adv.get("policy") is not None:
                    adv["policy"] = _build(PolicySpec, adv["policy"])
                data["adversary"] = _build(AdversarySpec, adv)
            if "hubs" in data:
                data["hubs"] = {str(k): list(v) for k, v in data["hubs"].items()}
            return _build(cls, data).validate()
        except ConfigInvalid:
            raise
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigInvalid(str(exc)) from exc


def _build(cls, data: Any):
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{cls.__name__} expects a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigInvalid(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    return cls(**data)


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    return ScenarioConfig.from_dict(data or {})
