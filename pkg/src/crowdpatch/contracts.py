"""SSC, DSC and ESC state machines.

The super contract (SSC) is a per-manufacturer factory and score registry.
It deploys delivery contracts (DSC), which pay distributors for proofs of
delivery and hubs for proofs of final delivery, and exchange contracts (ESC),
which escrow a second-hand distributor's offer until the first-hand
distributor reveals the package key.

Entry points take a :class:`~crowdpatch.ledger.CallContext` first. The
``*_tx`` helpers build the matching :class:`~crowdpatch.ledger.Transaction`.
"""

from __future__ import annotations

from typing import Any, Iterable

from . import crypto_core as cc
from .ledger import (
    Address,
    CallContext,
    Contract,
    ContractError,
    Ledger,
    Transaction,
    address_of,
)


class AlreadyDeployed(ContractError):
    pass


class NotOwner(ContractError):
    pass


class InsufficientDeposit(ContractError):
    pass


class Expired(ContractError):
    pass


class UnknownOrServedDevice(ContractError):
    pass


class KeyEquationMismatch(ContractError):
    pass


class BadSignature(ContractError):
    pass


class UnauthorizedCaller(ContractError):
    pass


class AlreadyClaimed(ContractError):
    pass


class NotPayee(ContractError):
    pass


class NotExpired(ContractError):
    pass


class NotCreator(ContractError):
    pass


# -- equations shared with the actors ---------------------------------------


def delivery_key(t: bytes, device_pub: bytes, distributor_pub: bytes) -> cc.SymKey:
    """r for a delivery session, bound to the device and the distributor."""
    return cc.hash_parts(cc.Context.DELIVERY_KEY, t, device_pub, distributor_pub)


def exchange_key(t: bytes, fhd_pub: bytes) -> cc.SymKey:
    return cc.hash_parts(cc.Context.EXCHANGE_KEY, t, fhd_pub)


def manufacturer_message(update_hash: bytes) -> cc.CanonicalMessage:
    return cc.CanonicalMessage.of(cc.Context.MANUFACTURER, update_hash)


def pod_message(update_hash: bytes, s: bytes, legacy: bool = False) -> cc.CanonicalMessage:
    return cc.CanonicalMessage.of(cc.Context.POD, update_hash, s, raw=legacy)


def pofd_message(update_hash: bytes, hub_pub: bytes) -> cc.CanonicalMessage:
    return cc.CanonicalMessage.of(cc.Context.POFD, update_hash, hub_pub)


def deposit_bound(n_targets: int, a_d: int, a_h: int) -> int:
    return n_targets * (a_d + a_h)


# -- contracts ---------------------------------------------------------------


class SuperContract(Contract):
    kind = "ssc"
    entry_points = frozenset({"create_dsc", "create_esc", "record_delivery"})

    def __init__(self, owner: Address, reset_period: int, legacy: bool = False):
        self.owner = owner
        self.reset_period = reset_period
        self.legacy = legacy
        # distributor -> [score, last_update]
        self.scores: dict[Address, list[int]] = {}
        self.children: set[Address] = set()

    @classmethod
    def deploy(cls, ctx: CallContext, reset_period: int, legacy: bool = False) -> Address:
        if reset_period <= 0:
            raise ContractError("reset_period must be positive")
        for contract in ctx.ledger.contracts.values():
            if isinstance(contract, SuperContract) and contract.owner == ctx.sender:
                raise AlreadyDeployed(ctx.sender[:12])
        address = ctx.deploy(cls(ctx.sender, reset_period, legacy))
        ctx.emit("SscDeployed", ssc=address, owner=ctx.sender)
        return address

    def create_dsc(self, ctx: CallContext, e: int, update_hash: bytes, package_hash: bytes,
                   vk_d_hash: bytes, vk_e_hash: bytes, pk_e_hash: bytes,
                   targets: Iterable[bytes], a_d: int, a_h: int) -> Address:
        if ctx.sender != self.owner:
            raise NotOwner(ctx.sender[:12])
        targets = list(targets)
        if e <= 0 or a_d < 0 or a_h < 0 or not targets:
            raise ContractError("malformed release parameters")
        if len(set(targets)) != len(targets):
            raise ContractError("duplicate target")
        bound = deposit_bound(len(targets), a_d, a_h)
        if ctx.value < bound:
            raise InsufficientDeposit(f"deposit {ctx.value} < {bound}")
        dsc = DeliveryContract(
            creator=ctx.sender, created_at=ctx.height, e=e,
            update_hash=update_hash, package_hash=package_hash,
            vk_d_hash=vk_d_hash, vk_e_hash=vk_e_hash, pk_e_hash=pk_e_hash,
            targets=targets, a_d=a_d, a_h=a_h,
            parent_ssc=ctx.self_address, legacy=self.legacy,
        )
        address = ctx.deploy(dsc, endowment=ctx.value)
        self.children.add(address)
        ctx.emit("DscCreated", dsc=address, deposit=ctx.value, targets=len(targets))
        return address

    def create_esc(self, ctx: CallContext, payee: Address, s: bytes, e_prime: int) -> Address:
        # the offer arrives as attached value; InsufficientFunds is raised by
        # the ledger before we get here
        if e_prime <= 0:
            raise ContractError("e' must be positive")
        esc = ExchangeContract(
            creator=ctx.sender, payee=payee, s=s, offer=ctx.value,
            created_at=ctx.height, e_prime=e_prime,
        )
        address = ctx.deploy(esc, endowment=ctx.value)
        self.children.add(address)
        ctx.emit("EscCreated", esc=address, creator=ctx.sender, payee=payee, offer=ctx.value)
        return address

    def record_delivery(self, ctx: CallContext, distributor: Address) -> int:
        caller = ctx.ledger.contracts.get(ctx.sender)
        if ctx.sender not in self.children or not isinstance(caller, DeliveryContract):
            raise UnauthorizedCaller(ctx.sender)
        entry = self.scores.get(distributor)
        if entry is None or ctx.height - entry[1] >= self.reset_period:
            score = 1
        else:
            score = entry[0] + 1
        self.scores[distributor] = [score, ctx.height]
        ctx.emit("ScoreUpdated", distributor=distributor, score=score)
        return score

    def get_score(self, distributor: Address, at_height: int) -> int:
        entry = self.scores.get(distributor)
        if entry is None or at_height - entry[1] >= self.reset_period:
            return 0
        return entry[0]


class DeliveryContract(Contract):
    kind = "dsc"
    entry_points = frozenset({"submit_pod", "submit_pofd", "reclaim_after_expiry"})

    def __init__(self, creator: Address, created_at: int, e: int, update_hash: bytes,
                 package_hash: bytes, vk_d_hash: bytes, vk_e_hash: bytes, pk_e_hash: bytes,
                 targets: list[bytes], a_d: int, a_h: int, parent_ssc: Address,
                 legacy: bool = False):
        self.creator = creator
        self.created_at = created_at
        self.e = e
        self.update_hash = update_hash
        self.package_hash = package_hash
        self.vk_d_hash = vk_d_hash
        self.vk_e_hash = vk_e_hash
        self.pk_e_hash = pk_e_hash
        # device pub -> {"pod": distributor or None, "pofd": hub or None}
        self.targets: dict[bytes, dict[str, Address | None]] = {
            pub: {"pod": None, "pofd": None} for pub in targets
        }
        self.a_d = a_d
        self.a_h = a_h
        self.parent_ssc = parent_ssc
        self.legacy = legacy

    def expired(self, height: int) -> bool:
        return height - self.created_at >= self.e

    def _slot(self, device: bytes, which: str) -> dict[str, Address | None]:
        slot = self.targets.get(device)
        if slot is None or slot[which] is not None:
            raise UnknownOrServedDevice(device.hex()[:12])
        return slot

    def submit_pod(self, ctx: CallContext, device: bytes, t: bytes, r: bytes, s: bytes,
                   pod: bytes) -> int:
        if self.expired(ctx.height):
            raise Expired(f"created {self.created_at}, e={self.e}, now {ctx.height}")
        slot = self._slot(device, "pod")
        sender_pub = bytes.fromhex(ctx.sender)
        if r != delivery_key(t, device, sender_pub) or s != cc.hash(r):
            raise KeyEquationMismatch("r/s do not match t, device and sender")
        if not cc.verify_sig(device, pod_message(self.update_hash, s, self.legacy), pod):
            raise BadSignature("PoD does not verify")
        slot["pod"] = ctx.sender
        ctx.pay(ctx.sender, self.a_d)
        ctx.publish_key(s, r)
        ctx.call(self.parent_ssc, "record_delivery", distributor=ctx.sender)
        ctx.emit("PaymentToD", distributor=ctx.sender, device=device.hex(),
                 amount=self.a_d, dsc=ctx.self_address)
        return self.a_d

    def submit_pofd(self, ctx: CallContext, device: bytes, pofd: bytes) -> int:
        if self.expired(ctx.height):
            raise Expired(f"created {self.created_at}, e={self.e}, now {ctx.height}")
        slot = self._slot(device, "pofd")
        if not cc.verify_sig(device, pofd_message(self.update_hash, bytes.fromhex(ctx.sender)), pofd):
            raise BadSignature("PoFD does not verify")
        slot["pofd"] = ctx.sender
        ctx.pay(ctx.sender, self.a_h)
        ctx.emit("PaymentToH", hub=ctx.sender, device=device.hex(),
                 amount=self.a_h, dsc=ctx.self_address)
        return self.a_h

    def reclaim_after_expiry(self, ctx: CallContext) -> int:
        if ctx.sender != self.creator:
            raise NotCreator(ctx.sender[:12])
        if not self.expired(ctx.height):
            raise NotExpired(f"expires at {self.created_at + self.e}")
        refund = ctx.ledger.balance(ctx.self_address)
        ctx.pay(self.creator, refund)
        ctx.emit("Refund", contract=ctx.self_address, creator=self.creator, amount=refund)
        return refund

    def unserved(self) -> tuple[int, int]:
        pod = sum(1 for v in self.targets.values() if v["pod"] is None)
        pofd = sum(1 for v in self.targets.values() if v["pofd"] is None)
        return pod, pofd


class ExchangeContract(Contract):
    kind = "esc"
    entry_points = frozenset({"claim", "reclaim_after_expiry"})

    def __init__(self, creator: Address, payee: Address, s: bytes, offer: int,
                 created_at: int, e_prime: int):
        self.creator = creator
        self.payee = payee
        self.s = s
        self.offer = offer
        self.created_at = created_at
        self.e_prime = e_prime
        self.claimed = False

    def expired(self, height: int) -> bool:
        return height - self.created_at >= self.e_prime

    def claim(self, ctx: CallContext, t: bytes, r: bytes) -> int:
        if self.expired(ctx.height):
            raise Expired(f"created {self.created_at}, e'={self.e_prime}, now {ctx.height}")
        if self.claimed:
            raise AlreadyClaimed()
        if ctx.sender != self.payee:
            raise NotPayee(ctx.sender[:12])
        if r != exchange_key(t, bytes.fromhex(self.payee)) or cc.hash(r) != self.s:
            raise KeyEquationMismatch("r/s do not match t and payee")
        self.claimed = True
        amount = ctx.ledger.balance(ctx.self_address)
        ctx.pay(ctx.sender, amount)
        ctx.publish_key(self.s, r)
        ctx.emit("PaymentToFHD", fhd=ctx.sender, esc=ctx.self_address, amount=amount)
        return amount

    def reclaim_after_expiry(self, ctx: CallContext) -> int:
        if ctx.sender != self.creator:
            raise NotCreator(ctx.sender[:12])
        if not self.expired(ctx.height):
            raise NotExpired(f"expires at {self.created_at + self.e_prime}")
        refund = ctx.ledger.balance(ctx.self_address)
        ctx.pay(self.creator, refund)
        ctx.emit("Refund", contract=ctx.self_address, creator=self.creator, amount=refund)
        return refund


# -- transaction builders -----------------------------------------------------


def deploy_ssc_tx(owner: Address, reset_period: int, legacy: bool = False) -> Transaction:
    return Transaction(owner, None, "deploy",
                       {"code": SuperContract, "reset_period": reset_period, "legacy": legacy})


def create_dsc_tx(sender: Address, ssc: Address, deposit: int, *, e: int, update_hash: bytes,
                  package_hash: bytes, vk_d_hash: bytes, vk_e_hash: bytes, pk_e_hash: bytes,
                  targets: Iterable[bytes], a_d: int, a_h: int) -> Transaction:
    return Transaction(sender, ssc, "create_dsc", {
        "e": e, "update_hash": update_hash, "package_hash": package_hash,
        "vk_d_hash": vk_d_hash, "vk_e_hash": vk_e_hash, "pk_e_hash": pk_e_hash,
        "targets": list(targets), "a_d": a_d, "a_h": a_h,
    }, value=deposit)


def create_esc_tx(sender: Address, ssc: Address, offer: int, payee: Address, s: bytes,
                  e_prime: int) -> Transaction:
    return Transaction(sender, ssc, "create_esc",
                       {"payee": payee, "s": s, "e_prime": e_prime}, value=offer)


def submit_pod_tx(sender: Address, dsc: Address, device: bytes, t: bytes, r: bytes,
                  s: bytes, pod: bytes) -> Transaction:
    return Transaction(sender, dsc, "submit_pod",
                       {"device": device, "t": t, "r": r, "s": s, "pod": pod})


def submit_pofd_tx(sender: Address, dsc: Address, device: bytes, pofd: bytes) -> Transaction:
    return Transaction(sender, dsc, "submit_pofd", {"device": device, "pofd": pofd})


def esc_claim_tx(sender: Address, esc: Address, t: bytes, r: bytes) -> Transaction:
    return Transaction(sender, esc, "claim", {"t": t, "r": r})


def reclaim_tx(sender: Address, contract: Address) -> Transaction:
    return Transaction(sender, contract, "reclaim_after_expiry")


def find_ssc(ledger: Ledger, owner: Address) -> Address | None:
    for address in ledger.read_public("contracts", "ssc"):
        if ledger.read_public("contract", address)["owner"] == owner:
            return address
    return None


def dscs_targeting(ledger: Ledger, device: bytes) -> list[tuple[Address, dict[str, Any]]]:
    out = []
    for address in ledger.read_public("contracts", "dsc"):
        view = ledger.read_public("contract", address)
        if device in view["targets"]:
            out.append((address, view))
    return out
