"""Abstract permissionless blockchain.

Logical block height is the only clock. Transactions queue in ``pending`` and
run in order when :meth:`Ledger.advance_block` seals the next block; every
transaction is atomic, so a failing contract check restores accounts,
contract state and published keys exactly. Contracts call each other
synchronously inside the outer transaction.

Consensus, gas and forks are not modeled.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Any, Callable

from . import crypto_core as cc

log = logging.getLogger(__name__)

Address = str


class LedgerError(Exception):
    pass


class UnknownSender(LedgerError):
    pass


class NotFound(LedgerError):
    pass


class ContractError(LedgerError):
    """Raised inside contract code; rolls the transaction back."""


class InsufficientFunds(ContractError):
    pass


class UnknownEntryPoint(ContractError):
    pass


def address_of(public_key: bytes) -> Address:
    return public_key.hex()


@dataclass
class Transaction:
    sender: Address
    target: Address | None
    call: str
    args: dict[str, Any] = field(default_factory=dict)
    value: int = 0
    id: int = -1
    submitted_at: int = -1
    deferrals: int = 0


@dataclass(frozen=True)
class Receipt:
    tx_id: int
    height: int
    sender: Address
    target: Address | None
    call: str
    ok: bool
    error: str | None = None
    result: Any = None


@dataclass(frozen=True)
class PublishedKey:
    s: cc.Digest
    r: cc.SymKey
    source: Address
    height: int


class Contract:
    """Base for contract state machines hosted by the ledger.

    Subclasses list callable names in ``entry_points``; each is invoked as
    ``method(ctx, **args)``. ``deploy`` is a classmethod run by creation
    transactions (``target=None``, ``args['code']`` is the class).
    """

    kind = "contract"
    entry_points: frozenset[str] = frozenset()

    def view(self) -> dict[str, Any]:
        return copy.deepcopy(vars(self))


class CallContext:
    def __init__(self, ledger: Ledger, sender: Address, value: int, self_address: Address):
        self.ledger = ledger
        self.sender = sender
        self.value = value
        self.self_address = self_address

    @property
    def height(self) -> int:
        return self.ledger.height

    def pay(self, to: Address, amount: int) -> None:
        self.ledger._transfer(self.self_address, to, amount)

    def call(self, target: Address, name: str, value: int = 0, **args: Any) -> Any:
        return self.ledger._invoke(self.self_address, target, name, args, value)

    def deploy(self, contract: Contract, endowment: int = 0) -> Address:
        address = self.ledger._deploy(contract)
        if endowment:
            self.pay(address, endowment)
        return address

    def publish_key(self, s: bytes, r: bytes) -> None:
        self.ledger._publish_key(s, r, self.self_address)

    def emit(self, kind: str, **payload: Any) -> None:
        self.ledger._emit(kind, payload)


# Scheduler hook: receives the pending queue, returns (run_now, defer).
BlockScheduler = Callable[[list[Transaction]], tuple[list[Transaction], list[Transaction]]]


class Ledger:
    """In-memory chain state plus pending queue.

    ``max_tx_delay`` bounds how many consecutive blocks a scheduler may
    defer a transaction; beyond it the transaction is forced into the block.
    """

    def __init__(self, max_tx_delay: int = 1,
                 on_event: Callable[[str, dict[str, Any]], None] | None = None):
        self.height = 0
        self.accounts: dict[Address, int] = {}
        self.contracts: dict[Address, Contract] = {}
        self.published_keys: list[PublishedKey] = []
        self.pending: list[Transaction] = []
        self.max_tx_delay = max_tx_delay
        self.on_event = on_event
        self._next_tx = 0
        self._next_contract = 0
        self._event_buffer: list[tuple[str, dict[str, Any]]] | None = None
        self.genesis_supply = 0

    # -- genesis / bookkeeping ------------------------------------------------

    def genesis(self, address: Address, balance: int) -> None:
        if self.height != 0:
            raise LedgerError("currency can only be minted at genesis")
        if balance < 0:
            raise ValueError("negative genesis balance")
        self.accounts[address] = self.accounts.get(address, 0) + balance
        self.genesis_supply += balance

    def total_supply(self) -> int:
        return sum(self.accounts.values())

    def balance(self, address: Address) -> int:
        return self.accounts.get(address, 0)

    # -- transactions ---------------------------------------------------------

    def submit_tx(self, tx: Transaction) -> int:
        if tx.sender not in self.accounts:
            raise UnknownSender(tx.sender)
        tx.id = self._next_tx
        tx.submitted_at = self.height
        self._next_tx += 1
        self.pending.append(tx)
        return tx.id

    def advance_block(self, scheduler: BlockScheduler | None = None) -> list[Receipt]:
        self.height += 1
        queue, self.pending = self.pending, []
        if scheduler is not None and queue:
            now, later = scheduler(list(queue))
            if sorted(t.id for t in now + later) != sorted(t.id for t in queue):
                raise LedgerError("scheduler may reorder or defer but not drop or add")
            forced = [t for t in later if t.deferrals >= self.max_tx_delay]
            later = [t for t in later if t.deferrals < self.max_tx_delay]
            for t in later:
                t.deferrals += 1
            queue = now + forced
            self.pending = later
        receipts = [self._execute(tx) for tx in queue]
        return receipts

    def _snapshot(self):
        return (
            dict(self.accounts),
            copy.deepcopy(self.contracts),
            list(self.published_keys),
            self._next_contract,
        )

    def _restore(self, snap) -> None:
        self.accounts, self.contracts, self.published_keys, self._next_contract = snap

    def _execute(self, tx: Transaction) -> Receipt:
        snap = self._snapshot()
        self._event_buffer = []
        try:
            if tx.target is None:
                result = self._create(tx)
            else:
                result = self._invoke(tx.sender, tx.target, tx.call, tx.args, tx.value)
        except ContractError as exc:
            self._restore(snap)
            self._event_buffer = None
            receipt = Receipt(tx.id, self.height, tx.sender, tx.target, tx.call,
                              False, type(exc).__name__)
            self._emit("TxExecuted", _receipt_payload(receipt, str(exc)))
            return receipt
        events, self._event_buffer = self._event_buffer, None
        receipt = Receipt(tx.id, self.height, tx.sender, tx.target, tx.call, True, None, result)
        self._emit("TxExecuted", _receipt_payload(receipt))
        for kind, payload in events:
            self._emit(kind, payload)
        return receipt

    def _create(self, tx: Transaction) -> Any:
        args = dict(tx.args)
        code = args.pop("code")
        if tx.value:
            raise ContractError("creation transactions carry no value")
        ctx = CallContext(self, tx.sender, tx.value, self_address="")
        return code.deploy(ctx, **args)

    def _invoke(self, sender: Address, target: Address, name: str,
                args: dict[str, Any], value: int) -> Any:
        contract = self.contracts.get(target)
        if contract is None:
            raise UnknownEntryPoint(f"no contract at {target}")
        if name not in contract.entry_points:
            raise UnknownEntryPoint(f"{contract.kind} has no entry point {name!r}")
        if value:
            self._transfer(sender, target, value)
        ctx = CallContext(self, sender, value, target)
        return getattr(contract, name)(ctx, **args)

    def _transfer(self, src: Address, dst: Address, amount: int) -> None:
        if amount < 0:
            raise ContractError("negative transfer")
        if self.accounts.get(src, 0) < amount:
            raise InsufficientFunds(f"{src[:12]} holds {self.accounts.get(src, 0)} < {amount}")
        self.accounts[src] -= amount
        self.accounts[dst] = self.accounts.get(dst, 0) + amount

    def _deploy(self, contract: Contract) -> Address:
        self._next_contract += 1
        address = f"{contract.kind}-{self._next_contract}"
        self.contracts[address] = contract
        self.accounts.setdefault(address, 0)
        return address

    def _publish_key(self, s: bytes, r: bytes, source: Address) -> None:
        if cc.hash(r) != s:
            raise ContractError("published key does not hash to its commitment")
        self.published_keys.append(PublishedKey(s, r, source, self.height))
        self._emit("KeyPublished", {"s": s, "r": r, "source": source})

    def _emit(self, kind: str, payload: dict[str, Any]) -> None:
        if self._event_buffer is not None:
            self._event_buffer.append((kind, payload))
        elif self.on_event is not None:
            self.on_event(kind, payload)

    # -- public reads ---------------------------------------------------------

    def read_public(self, query: str, *args: Any) -> Any:
        """Unblockable read access shared by every actor, honest or not.

        Queries: ``contract``, ``contracts``, ``published_key``,
        ``published_keys``, ``balance``, ``score``, ``height``.
        """
        handler = getattr(self, f"_q_{query}", None)
        if handler is None:
            raise NotFound(f"unknown query {query!r}")
        return handler(*args)

    def _q_height(self) -> int:
        return self.height

    def _q_balance(self, address: Address) -> int:
        return self.balance(address)

    def _q_contract(self, address: Address) -> dict[str, Any]:
        contract = self.contracts.get(address)
        if contract is None:
            raise NotFound(address)
        return contract.view()

    def _q_contracts(self, kind: str | None = None) -> list[Address]:
        return [a for a, c in self.contracts.items() if kind is None or c.kind == kind]

    def _q_published_key(self, s: bytes) -> bytes:
        for pk in self.published_keys:
            if pk.s == s:
                return pk.r
        raise NotFound(s.hex())

    def _q_published_keys(self) -> tuple[PublishedKey, ...]:
        return tuple(self.published_keys)

    def _q_score(self, ssc: Address, distributor: Address, at_height: int | None = None) -> int:
        contract = self.contracts.get(ssc)
        if contract is None:
            raise NotFound(ssc)
        return contract.get_score(distributor, self.height if at_height is None else at_height)


def _receipt_payload(receipt: Receipt, detail: str | None = None) -> dict[str, Any]:
    payload = {
        "tx": receipt.tx_id,
        "sender": receipt.sender,
        "target": receipt.target,
        "call": receipt.call,
        "ok": receipt.ok,
        "error": receipt.error,
    }
    if detail:
        payload["detail"] = detail
    return payload
