"""Ledger queue semantics, atomicity and public reads."""

import pytest

from crowdpatch import contracts as ct
from crowdpatch import crypto_core as cc
from crowdpatch.ledger import (
    CallContext,
    Contract,
    ContractError,
    Ledger,
    LedgerError,
    NotFound,
    Transaction,
    UnknownSender,
)


class Counter(Contract):
    """Test contract: increments, pays out and can fail after mutating."""

    kind = "counter"
    entry_points = frozenset({"bump", "bump_then_fail", "payout"})

    def __init__(self):
        self.n = 0

    @classmethod
    def deploy(cls, ctx: CallContext) -> str:
        return ctx.deploy(cls())

    def bump(self, ctx):
        self.n += 1
        ctx.emit("Bumped", n=self.n)
        return self.n

    def bump_then_fail(self, ctx):
        self.n += 100
        ctx.pay(ctx.sender, ctx.value)
        ctx.emit("Bumped", n=self.n)
        raise ContractError("boom")

    def payout(self, ctx, to, amount):
        ctx.pay(to, amount)


@pytest.fixture
def ledger():
    events = []
    lg = Ledger(on_event=lambda k, p: events.append((k, p)))
    lg.events = events
    lg.genesis("alice", 50)
    lg.genesis("bob", 10)
    return lg


def deploy_counter(lg) -> str:
    lg.submit_tx(Transaction("alice", None, "deploy", {"code": Counter}))
    (rc,) = lg.advance_block()
    assert rc.ok
    return rc.result


class TestQueue:
    def test_empty_block(self, ledger):
        before = dict(ledger.accounts)
        assert ledger.advance_block() == []
        assert ledger.height == 1 and ledger.accounts == before

    def test_submit_then_execute(self, ledger):
        addr = deploy_counter(ledger)
        ledger.submit_tx(Transaction("bob", addr, "bump"))
        (rc,) = ledger.advance_block()
        assert rc.ok and rc.result == 1 and rc.height == 2

    def test_queue_order(self, ledger):
        addr = deploy_counter(ledger)
        ids = [ledger.submit_tx(Transaction("bob", addr, "bump")) for _ in range(3)]
        rcs = ledger.advance_block()
        assert [r.tx_id for r in rcs] == ids and [r.result for r in rcs] == [1, 2, 3]

    def test_unknown_sender(self, ledger):
        with pytest.raises(UnknownSender):
            ledger.submit_tx(Transaction("mallory", None, "deploy"))

    def test_unknown_entry_point_fails(self, ledger):
        addr = deploy_counter(ledger)
        ledger.submit_tx(Transaction("bob", addr, "nope"))
        (rc,) = ledger.advance_block()
        assert not rc.ok and rc.error == "UnknownEntryPoint"

    def test_no_minting_after_genesis(self, ledger):
        ledger.advance_block()
        with pytest.raises(LedgerError):
            ledger.genesis("carol", 1)


class TestAtomicity:
    def test_value_above_balance(self, ledger):
        addr = deploy_counter(ledger)
        before = dict(ledger.accounts)
        ledger.submit_tx(Transaction("bob", addr, "bump", value=11))
        (rc,) = ledger.advance_block()
        assert not rc.ok and rc.error == "InsufficientFunds"
        assert ledger.accounts == before
        assert ledger.contracts[addr].n == 0

    def test_failure_rolls_back_state_and_events(self, ledger):
        addr = deploy_counter(ledger)
        before = dict(ledger.accounts)
        ledger.events.clear()
        ledger.submit_tx(Transaction("bob", addr, "bump_then_fail", value=4))
        (rc,) = ledger.advance_block()
        assert not rc.ok and rc.error == "ContractError"
        assert ledger.accounts == before and ledger.contracts[addr].n == 0
        assert [k for k, _ in ledger.events] == ["TxExecuted"]

    def test_events_follow_receipt(self, ledger):
        addr = deploy_counter(ledger)
        ledger.events.clear()
        ledger.submit_tx(Transaction("bob", addr, "bump"))
        ledger.advance_block()
        assert [k for k, _ in ledger.events] == ["TxExecuted", "Bumped"]

    def test_transfer_conserves_supply(self, ledger):
        addr = deploy_counter(ledger)
        ledger.submit_tx(Transaction("alice", addr, "bump", value=20))
        ledger.submit_tx(Transaction("bob", addr, "payout", {"to": "bob", "amount": 15}))
        ledger.advance_block()
        assert ledger.balance("bob") == 25 and ledger.balance(addr) == 5
        assert ledger.total_supply() == ledger.genesis_supply == 60

    def test_negative_transfer_rejected(self, ledger):
        addr = deploy_counter(ledger)
        ledger.submit_tx(Transaction("bob", addr, "payout", {"to": "bob", "amount": -1}))
        (rc,) = ledger.advance_block()
        assert not rc.ok


class TestScheduler:
    def test_reorder(self, ledger):
        addr = deploy_counter(ledger)
        ids = [ledger.submit_tx(Transaction("bob", addr, "bump")) for _ in range(3)]
        rcs = ledger.advance_block(lambda q: (list(reversed(q)), []))
        assert [r.tx_id for r in rcs] == ids[::-1]

    def test_drop_refused(self, ledger):
        addr = deploy_counter(ledger)
        ledger.submit_tx(Transaction("bob", addr, "bump"))
        with pytest.raises(LedgerError):
            ledger.advance_block(lambda q: ([], []))

    def test_deferral_is_bounded(self, ledger):
        ledger.max_tx_delay = 2
        addr = deploy_counter(ledger)
        tx_id = ledger.submit_tx(Transaction("bob", addr, "bump"))
        defer_all = lambda q: ([], q)  # noqa: E731
        assert ledger.advance_block(defer_all) == []
        assert ledger.advance_block(defer_all) == []
        (rc,) = ledger.advance_block(defer_all)
        assert rc.tx_id == tx_id and rc.ok


class TestPublicReads:
    def test_published_key(self, chain):
        dsc = chain.release()
        tx = chain.submit_pod(dsc, 0, 0)
        assert chain.run(tx).ok
        s, r = tx.args["s"], tx.args["r"]
        got = chain.ledger.read_public("published_key", s)
        assert got == r and cc.hash(got) == s

    def test_missing_key(self, chain):
        with pytest.raises(NotFound):
            chain.ledger.read_public("published_key", b"\x00" * 32)

    def test_unknown_query(self, chain):
        with pytest.raises(NotFound):
            chain.ledger.read_public("secrets")

    def test_views_are_copies(self, chain):
        dsc = chain.release()
        view = chain.ledger.read_public("contract", dsc)
        view["a_d"] = 10**6
        assert chain.ledger.read_public("contract", dsc)["a_d"] == chain.a_d

    def test_score_of_unknown_distributor(self, chain):
        ssc = chain.deploy_ssc()
        assert chain.ledger.read_public("score", ssc, "nobody") == 0

    def test_everyone_reads_the_same_view(self, chain):
        dsc = chain.release()
        assert chain.ledger.read_public("contract", dsc) == chain.ledger.read_public("contract", dsc)
        assert chain.ledger.read_public("contracts", "dsc") == [dsc]

    def test_identical_inputs_identical_state(self):
        def final(seed):
            from conftest import Chain
            c = Chain(seed=seed)
            dsc = c.release()
            c.run(c.submit_pod(dsc, 1, 2))
            return c.ledger.accounts, c.events

        assert final(3) == final(3)


class TestDscPayout:
    def test_pod_payout_conserves(self, chain):
        dsc = chain.release()
        d = chain.dists[0]
        before_d, before_c = chain.balance(d), chain.balance(dsc)
        total = chain.ledger.total_supply()
        assert chain.run(chain.submit_pod(dsc, 0, 0)).ok
        assert chain.balance(d) - before_d == chain.a_d
        assert before_c - chain.balance(dsc) == chain.a_d
        assert chain.ledger.total_supply() == total

    def test_expiry_boundary(self):
        from conftest import Chain
        c = Chain(e=10)
        dsc = c.release()
        h0 = c.ledger.read_public("contract", dsc)["created_at"]
        rc = c.run_at(h0 + 10, c.submit_pod(dsc, 0, 0))
        assert not rc.ok and rc.error == "Expired"

    def test_deploy_ssc_contract_class_helper(self, chain):
        ssc = chain.deploy_ssc()
        assert ct.find_ssc(chain.ledger, chain.addr(chain.mfr)) == ssc
        assert ct.find_ssc(chain.ledger, chain.addr(chain.stranger)) is None
