"""SSC, DSC and ESC guards, payouts and score bookkeeping."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import Chain
from crowdpatch import contracts as ct
from crowdpatch import crypto_core as cc


def score_oracle(deliveries, reset_period, at):
    """Independent model: a delivery at h sets score to 1 if the previous
    one is reset_period or more blocks old, else adds one. A read at
    height ``at`` returns 0 once reset_period blocks passed since the last."""
    score, last = 0, None
    for h in deliveries:
        score = 1 if last is None or h - last >= reset_period else score + 1
        last = h
    if last is None or at - last >= reset_period:
        return 0
    return score


class TestSuperContract:
    def test_deploy(self, chain):
        ssc = chain.deploy_ssc()
        view = chain.ledger.read_public("contract", ssc)
        assert view["scores"] == {} and view["owner"] == chain.addr(chain.mfr)

    def test_second_deploy_rejected(self, chain):
        chain.deploy_ssc()
        rc = chain.run(ct.deploy_ssc_tx(chain.addr(chain.mfr), 10))
        assert rc.error == "AlreadyDeployed"

    def test_bad_reset_period(self, chain):
        assert not chain.run(ct.deploy_ssc_tx(chain.addr(chain.mfr), 0)).ok

    def test_record_delivery_only_from_children(self, chain):
        ssc = chain.deploy_ssc()
        rc = chain.run(ct.Transaction(chain.addr(chain.stranger), ssc, "record_delivery",
                                      {"distributor": "x"}))
        assert rc.error == "UnauthorizedCaller"


class TestCreateDsc:
    def test_deposit_at_bound(self, chain):
        chain.deploy_ssc()
        rc = chain.run(chain.create_dsc_tx(deposit=21))
        assert rc.ok
        assert chain.balance(rc.result) == 21
        view = chain.ledger.read_public("contract", rc.result)
        assert len(view["targets"]) == 3
        for key in ("update_hash", "package_hash", "vk_d_hash", "vk_e_hash", "pk_e_hash"):
            assert len(view[key]) == cc.DIGEST_SIZE

    def test_deposit_below_bound(self, chain):
        chain.deploy_ssc()
        before = chain.balance(chain.mfr)
        rc = chain.run(chain.create_dsc_tx(deposit=20))
        assert rc.error == "InsufficientDeposit"
        assert chain.balance(chain.mfr) == before
        assert chain.ledger.read_public("contracts", "dsc") == []

    @given(st.integers(1, 5), st.integers(0, 6), st.integers(0, 6), st.integers(-3, 3))
    @settings(max_examples=30, deadline=None)
    def test_deposit_boundary_property(self, n, a_d, a_h, delta):
        c = Chain(n_devices=n, a_d=a_d, a_h=a_h, funds=200)
        c.deploy_ssc()
        bound = n * (a_d + a_h)
        deposit = bound + delta
        if deposit < 0:
            return
        rc = c.run(c.create_dsc_tx(deposit=deposit))
        assert rc.ok == (deposit >= bound)

    def test_non_owner(self, chain):
        chain.deploy_ssc()
        assert chain.run(chain.create_dsc_tx(sender=chain.stranger)).error == "NotOwner"

    def test_duplicate_target(self, chain):
        chain.deploy_ssc()
        dev = chain.devices[0].public
        assert not chain.run(chain.create_dsc_tx(targets=[dev, dev], deposit=50)).ok


class TestSubmitPod:
    def test_honest(self, chain):
        dsc = chain.release()
        tx = chain.submit_pod(dsc, 0, 0)
        rc = chain.run(tx)
        assert rc.ok and rc.result == chain.a_d
        assert chain.ledger.read_public("published_key", tx.args["s"]) == tx.args["r"]
        assert chain.ledger.read_public("score", chain.ssc, chain.addr(chain.dists[0])) == 1
        assert {"PaymentToD", "KeyPublished", "ScoreUpdated"} <= set(chain.kinds())

    def test_expiry_boundary(self):
        c = Chain(e=12)
        dsc = c.release()
        h0 = c.ledger.read_public("contract", dsc)["created_at"]
        assert c.run_at(h0 + 11, c.submit_pod(dsc, 0, 0)).ok
        assert c.run(c.submit_pod(dsc, 1, 1)).error == "Expired"
        assert c.ledger.height == h0 + 12

    def test_double_submission(self, chain):
        dsc = chain.release()
        assert chain.run(chain.submit_pod(dsc, 0, 0)).ok
        assert chain.run(chain.submit_pod(dsc, 0, 1)).error == "UnknownOrServedDevice"
        assert chain.run(chain.submit_pod(dsc, 0, 0)).error == "UnknownOrServedDevice"

    def test_unknown_device(self, chain):
        dsc = chain.release()
        args = {**chain.pod_args(0, 0), "device": chain.stranger.public}
        tx = ct.submit_pod_tx(chain.addr(chain.dists[0]), dsc, **args)
        assert chain.run(tx).error == "UnknownOrServedDevice"

    def test_replay_with_crafted_keys(self, chain):
        # attacker sees (t, r, s, pod) in the mempool and crafts t', r', s'
        # that satisfy both key equations for its own address
        dsc = chain.release()
        honest = chain.pod_args(0, 0)
        thief = chain.dists[2]
        t2 = chain.rng.nonce()
        r2 = ct.delivery_key(t2, honest["device"], thief.public)
        crafted = ct.submit_pod_tx(chain.addr(thief), dsc, honest["device"], t2, r2,
                                   cc.hash(r2), honest["pod"])
        assert chain.run(crafted).error == "BadSignature"
        verbatim = ct.submit_pod_tx(chain.addr(thief), dsc, **honest)
        assert chain.run(verbatim).error == "KeyEquationMismatch"
        before = chain.balance(chain.dists[0])
        assert chain.run(ct.submit_pod_tx(chain.addr(chain.dists[0]), dsc, **honest)).ok
        assert chain.balance(chain.dists[0]) == before + chain.a_d
        assert chain.balance(thief) == chain.funds

    def test_key_equation(self, chain):
        dsc = chain.release()
        args = chain.pod_args(0, 0)
        tx = ct.submit_pod_tx(chain.addr(chain.dists[0]), dsc, **{**args, "s": cc.hash(b"x")})
        assert chain.run(tx).error == "KeyEquationMismatch"

    def test_failure_changes_nothing(self, chain):
        dsc = chain.release()
        before = dict(chain.ledger.accounts)
        chain.run(chain.submit_pod(dsc, 0, 0, pod=bytes(64)))
        assert chain.ledger.accounts == before
        assert chain.ledger.published_keys == []
        assert chain.ledger.read_public("contract", dsc)["targets"][chain.devices[0].public]["pod"] is None


class TestSubmitPofd:
    def test_honest(self, chain):
        dsc = chain.release()
        before = chain.balance(chain.hub)
        rc = chain.run(ct.submit_pofd_tx(chain.addr(chain.hub), dsc, chain.devices[0].public,
                                         chain.pofd(0)))
        assert rc.ok and chain.balance(chain.hub) == before + chain.a_h

    def test_replayed_by_other_sender(self, chain):
        dsc = chain.release()
        rc = chain.run(ct.submit_pofd_tx(chain.addr(chain.stranger), dsc,
                                         chain.devices[0].public, chain.pofd(0)))
        assert rc.error == "BadSignature"

    def test_second_pofd(self, chain):
        dsc = chain.release()
        dev = chain.devices[0].public
        assert chain.run(ct.submit_pofd_tx(chain.addr(chain.hub), dsc, dev, chain.pofd(0))).ok
        rc = chain.run(ct.submit_pofd_tx(chain.addr(chain.hub), dsc, dev, chain.pofd(0)))
        assert rc.error == "UnknownOrServedDevice"


class TestScores:
    def test_sequence_with_reset(self):
        c = Chain(n_devices=4, reset_period=10, e=100)
        dsc = c.release()
        d = c.addr(c.dists[0])
        observed = []
        for i, height in enumerate([5, 7, 17]):
            c.run_at(height, c.submit_pod(dsc, i, 0))
            observed.append(c.ledger.read_public("score", c.ssc, d))
        assert observed == [1, 2, 1]

    def test_three_within_period(self):
        c = Chain(n_devices=3, reset_period=50)
        dsc = c.release()
        for i in range(3):
            c.run(c.submit_pod(dsc, i, 1))
        assert c.ledger.read_public("score", c.ssc, c.addr(c.dists[1])) == 3

    def test_lazy_reset_and_boundary_read(self):
        c = Chain(n_devices=5, reset_period=10, e=100)
        dsc = c.release()
        for i in range(5):
            c.run(c.submit_pod(dsc, i, 0))
        last = c.ledger.height
        d = c.addr(c.dists[0])
        assert c.ledger.read_public("score", c.ssc, d, last + 9) == 5
        assert c.ledger.read_public("score", c.ssc, d, last + 10) == 0
        c.idle(10)
        assert c.ledger.read_public("score", c.ssc, d) == 0

    @given(st.lists(st.integers(1, 8), min_size=1, max_size=6), st.integers(2, 12),
           st.integers(0, 15))
    @settings(max_examples=30, deadline=None)
    def test_matches_oracle(self, gaps, reset_period, read_after):
        c = Chain(n_devices=len(gaps), reset_period=reset_period, e=500, n_distributors=1)
        dsc = c.release()
        heights = []
        for i, gap in enumerate(gaps):
            rc = c.run_at(c.ledger.height + gap, c.submit_pod(dsc, i, 0))
            assert rc.ok
            heights.append(rc.height)
        at = c.ledger.height + read_after
        got = c.ledger.read_public("score", c.ssc, c.addr(c.dists[0]), at)
        assert got == score_oracle(heights, reset_period, at)


class TestReclaim:
    def test_refund_residual(self):
        c = Chain(e=10)
        dsc = c.release()
        c.run(c.submit_pod(dsc, 0, 0))
        c.run(ct.submit_pofd_tx(c.addr(c.hub), dsc, c.devices[0].public, c.pofd(0)))
        c.run(c.submit_pod(dsc, 1, 1))
        view = c.ledger.read_public("contract", dsc)
        unserved_pod = sum(1 for v in view["targets"].values() if v["pod"] is None)
        unserved_pofd = sum(1 for v in view["targets"].values() if v["pofd"] is None)
        expected = unserved_pod * c.a_d + unserved_pofd * c.a_h
        assert expected == 1 * 5 + 2 * 2
        c.idle(10)
        before = c.balance(c.mfr)
        rc = c.run(ct.reclaim_tx(c.addr(c.mfr), dsc))
        assert rc.ok and rc.result == expected
        assert c.balance(c.mfr) == before + expected and c.balance(dsc) == 0

    def test_two_unserved(self):
        c = Chain(e=10)
        dsc = c.release()
        c.run(c.submit_pod(dsc, 0, 0))
        c.run(ct.submit_pofd_tx(c.addr(c.hub), dsc, c.devices[0].public, c.pofd(0)))
        c.idle(10)
        assert c.run(ct.reclaim_tx(c.addr(c.mfr), dsc)).result == 2 * (c.a_d + c.a_h)

    def test_before_expiry(self, chain):
        dsc = chain.release()
        assert chain.run(ct.reclaim_tx(chain.addr(chain.mfr), dsc)).error == "NotExpired"

    def test_stranger(self, chain):
        dsc = chain.release()
        chain.idle(chain.e)
        assert chain.run(ct.reclaim_tx(chain.addr(chain.stranger), dsc)).error == "NotCreator"


class TestExchange:
    def make(self, chain, offer=7, e_prime=5):
        chain.deploy_ssc()
        shd, fhd = chain.dists[1], chain.dists[0]
        t = chain.rng.nonce()
        r = ct.exchange_key(t, fhd.public)
        rc = chain.run(ct.create_esc_tx(chain.addr(shd), chain.ssc, offer, chain.addr(fhd),
                                        cc.hash(r), e_prime))
        return rc, shd, fhd, t, r

    def test_escrow(self, chain):
        rc, shd, *_ = self.make(chain)
        assert rc.ok
        assert chain.balance(shd) == chain.funds - 7 and chain.balance(rc.result) == 7

    def test_zero_offer(self, chain):
        rc, shd, fhd, t, r = self.make(chain, offer=0)
        assert rc.ok
        claim = chain.run(ct.esc_claim_tx(chain.addr(fhd), rc.result, t, r))
        assert claim.ok and claim.result == 0

    def test_offer_above_balance(self, chain):
        rc, *_ = self.make(chain, offer=chain.funds + 1)
        assert rc.error == "InsufficientFunds"

    def test_claim(self, chain):
        rc, shd, fhd, t, r = self.make(chain)
        claim = chain.run(ct.esc_claim_tx(chain.addr(fhd), rc.result, t, r))
        assert claim.ok and chain.balance(fhd) == chain.funds + 7
        assert chain.ledger.read_public("published_key", cc.hash(r)) == r
        package = b"package-bytes"
        ciphertext = cc.sym_encrypt(package, r, chain.rng)
        assert cc.sym_decrypt(ciphertext, chain.ledger.read_public("published_key", cc.hash(r))) == package

    def test_claim_by_observer(self, chain):
        rc, shd, fhd, t, r = self.make(chain)
        claim = chain.run(ct.esc_claim_tx(chain.addr(chain.stranger), rc.result, t, r))
        assert claim.error == "NotPayee"

    def test_mismatched_key(self, chain):
        rc, shd, fhd, t, r = self.make(chain)
        claim = chain.run(ct.esc_claim_tx(chain.addr(fhd), rc.result, t, cc.hash(r)))
        assert claim.error == "KeyEquationMismatch"

    def test_double_claim(self, chain):
        rc, shd, fhd, t, r = self.make(chain)
        assert chain.run(ct.esc_claim_tx(chain.addr(fhd), rc.result, t, r)).ok
        assert chain.run(ct.esc_claim_tx(chain.addr(fhd), rc.result, t, r)).error == "AlreadyClaimed"

    def test_expired_claim_and_reclaim(self, chain):
        rc, shd, fhd, t, r = self.make(chain, e_prime=3)
        assert chain.run(ct.reclaim_tx(chain.addr(shd), rc.result)).error == "NotExpired"
        chain.idle(3)
        assert chain.run(ct.esc_claim_tx(chain.addr(fhd), rc.result, t, r)).error == "Expired"
        assert chain.run(ct.reclaim_tx(chain.addr(fhd), rc.result)).error == "NotCreator"
        assert chain.run(ct.reclaim_tx(chain.addr(shd), rc.result)).ok
        assert chain.balance(shd) == chain.funds
