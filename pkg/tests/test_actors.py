"""Participant state machines, driven directly or through short runs."""

import pytest

from crowdpatch import contracts as ct
from crowdpatch import crypto_core as cc
from crowdpatch import zk
from crowdpatch.actors import Distributor
from crowdpatch.actors.base import Package
from crowdpatch.actors.device import (
    BadManufacturerSignature,
    HashMismatch,
    NoCommitment,
    id_response_message,
)
from crowdpatch.harness.config import AttackerSpec, DistributorSpec, ReleaseParams
from crowdpatch.harness.runner import build_simulation, run_scenario
from crowdpatch.harness.scenarios import dde, happy_path
from crowdpatch.messages import MessageKind


@pytest.fixture
def sim():
    return build_simulation(happy_path(seed=3))


def sig_m_for(sim, update_hash):
    mfr = sim.actors["manufacturer"]
    return cc.sign(mfr.keys.private, ct.manufacturer_message(update_hash)).value


class TestPackage:
    def test_round_trip(self, sim):
        mfr = sim.actors["manufacturer"]
        mfr.build_release()
        p = mfr.package
        assert Package.from_bytes(p.to_bytes()) == p
        assert p.digest() == cc.hash(p.to_bytes())

    def test_rejects_swapped_roles(self, sim):
        mfr = sim.actors["manufacturer"]
        mfr.build_release()
        p = mfr.package
        bad = cc.canonical_encode(cc.Context.PACKAGE, [
            p.update, p.verifying_key.to_bytes(), p.proving_key.to_bytes(), p.sig_m])
        with pytest.raises(ValueError):
            Package.from_bytes(bad)


class TestDevice:
    def test_id_response_binds_challenge_and_nonce(self, sim):
        dev = sim.actors["dev0"]
        c = sim.rng.nonce()
        n2, sig = dev.iot_sign_id(c)
        assert n2
        assert cc.verify_sig(dev.pub, id_response_message(c, n2, False), sig)
        assert not cc.verify_sig(dev.pub, id_response_message(c, sim.rng.nonce(), False), sig)

    def test_crafted_challenge_is_no_pod(self, sim):
        dev = sim.actors["dev0"]
        u_h, s = cc.hash(b"U"), cc.hash(b"r")
        for c in (u_h + s, ct.pod_message(u_h, s).encode()):
            _, sig = dev.iot_sign_id(c)
            assert not cc.verify_sig(dev.pub, ct.pod_message(u_h, s), sig)

    def test_crafted_challenge_is_pod_under_raw_framing(self):
        sim = build_simulation(happy_path(seed=3).with_(mode="legacy-leiba"))
        dev = sim.actors["dev0"]
        u_h, s = cc.hash(b"U"), cc.hash(b"r")
        n2, sig = dev.iot_sign_id(u_h + s)
        assert n2 == b""
        assert cc.verify_sig(dev.pub, ct.pod_message(u_h, s, legacy=True), sig)

    def test_issue_pod(self, sim):
        dev = sim.actors["dev0"]
        u_h, s = cc.hash(sim.actors["manufacturer"].update), cc.hash(b"r")
        pod = dev.iot_issue_pod(u_h, sig_m_for(sim, u_h), s)
        assert cc.verify_sig(dev.pub, ct.pod_message(u_h, s), pod)

    def test_forged_sig_m(self, sim):
        dev = sim.actors["dev0"]
        u_h = cc.hash(b"evil")
        forged = cc.sign(sim.rng.keypair().private, ct.manufacturer_message(u_h)).value
        with pytest.raises(BadManufacturerSignature):
            dev.iot_issue_pod(u_h, forged, cc.hash(b"r"))
        assert dev.commitments == {}

    def test_sig_m_for_other_update(self, sim):
        dev = sim.actors["dev0"]
        real = cc.hash(sim.actors["manufacturer"].update)
        with pytest.raises(BadManufacturerSignature):
            dev.iot_issue_pod(cc.hash(b"other"), sig_m_for(sim, real), cc.hash(b"r"))

    def test_competing_pods_issued(self, sim):
        dev = sim.actors["dev0"]
        u_h = cc.hash(sim.actors["manufacturer"].update)
        sig_m = sig_m_for(sim, u_h)
        p1 = dev.iot_issue_pod(u_h, sig_m, cc.hash(b"r1"))
        p2 = dev.iot_issue_pod(u_h, sig_m, cc.hash(b"r2"))
        assert p1 != p2 and len(dev.commitments[u_h]) == 2

    def test_finalize(self, sim):
        dev, hub = sim.actors["dev0"], sim.actors["hub0"]
        update = sim.actors["manufacturer"].update
        u_h = cc.hash(update)
        dev.iot_issue_pod(u_h, sig_m_for(sim, u_h), cc.hash(b"r"))
        pofd = dev.iot_finalize(update, hub.pub)
        assert dev.installed_update_hash == u_h
        assert cc.verify_sig(dev.pub, ct.pofd_message(u_h, hub.pub), pofd)

    def test_tampered_update(self, sim):
        dev, hub = sim.actors["dev0"], sim.actors["hub0"]
        update = sim.actors["manufacturer"].update
        u_h = cc.hash(update)
        dev.iot_issue_pod(u_h, sig_m_for(sim, u_h), cc.hash(b"r"))
        with pytest.raises(HashMismatch):
            dev.iot_finalize(update[:-1] + bytes([update[-1] ^ 1]), hub.pub)
        assert dev.installed_update_hash is None

    def test_no_commitment(self, sim):
        dev, hub = sim.actors["dev0"], sim.actors["hub0"]
        with pytest.raises(NoCommitment):
            dev.iot_finalize(sim.actors["manufacturer"].update, hub.pub)

    def test_ignores_strangers(self, sim):
        dev = sim.actors["dev0"]
        dev.on_id_challenge("d0", {"c": b"c"})
        assert not sim.network.queue


class TestManufacturer:
    def test_release(self):
        r = run_scenario(happy_path(seed=1))
        dsc = r.sim.actors["manufacturer"].dsc
        view = r.sim.ledger.read_public("contract", dsc)
        assert len(view["targets"]) == 3
        assert view["update_hash"] == r.update_hash
        assert r.events("SeedWindowOpen")

    def test_deposit_below_bound(self):
        cfg = happy_path(seed=1).with_(release=ReleaseParams(deposit=20))
        r = run_scenario(cfg)
        assert r.events("ReleaseFailed")[0].get("error") == "InsufficientDeposit"
        assert r.sim.ledger.read_public("contracts", "dsc") == []
        assert not r.events("PackageAcquired") and not r.installed()

    def test_reclaim_after_expiry(self):
        cfg = happy_path(seed=1).with_(distributors=[],
                                       release=ReleaseParams(e=10, reclaim=True))
        r = run_scenario(cfg)
        (refund,) = r.events("Refund")
        assert refund.get("amount") == cfg.deposit
        assert r.balance_of("manufacturer") == cfg.deposit


class TestDistributor:
    def test_seed_then_deliver(self):
        r = run_scenario(happy_path(seed=2))
        via = {e.actor: e.get("via") for e in r.events("PackageAcquired")}
        assert via == {"d0": "seed", "d1": "seed", "d2": "seed"}
        paid = sum(r.balance_of(d) for d in ("d0", "d1", "d2"))
        assert paid == 3 * r.config.release.a_d

    def test_late_joiner_uses_exchange(self):
        r = run_scenario(dde(seed=2))
        assert [e.actor for e in r.events("SeedClosed")] == ["shd0"]
        (acq,) = [e for e in r.events("PackageAcquired") if e.actor == "shd0"]
        assert acq.get("via") == "dde" and acq.get("source") == "fhd0"

    def test_device_not_in_list(self):
        r = run_scenario(happy_path(seed=2))
        sim, d0 = r.sim, r.sim.actors["d0"]
        stranger = sim.rng.keypair()
        proofs = len(r.events("GenProof"))
        n1 = sim.rng.nonce()
        d0.on_update_request("hub0", {"update_hash": r.update_hash, "n1": n1,
                                      "device": stranger.public, "hub": b""})
        c = next(c for c, s in d0.sessions.items() if s.n1 == n1)
        n2 = sim.rng.nonce()
        sig = cc.sign(stranger.private, id_response_message(c, n2, False)).value
        d0.on_id_response("hub0", {"c": c, "n2": n2, "sig_id": sig, "device": stranger.public})
        assert r.events("SessionAbort")[-1].get("reason") == "DeviceNotInList"
        assert len(r.events("GenProof")) == proofs

    def test_bad_id_signature(self):
        r = run_scenario(happy_path(seed=2))
        sim, d0 = r.sim, r.sim.actors["d0"]
        n1 = sim.rng.nonce()
        dev = sim.actors["dev0"]
        d0.on_update_request("hub0", {"update_hash": r.update_hash, "n1": n1,
                                      "device": dev.pub, "hub": b""})
        c = next(c for c, s in d0.sessions.items() if s.n1 == n1)
        d0.on_id_response("hub0", {"c": c, "n2": b"n", "sig_id": bytes(64), "device": dev.pub})
        assert r.violations()[-1].get("check") == "IdResponseSignature"


class CheatingSeller(Distributor):
    """Proves a correct encryption of the wrong package."""

    def on_dde_challenge_response(self, sender, f):
        pkg = self.package
        other = Package(bytes(len(pkg.update)), pkg.proving_key, pkg.verifying_key, pkg.sig_m)
        data = other.to_bytes()
        t = self.sim.rng.randbytes(32)
        r = ct.exchange_key(t, self.pub)
        ciphertext = cc.sym_encrypt(data, r, self.sim.rng)
        public = zk.PublicInputs(cc.hash(data), ciphertext, cc.hash(r))
        pk_e, vk_e = self.exchange_keys
        proof = self.sim.zk.prove(zk.key_from_bytes(pk_e), public, zk.Witness(data, r))
        self.send(sender, MessageKind.DDE_PROOF_DELIVERY, c=f["c"], proof=proof.to_bytes(),
                  ciphertext=ciphertext, s=cc.hash(r), vk=vk_e, pk=pk_e, fhd=self.pub)


class SilentSeller(Distributor):
    """Delivers an honest exchange proof but never claims the ESC."""

    def _claim_exchanges(self):
        pass


def swap_seller(sim, cls):
    old = sim.actors["fhd0"]
    sim.actors["fhd0"] = cls("fhd0", sim, deliver=False, keys=old.keys)


class TestExchange:
    def test_honest(self):
        r = run_scenario(dde(seed=4, offer=7))
        assert r.balance_of("fhd0") == 7
        (paid,) = r.events("PaymentToFHD")
        assert paid.get("amount") == 7
        shd = r.sim.actors["shd0"]
        assert shd.package.to_bytes() == r.sim.actors["manufacturer"].package.to_bytes()

    def test_wrong_package_rejected(self):
        cfg = dde(seed=4, offer=7).with_(release=ReleaseParams(seed_window=4, e=20))
        sim = build_simulation(cfg)
        swap_seller(sim, CheatingSeller)
        sim.run()
        checks = [e.get("check") for e in sim.trace.of_kind("Violation")]
        assert "ProofInvalid" in checks
        assert not sim.trace.of_kind("EscCreated")
        assert sim.balance("fhd0") == 0 and sim.balance("shd0") == 7

    def test_unclaimed_escrow_returned(self):
        cfg = dde(seed=4, offer=7).with_(release=ReleaseParams(seed_window=4, e=30))
        cfg.distributors[1].esc_expiry = 5
        sim = build_simulation(cfg)
        swap_seller(sim, SilentSeller)
        sim.run()
        assert sim.trace.of_kind("EscCreated")
        assert sim.trace.of_kind("ExchangeExpired")
        assert [e.get("creator") for e in sim.trace.of_kind("Refund")] == [sim.actors["shd0"].address]
        assert sim.balance("shd0") == 7 and sim.balance("fhd0") == 0

    def test_score_gate(self):
        cfg = dde(seed=4)
        cfg.distributors[0].dde_threshold = 1
        r = run_scenario(cfg.with_(max_blocks=60))
        assert any(e.get("reason") == "ScoreTooLow" for e in r.events("ExchangeRefused"))
        assert not [e for e in r.events("PackageAcquired") if e.actor == "shd0"]


class TestHub:
    def test_honest_rewards(self):
        r = run_scenario(happy_path(seed=5))
        a_h = r.config.release.a_h
        assert r.balance_of("hub0") == 2 * a_h and r.balance_of("hub1") == a_h
        assert len(r.events("UpdateReadyForIoT")) == 3

    def test_false_announcer_skipped(self):
        cfg = happy_path(seed=5).with_(attackers=[AttackerSpec("mallory", "challenge_forger")])
        r = run_scenario(cfg)
        assert len(r.installed()) == 3
        assert r.balance_of("mallory") == 0
        mallory = r.sim.actors["mallory"]
        assert mallory.outcomes and not any(o.ok for o in mallory.outcomes)
        assert any(e.get("distributor") == "mallory" for e in r.events("SessionAbort"))

    def test_score_threshold_blocks_unknown_distributors(self):
        cfg = happy_path(seed=5).with_(release=ReleaseParams(score_threshold=1, e=12))
        r = run_scenario(cfg)
        assert r.events("DistributorRejected")
        assert not r.events("PaymentToD") and not r.installed()

    def test_compromised_hub(self):
        cfg = happy_path(seed=5).with_(compromised_hubs=["hub1"],
                                       expected_violations=["HashMismatch"])
        r = run_scenario(cfg)
        assert set(r.installed()) == {"dev0", "dev1"}
        assert r.sim.actors["dev2"].installed_update_hash is None
        assert [e.get("check") for e in r.violations()].count("HashMismatch") >= 1
        assert r.balance_of("hub1") == 0
        assert len(r.events("PaymentToD")) == 3
        assert any(e.actor == "hub1" for e in r.events("HubGaveUp"))
        assert r.exit_code == 0
