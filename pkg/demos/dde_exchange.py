"""A distributor that missed the seed window buys the package from one
that did not, through an exchange contract, and then earns delivery fees.

    python demos/dde_exchange.py [offer]
"""

import sys

from crowdpatch import crypto_core as cc
from crowdpatch.harness.runner import run_scenario
from crowdpatch.harness.scenarios import dde

INTERESTING = {"SeedWindowOpen", "SeedClosed", "GenExchangeProof", "EscCreated",
               "PaymentToFHD", "PackageAcquired", "PaymentToD"}


def main(offer: int = 7) -> None:
    r = run_scenario(dde(offer=offer))
    names = {a.address: n for n, a in r.sim.actors.items()}
    for ev in r.trace:
        if ev.kind in INTERESTING:
            who = names.get(ev.get("distributor") or ev.get("fhd") or ev.get("creator"), ev.actor)
            print(f"  block {ev.height:>2}  {ev.kind:<16} {who}")
    esc = r.events("PaymentToFHD")[0].get("esc")
    s = r.sim.ledger.read_public("contract", esc)["s"]
    key = r.sim.ledger.read_public("published_key", s)
    print(f"published exchange key opens the commitment: {cc.hash(key) == s}")
    print(f"fhd0 earned {r.balance_of('fhd0')} (offer {offer}); "
          f"shd0 ends with {r.balance_of('shd0')} after paying {offer}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 7)
