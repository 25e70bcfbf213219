"""Walk through one honest release and print who got paid for what.

    python demos/happy_path.py [seed]
"""

import sys

from crowdpatch.harness.scenarios import happy_path
from crowdpatch.harness.runner import run_scenario


def main(seed: int = 0) -> None:
    r = run_scenario(happy_path(seed=seed))
    names = {a.address: n for n, a in r.sim.actors.items()}
    devices = {a.pub.hex(): n for n, a in r.sim.actors.items() if a.role == "device"}

    print(f"release: {r.config.devices} devices, deposit {r.config.deposit}, "
          f"a_d={r.config.release.a_d}, a_h={r.config.release.a_h}")
    for ev in r.trace:
        if ev.kind == "PackageAcquired":
            print(f"  block {ev.height:>2}  {ev.actor} holds the package (via {ev.get('via')})")
        elif ev.kind == "PaymentToD":
            print(f"  block {ev.height:>2}  {names[ev.get('distributor')]} paid {ev.get('amount')} "
                  f"for delivering to {devices[ev.get('device')]}")
        elif ev.kind == "UpdateInstalled":
            print(f"  block {ev.height:>2}  {ev.actor} installed {ev.get('update')[:16]}...")
        elif ev.kind == "PaymentToH":
            print(f"  block {ev.height:>2}  {names[ev.get('hub')]} paid {ev.get('amount')} "
                  f"for the final hop to {devices[ev.get('device')]}")
    print("balances:", {n: r.balance_of(n) for n in r.sim.actors if r.balance_of(n)})
    for rep in r.reports:
        print(" ", rep)
    print(f"{r.sim.ledger.height} blocks, {len(r.trace)} trace events, {r.elapsed * 1000:.0f} ms")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
