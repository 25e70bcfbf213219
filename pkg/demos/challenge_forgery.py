"""Replay the crafted ID challenge under raw and canonical framing.

The forger announces the update without holding it, answers a hub's
request with ``c = U_h || s`` and submits the device's answer as a PoD.

    python demos/challenge_forgery.py [seed]
"""

import sys

from crowdpatch.harness.runner import run_scenario
from crowdpatch.harness.scenarios import challenge_forgery, forgery_stats


def main(seed: int = 0) -> None:
    for mode in ("legacy-leiba", "standard"):
        r = run_scenario(challenge_forgery(seed=seed, mode=mode))
        stats = forgery_stats(r)
        errors = sorted({rc.error for rc in r.sim.actors["mallory"].outcomes if rc.error})
        print(f"{mode:>13}: forger paid {stats['payouts']}x ({r.balance_of('mallory')} units), "
              f"proofs generated {stats['proofs']}, devices installed {stats['installs']}, "
              f"rejections {errors or '-'}, exit code {r.exit_code}")
        for rep in r.reports:
            if not rep.holds:
                ce = rep.counterexample[0]
                print(f"               {rep.name} violated at trace #{ce.seq}: {ce.kind}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
