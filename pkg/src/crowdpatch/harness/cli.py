"""Command-line scenario runner.

    crowdpatch run scenarios/happy_path.yaml --seed 3 --check-lemmas
    crowdpatch run scenarios/happy_path.yaml --seeds 0..99
    crowdpatch run scenarios/happy_path.yaml --attack all
    crowdpatch run scenarios/challenge_forgery.yaml --mode legacy-leiba --trace out.jsonl

Exit codes: 0 all checks pass, 1 lemma or unexpected violation, 2 config
error, 3 an attack succeeded in legacy mode as intended.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .config import MODES, ConfigInvalid, ScenarioConfig, load_config
from .runner import EXIT_ATTACK_SUCCEEDED, EXIT_CONFIG, EXIT_LEMMA, EXIT_OK, RunResult, run_scenario
from .scenarios import ATTACKS, SUITE


def parse_seeds(text: str) -> list[int]:
    """``"A..B"`` (inclusive) or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or A..B, got {text!r}") from None


def combine(codes: Sequence[int]) -> int:
    if EXIT_LEMMA in codes:
        return EXIT_LEMMA
    if EXIT_ATTACK_SUCCEEDED in codes:
        return EXIT_ATTACK_SUCCEEDED
    return EXIT_OK


def summary(r: RunResult) -> str:
    n = r.config.devices
    return (f"{r.config.name} seed={r.seed} mode={r.config.mode} exit={r.exit_code} "
            f"installed={len(r.installed())}/{n} "
            f"PaymentToD={len(r.events('PaymentToD'))} PaymentToH={len(r.events('PaymentToH'))} "
            f"blocks={r.sim.ledger.height} time={r.elapsed * 1000:.0f}ms")


def _trace_path(base: Path, label: str, many: bool) -> Path:
    return base.with_name(f"{base.stem}.{label}{base.suffix or '.jsonl'}") if many else base


def _emit(r: RunResult, args: argparse.Namespace, label: str, many: bool, out) -> None:
    print(summary(r), file=out)
    if args.check_lemmas:
        for rep in r.reports:
            print(f"  {rep}", file=out)
            for ev in rep.counterexample:
                print(f"    {ev.to_json()}", file=out)
    for ev in r.unexpected:
        print(f"  unexpected violation: {ev.to_json()}", file=out)
    if args.trace:
        path = _trace_path(Path(args.trace), label, many)
        path.write_text(r.trace.dumps())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdpatch", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config", help="YAML scenario file")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--seeds", type=parse_seeds, help="seed range A..B (inclusive)")
    run.add_argument("--mode", choices=MODES, help="override the config mode")
    run.add_argument("--trace", help="write the JSON-lines trace here")
    run.add_argument("--check-lemmas", action="store_true", help="print every check report")
    run.add_argument("--attack", choices=[*ATTACKS, "all"],
                     help="run an attack scenario on top of the config")
    sub.add_parser("attacks", help="list the attack scenarios")
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.command == "attacks":
        for a in ATTACKS.values():
            print(f"{a.name:18} {a.claim}", file=out)
        return EXIT_OK
    try:
        config: ScenarioConfig = load_config(args.config)
        if args.mode:
            config = config.with_(mode=args.mode).validate()
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seeds = args.seeds or [config.seed if args.seed is None else args.seed]
    codes: list[int] = []
    if args.attack:
        names = SUITE + ("challenge-forgery",) if args.attack == "all" else (args.attack,)
        many = len(names) * len(seeds) > 1
        for seed in seeds:
            for name in names:
                try:
                    outcome = ATTACKS[name].run(config, seed)
                except ConfigInvalid as exc:
                    print(f"config error in attack {name}: {exc}", file=sys.stderr)
                    return EXIT_CONFIG
                print(outcome, file=out)
                for r in outcome.results:
                    label = f"{r.config.name}.seed{seed}"
                    _emit(r, args, label, many or len(outcome.results) > 1, out)
                codes.append(outcome.exit_code)
    else:
        many = len(seeds) > 1
        for seed in seeds:
            r = run_scenario(config, seed)
            _emit(r, args, f"seed{seed}", many, out)
            codes.append(r.exit_code)
    if len(codes) > 1:
        print(f"{len(codes)} runs, exit codes {sorted(set(codes))}", file=out)
    return combine(codes)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
