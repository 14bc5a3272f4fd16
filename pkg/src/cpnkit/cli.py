"""Command line front end.

Exit codes: 0 success, 1 usage/parse/validation errors, 2 analysis refused
(truncated state space), 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .core import InvalidNet, validate_net
from .dsl import NetSyntaxError, parse_net, serialize_net
from .engine import SimulationConfig, simulate
from .gscm import CASH_PLACES, GscmParameters, build_gscm_net
from .statespace import ExplorationLimits, analyze, explore, to_dot

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_REFUSED = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _cash(text: str) -> tuple[str, int]:
    actor, sep, n = text.partition("=")
    if not sep or actor not in CASH_PLACES:
        raise argparse.ArgumentTypeError(
            f"expected ACTOR=N with ACTOR in {', '.join(CASH_PLACES)}"
        )
    try:
        value = int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad amount {n!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("cash must be non-negative")
    return actor, value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpnkit", description="Colored Petri net simulator and state-space analyzer.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("validate", help="parse and validate a model file")
    p.add_argument("file")

    p = sub.add_parser("simulate", help="run random firings")
    p.add_argument("file")
    p.add_argument("--steps", type=_positive, default=50_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--trace", action="store_true", help="print every firing")
    p.add_argument("--json", metavar="PATH")
    p.add_argument("--timing", action="store_true")

    p = sub.add_parser("explore", help="build and analyze the state space")
    p.add_argument("file")
    p.add_argument("--max-states", type=_positive, default=ExplorationLimits.max_states)
    p.add_argument("--max-arcs", type=_positive, default=ExplorationLimits.max_arcs)
    p.add_argument("--timeout", type=float, default=ExplorationLimits.max_seconds)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--json", metavar="PATH")
    p.add_argument("--dot", metavar="PATH")
    p.add_argument("--timing", action="store_true")

    p = sub.add_parser("gscm", help="write a parameterized green supply chain model")
    p.add_argument("--raw-stock", type=_positive, default=GscmParameters.raw_material_stock)
    p.add_argument("--cash", type=_cash, action="append", default=[], metavar="ACTOR=N")
    p.add_argument("--material-yield", type=int, default=1)
    p.add_argument("--waste-yield", type=int, default=1)
    p.add_argument("--emit", metavar="PATH", required=True)
    return parser


def _load(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"{path}: cannot read: {exc.strerror}", file=sys.stderr)
        return None
    try:
        return parse_net(text)
    except NetSyntaxError as exc:
        for err in exc.errors:
            print(f"{path}:{err}", file=sys.stderr)
        return None


def _cmd_validate(args) -> int:
    net = _load(args.file)
    if net is None:
        return EXIT_INVALID
    diags = validate_net(net)
    for d in diags:
        print(f"{args.file}: {d}", file=sys.stderr)
    if diags:
        return EXIT_INVALID
    print(f"{args.file}: ok ({len(net.places)} places, {len(net.transitions)} transitions)")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    net = _load(args.file)
    if net is None:
        return EXIT_INVALID
    start = time.perf_counter()
    report = simulate(net, SimulationConfig(args.steps, args.seed, record_trace=args.trace))
    elapsed = time.perf_counter() - start
    if report.trace is not None:
        for ev in report.trace:
            print(f"{ev.step}\t{ev.transition}\t{ev.binding}")
    width = max([len("Transition")] + [len(t) for t in report.firing_counts])
    print(f"{'Transition':<{width}}  Firings")
    for name, count in report.firing_counts.items():
        print(f"{name:<{width}}  {count}")
    print(f"steps: {report.steps_executed}")
    print(f"terminated: {report.terminated}")
    print(f"seed: {report.seed}")
    print(f"rng: {report.rng}")
    if args.timing:
        print(f"seconds: {elapsed:.3f}")
    if args.json:
        Path(args.json).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def _yes_no(flag: bool) -> str:
    return "true" if flag else "false"


def _cmd_explore(args) -> int:
    net = _load(args.file)
    if net is None:
        return EXIT_INVALID
    limits = ExplorationLimits(args.max_states, args.max_arcs, args.timeout)
    graph = explore(net, limits, threads=args.threads)
    report = analyze(graph)
    print(f"stateCount: {report.state_count}")
    print(f"arcCount: {report.arc_count}")
    if args.timing:
        print(f"seconds: {graph.seconds:.3f}")
    if args.json:
        Path(args.json).write_text(report.to_json(), encoding="utf-8")
    if not report.complete:
        print("complete: false")
        print("state space truncated by limits; analyses refused", file=sys.stderr)
        return EXIT_REFUSED
    homes = report.home_markings
    print(f"deadMarkings: {report.dead_marking_count}")
    print(f"sccCount: {report.scc_count}")
    print(f"homeMarkings: {'none' if not homes else ' '.join(map(str, homes))}")
    print(f"acyclic: {_yes_no(report.acyclic)}")
    print(f"infiniteOccurrenceSequences: {_yes_no(report.infinite_occurrence_sequences_exist)}")
    print(f"deadTransitions: {' '.join(report.dead_transitions) or 'none'}")
    print(f"deadMarkingSample: {' '.join(map(str, report.dead_marking_sample)) or 'none'}")
    width = max([len("Place")] + [len(p) for p in report.bounds])
    print(f"{'Place':<{width}}  Lower  Upper")
    for place, b in report.bounds.items():
        print(f"{place:<{width}}  {b.lower:>5}  {b.upper:>5}")
    if args.dot:
        try:
            Path(args.dot).write_text(to_dot(graph), encoding="utf-8")
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_REFUSED
    return EXIT_OK


def _cmd_gscm(args) -> int:
    params = GscmParameters(
        raw_material_stock=args.raw_stock,
        material_yield=args.material_yield,
        waste_yield=args.waste_yield,
    ).with_cash(**dict(args.cash))
    Path(args.emit).write_text(serialize_net(build_gscm_net(params)), encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "explore": _cmd_explore,
    "gscm": _cmd_gscm,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_INVALID
    if args.command is None:
        sys.stderr.write(parser.format_usage())
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except (InvalidNet, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
