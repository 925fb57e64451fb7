"""Command-line front end.

Exit codes: 0 when everything checked out, 1 when a monitor or property was
violated (or a replay diverged), 2 for usage and input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .explorer import STRATEGIES, ExploreConfig, explore, write_report
from .fixtures import BUILTINS, builtin
from .ft import Variant
from .scenario import ReplayError, Scenario, ScenarioError, replay, run_scenario

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ftsafra", description="Simulate and model-check Safra-style termination detection.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a built-in fixture or a scenario file")
    r.add_argument("scenario", help="built-in name (see `fixtures`) or path to a scenario JSON file")
    r.add_argument("--trace", metavar="PATH", help="write the trace as JSON lines")
    r.add_argument("-q", "--quiet", action="store_true", help="print only the outcome")

    rp = sub.add_parser("replay", help="re-execute a trace and check every state digest")
    rp.add_argument("trace", help="trace file written by `run --trace`")

    e = sub.add_parser("explore", help="explore every interleaving of a bounded model")
    e.add_argument("--alg", choices=["classic", "ft"], required=True)
    e.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.FIXED.value)
    e.add_argument("-n", type=int, required=True, help="ring size")
    e.add_argument("-m", type=int, default=2, help="basic message budget M")
    e.add_argument("-s", type=int, default=2, help="token round cap S")
    e.add_argument("--crashes", type=int, default=0, help="maximum number of crashes")
    e.add_argument("--strategy", choices=STRATEGIES, default="bfs")
    e.add_argument("--width", type=int, help="highway width (states kept per level)")
    e.add_argument("--seed", type=int, default=0, help="highway sampling seed")
    e.add_argument("--state-limit", type=int, help="stop after this many states")
    e.add_argument("--workers", type=int, default=1, help="worker processes for frontier expansion")
    e.add_argument("--latency", action="store_true", help="also measure detection latency")
    e.add_argument("--report", metavar="PATH", help="write the report as JSON")
    e.add_argument("--trace", metavar="DIR", help="write counterexample traces into DIR")

    sub.add_parser("fixtures", help="list the built-in scenarios")
    return p


def _load_scenario(target: str) -> Scenario:
    if target in BUILTINS:
        return builtin(target)
    if os.path.exists(target):
        return Scenario.load(target)
    raise ScenarioError(f"unknown builtin scenario {target!r} and no such file; "
                        f"builtins: {', '.join(sorted(BUILTINS))}")


def _print_records(trace, out):
    for rec in trace.records:
        d = rec["detail"]
        where = {k: v for k, v in d.items() if k in ("dest", "src", "subject")}
        args = " ".join(f"{k}={v}" for k, v in where.items())
        if rec["kind"] == "deliver":
            p = d["payload"]
            args += f" {p['type']}"
        line = f"{rec['step']:4d} {rec['kind']:<8} node={rec['actor']} {args}".rstrip()
        if d["events"]:
            line += "  [" + "; ".join(d["events"]) + "]"
        print(line, file=out)


def _print_outcome(trace, out) -> int:
    if trace.announced_by is not None:
        state = "terminated" if trace.announce_terminated else "NOT terminated"
        print(f"announce node={trace.announced_by} ({state})", file=out)
    else:
        print("no announce", file=out)
    if trace.violations:
        for v in trace.violations:
            print(f"VIOLATION {v.prop} at step {v.step}: {v.detail}", file=out)
        return EXIT_VIOLATION
    print("violations: none", file=out)
    return EXIT_OK


def cmd_run(args, out) -> int:
    sc = _load_scenario(args.scenario)
    trace = run_scenario(sc)
    label = sc.name or args.scenario
    kind = f"ft {sc.variant}" if sc.algorithm == "ft" else sc.algorithm
    print(f"scenario {label}: {kind} n={sc.n}", file=out)
    if not args.quiet:
        _print_records(trace, out)
    if args.trace:
        trace.write(args.trace)
    return _print_outcome(trace, out)


def cmd_replay(args, out) -> int:
    with open(args.trace) as fh:
        text = fh.read()
    try:
        trace = replay(text)
    except ReplayError as exc:
        print(f"replay diverged at step {exc.step}: {exc}", file=out)
        return EXIT_VIOLATION
    print(f"replayed {len(trace.records)} steps, all digests match", file=out)
    return _print_outcome(trace, out)


def cmd_explore(args, out) -> int:
    cfg = ExploreConfig(
        algorithm=args.alg,
        n=args.n,
        variant=args.variant,
        m_cap=args.m,
        s_cap=args.s,
        max_crashes=args.crashes,
        strategy=args.strategy,
        width=args.width,
        seed=args.seed,
        state_limit=args.state_limit,
        workers=args.workers,
        latency=args.latency,
    )
    report = explore(cfg)
    print(report.summary(), file=out)
    if args.report or args.trace:
        write_report(report, args.report or os.devnull, trace_dir=args.trace)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_fixtures(args, out) -> int:
    for name in sorted(BUILTINS):
        doc = (BUILTINS[name].__doc__ or "").strip()
        print(f"{name:<16} {doc}", file=out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "replay": cmd_replay, "explore": cmd_explore, "fixtures": cmd_fixtures}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except (ScenarioError, ReplayError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
