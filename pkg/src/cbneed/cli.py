"""
Command-line front end.

    cbneed eval  TERM [--machine need|ckplus] [--budget N] [--compact POLICY]
    cbneed trace TERM [--budget N] [--phi] [--compact POLICY]
    cbneed diff  [--seed S --max-size N --count C | --exhaustive N] [--check-simulation] [--mutate NAME]
    cbneed bench-lookup [--depths 10,10000] [--reps R] [--linear-scan]
    cbneed gen   [--seed S --max-size N --count C]

TERM is a term, ``@path`` for a file, or ``-`` for standard input.
Exit codes: 0 ok, 1 input error, 2 budget exceeded, 3 mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .calculus import Answer, DEFAULT_REDUCTION_BUDGET, eval_need
from .ckplus import DEFAULT_STEP_BUDGET, OpenTermError, eval_ckplus
from .harness import MUTANTS, bench_lookup, diff_corpus, exhaustive_corpus, gen_corpus, mutant_step, trace_lines
from .sc import CompactionPolicy
from .syntax import ParseError, UnboundVariableError, is_closed, parse, pretty, to_debruijn

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BUDGET = 2
EXIT_MISMATCH = 3


class InputError(Exception):
    pass


def read_source(arg: str) -> str:
    if arg == "-":
        return sys.stdin.read()
    if arg.startswith("@"):
        try:
            with open(arg[1:], encoding="utf-8") as fh:
                return fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {arg[1:]}: {exc.strerror}") from None
    return arg


def load_term(arg: str, syntax: str):
    try:
        t = parse(read_source(arg), syntax)
        if syntax == "named":
            t = to_debruijn(t)
    except (ParseError, UnboundVariableError) as exc:
        raise InputError(str(exc)) from None
    if not is_closed(t):
        raise InputError(f"program is not closed: {pretty(t)}")
    return t


def _policy(text: str) -> CompactionPolicy:
    try:
        return CompactionPolicy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _depths(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth list {text!r}") from None
    if not out or any(d < 1 for d in out):
        raise argparse.ArgumentTypeError("depths must be positive integers")
    return out


def _nonneg(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError("expected a non-negative integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbneed", description="Call-by-need evaluation on a de Bruijn-indexed control stack.")
    sub = p.add_subparsers(dest="command", required=True)

    def term_args(sp):
        sp.add_argument("term", help="term text, @file, or - for stdin")
        sp.add_argument("--syntax", choices=("debruijn", "named"), default="debruijn")

    e = sub.add_parser("eval", help="evaluate a closed term to an answer")
    term_args(e)
    e.add_argument("--machine", choices=("need", "ckplus"), default="ckplus")
    e.add_argument("--budget", type=_nonneg, default=None,
                   help=f"reductions for need (default {DEFAULT_REDUCTION_BUDGET}), transitions for ckplus (default {DEFAULT_STEP_BUDGET})")
    e.add_argument("--compact", type=_policy, default=CompactionPolicy("manual"), help="off|manual|every:N|depth:D (ckplus only)")
    e.add_argument("--format", choices=("text", "json"), default="text")

    t = sub.add_parser("trace", help="print the machine's transitions as JSON lines")
    term_args(t)
    t.add_argument("--budget", type=_nonneg, default=DEFAULT_STEP_BUDGET, help="machine transitions")
    t.add_argument("--phi", action="store_true", help="include the unloaded program and the simulation check")
    t.add_argument("--compact", type=_policy, default=CompactionPolicy("manual"))

    d = sub.add_parser("diff", help="compare the two evaluators on a corpus")
    d.add_argument("--seed", type=int, default=42)
    d.add_argument("--max-size", type=_nonneg, default=12)
    d.add_argument("--count", type=_nonneg, default=10_000)
    d.add_argument("--exhaustive", type=_nonneg, metavar="N", help="use every closed term of at most N nodes instead")
    d.add_argument("--budget", type=_nonneg, default=DEFAULT_REDUCTION_BUDGET, help="reductions per evaluator")
    d.add_argument("--check-simulation", action="store_true", help="also check every machine step against the calculus")
    d.add_argument("--mutate", choices=sorted(MUTANTS), help="run a deliberately broken machine (harness self-test)")
    d.add_argument("--format", choices=("text", "json"), default="text")

    b = sub.add_parser("bench-lookup", help="time variable lookup at several bind depths")
    b.add_argument("--depths", type=_depths, default=[10, 10_000])
    b.add_argument("--reps", type=_nonneg, default=100_000)
    b.add_argument("--linear-scan", action="store_true", help="time a search-based baseline instead")
    b.add_argument("--format", choices=("text", "json"), default="text")

    g = sub.add_parser("gen", help="print a generated corpus")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--max-size", type=_nonneg, default=12)
    g.add_argument("--count", type=_nonneg, default=10_000)
    g.add_argument("--syntax", choices=("debruijn", "named"), default="debruijn")
    g.add_argument("--format", choices=("text", "json"), default="text")
    return p


def cmd_eval(args, out) -> int:
    term = load_term(args.term, args.syntax)
    if args.machine == "need":
        result = eval_need(term, DEFAULT_REDUCTION_BUDGET if args.budget is None else args.budget)
    else:
        result = eval_ckplus(
            term, DEFAULT_STEP_BUDGET if args.budget is None else args.budget,
            compactor=args.compact.compactor(),
        )
    if not isinstance(result, Answer):
        if args.format == "json":
            print(json.dumps({"result": "BUDGET", "steps": result.steps}), file=out)
        else:
            print("BUDGET", file=out)
        return EXIT_BUDGET
    text = pretty(result.term, args.syntax)
    if args.format == "json":
        print(json.dumps({"result": "answer", "answer": text, "steps": result.steps}, ensure_ascii=False), file=out)
    else:
        print(text, file=out)
    return EXIT_OK


def cmd_trace(args, out) -> int:
    term = load_term(args.term, args.syntax)
    last = ""
    for line in trace_lines(term, args.budget, phi=args.phi, compactor=args.compact.compactor()):
        print(line, file=out)
        last = line
    return EXIT_BUDGET if json.loads(last).get("rule") == "budget" else EXIT_OK


def cmd_diff(args, out) -> int:
    if args.exhaustive is not None:
        corpus = exhaustive_corpus(args.exhaustive)
    else:
        corpus = gen_corpus(args.seed, args.max_size, args.count)
    report = diff_corpus(
        corpus, args.budget,
        check_simulation_steps=args.check_simulation,
        step_fn=mutant_step(args.mutate),
    )
    if args.format == "json":
        for o in report.outcomes:
            print(o.to_json(), file=out)
    else:
        for o in report.mismatches:
            print(f"MISMATCH #{o.index} {o.name}: {pretty(o.term)}", file=out)
            print(f"  {o.detail}", file=out)
    print(report.summary(), file=out if args.format == "text" else sys.stderr)
    return EXIT_MISMATCH if report.mismatches else EXIT_OK


def cmd_bench(args, out) -> int:
    rows = bench_lookup(args.depths, args.reps, args.linear_scan)
    mode = "linear-scan" if args.linear_scan else "indexed"
    if args.format == "json":
        for r in rows:
            print(json.dumps({"mode": mode, "depth": r.depth, "ns_per_lookup": r.ns_per_lookup, "reps": r.reps}), file=out)
        return EXIT_OK
    print(f"# {mode}, median of {args.reps} reps", file=out)
    print(f"{'depth':>10}  {'ns/lookup':>12}", file=out)
    for r in rows:
        print(f"{r.depth:>10}  {r.ns_per_lookup:>12.1f}", file=out)
    if len(rows) >= 2:
        print(f"# ratio last/first: {rows[-1].ns_per_lookup / rows[0].ns_per_lookup:.2f}", file=out)
    return EXIT_OK


def cmd_gen(args, out) -> int:
    for e in gen_corpus(args.seed, args.max_size, args.count):
        text = pretty(e.term, args.syntax)
        if args.format == "json":
            print(json.dumps({"name": e.name, "term": text}, ensure_ascii=False), file=out)
        else:
            print(f"{e.name}\t{text}", file=out)
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "trace": cmd_trace, "diff": cmd_diff, "bench-lookup": cmd_bench, "gen": cmd_gen}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; those are input errors here
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args, out)
    except (InputError, OpenTermError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
