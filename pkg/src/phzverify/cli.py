"""Command-line front end.

Subcommands:
  check     backward symbolic reachability for one property
  param     parameterized (any number of tasks) check via view abstraction
  simulate  bounded concrete exploration or schedule replay
  parse     syntax/static checking, optional AST dump

Exit codes: 0 safe/unreachable, 1 violation or trace found, 2 usage or
parse error, 3 resource bound exceeded.  The PHZ_VERIFY_CAP environment
variable overrides the global working-list pop cap (default 10^7).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import checker, paramview
from .concrete import (Exhausted, Safe, Violation, explore_bounded,
                       format_schedule, parse_schedule, replay)
from .lang import ControlSpace, ParseError, parse_file, pretty, stmt_str
from .symconstraint import from_json_dict, to_json_dict
from .targets import TargetOverflow, bad_sets_up_to

EXIT_SAFE = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_BOUND = 3

# deadlock targets are not free, so termination needs a degree bound
DEFAULT_DEADLOCK_DEGREE = 2


def _build_parser():
    ap = argparse.ArgumentParser(prog="phzverify",
                                 description="Phaser program verifier")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="backward symbolic reachability check")
    c.add_argument("file")
    c.add_argument("--property", required=True,
                   choices=["assert", "race", "runtime", "deadlock"])
    c.add_argument("--max-tasks", type=int, required=True)
    c.add_argument("--max-phasers", type=int, required=True)
    c.add_argument("--degree-bound", type=int, default=None)
    c.add_argument("--lazy-exit", action="store_true")
    c.add_argument("--format", choices=["text", "json"], default="text")
    c.add_argument("--emit-trace", metavar="PATH", default=None)

    p = sub.add_parser("param", help="parameterized check via view abstraction")
    p.add_argument("file")
    p.add_argument("--property", required=True, choices=["assert", "deadlock"])
    p.add_argument("--view-size", type=int, required=True)
    p.add_argument("--degree-bound", type=int, default=1)
    p.add_argument("--format", choices=["text", "json"], default="text")

    s = sub.add_parser("simulate", help="bounded concrete exploration")
    s.add_argument("file")
    s.add_argument("--phase-bound", type=int, required=True)
    s.add_argument("--max-steps", type=int, required=True)
    s.add_argument("--schedule", metavar="PATH", default=None)
    s.add_argument("--property", default=None,
                   choices=["assert", "race", "runtime", "deadlock"])

    q = sub.add_parser("parse", help="parse and statically check a program")
    q.add_argument("file")
    q.add_argument("--dump-ast", action="store_true")
    return ap


def trace_to_json(trace, prop, verdict):
    constraints = {}
    for i, phi in enumerate(trace.constraints):
        constraints[str(i)] = to_json_dict(phi)
    steps = []
    for i, (t, stmt) in enumerate(zip(trace.tasks, trace.stmts)):
        steps.append({"task": t, "stmt": stmt, "constraintId": i})
    return {"verdict": verdict, "property": prop, "steps": steps,
            "constraints": constraints}


def trace_from_json(doc, prg, space=None):
    """Rebuild a symbolic trace from its JSON form for replay."""
    space = space or ControlSpace(prg)
    seq_by_str = {str(s): s for s in space.seqs}
    n = len(doc["constraints"])
    constraints = [from_json_dict(doc["constraints"][str(i)], seq_by_str)
                   for i in range(n)]
    tasks = [s["task"] for s in doc["steps"]]
    stmts = [s["stmt"] for s in doc["steps"]]
    return checker.Trace(constraints, tasks, stmts)


def _emit(doc, fmt, out=sys.stdout):
    if fmt == "json":
        out.write(json.dumps(doc, sort_keys=True) + "\n")
    else:
        out.write(doc["text"] + "\n")


def cmd_check(args):
    try:
        prg = parse_file(args.file)
    except ParseError as e:
        print("parse error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    space = ControlSpace(prg)
    degree = args.degree_bound
    if degree is None and getattr(args, "property") == "deadlock":
        degree = DEFAULT_DEADLOCK_DEGREE
    try:
        targets = bad_sets_up_to(prg, args.property, args.max_tasks,
                                 args.max_phasers, space)
    except TargetOverflow as e:
        print("target enumeration overflow: %s" % e, file=sys.stderr)
        return EXIT_BOUND
    res = checker.check(prg, targets, args.max_tasks, args.max_phasers,
                        degree_bound=degree, lazy_exit=args.lazy_exit,
                        space=space)
    if isinstance(res, checker.Unreachable):
        doc = {"verdict": "unreachable", "property": args.property,
               "stats": res.stats,
               "text": "unreachable: no %s violation with at most %d tasks "
                       "and %d phasers" % (args.property, args.max_tasks,
                                           args.max_phasers)}
        _emit(doc, args.format)
        return EXIT_SAFE
    if isinstance(res, checker.BoundExceeded):
        doc = {"verdict": "bound-exceeded", "property": args.property,
               "reason": res.reason, "stats": res.stats,
               "text": "bound exceeded: %s" % res.reason}
        _emit(doc, args.format)
        return EXIT_BOUND

    path = checker.replay_trace(prg, res.trace, space)
    verdict = "violation" if path is not None else "potential-violation"
    tdoc = trace_to_json(res.trace, args.property, verdict)
    if args.emit_trace:
        with open(args.emit_trace, "w", encoding="utf-8") as fh:
            json.dump(tdoc, fh, sort_keys=True, indent=2)
    lines = ["%s: %s" % (verdict, args.property)]
    for i, (t, stmt) in enumerate(zip(res.trace.tasks, res.trace.stmts)):
        lines.append("step %d: task %s fires %s" % (i + 1, t, stmt))
    if verdict == "potential-violation":
        lines.append("note: trace did not replay concretely "
                     "(over-approximation from the degree bound)")
    tdoc["text"] = "\n".join(lines)
    tdoc["stats"] = res.stats
    _emit(tdoc, args.format)
    return EXIT_VIOLATION


def cmd_param(args):
    try:
        prg = parse_file(args.file)
    except ParseError as e:
        print("parse error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    res = paramview.param_check(prg, args.property, args.view_size,
                                degree_bound=args.degree_bound)
    if isinstance(res, paramview.SafeForAllN):
        doc = {"verdict": "safe-for-all-n", "property": args.property,
               "stats": res.stats,
               "text": "safe for every number of tasks (view size %d)"
                       % args.view_size}
        _emit(doc, args.format)
        return EXIT_SAFE
    if isinstance(res, paramview.FixpointDiverged):
        doc = {"verdict": "bound-exceeded", "property": args.property,
               "reason": res.reason, "text": "bound exceeded: %s" % res.reason}
        _emit(doc, args.format)
        return EXIT_BOUND
    if isinstance(res, paramview.TraceViolation):
        lines = ["violation: %s reachable (concrete witness with %d steps)"
                 % (args.property, len(res.path) - 1)]
        doc = {"verdict": "violation", "property": args.property,
               "stats": res.stats, "steps": len(res.path) - 1,
               "text": "\n".join(lines)}
        _emit(doc, args.format)
        return EXIT_VIOLATION
    doc = {"verdict": "potential-violation", "property": args.property,
           "phase": res.phase, "stats": res.stats,
           "text": "potential %s violation (phase %d); raise the view size "
                   "or degree bound to refine" % (args.property, res.phase)}
    _emit(doc, args.format)
    return EXIT_VIOLATION


def cmd_simulate(args):
    try:
        prg = parse_file(args.file)
    except ParseError as e:
        print("parse error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    space = ControlSpace(prg)
    if args.schedule:
        with open(args.schedule, "r", encoding="utf-8") as fh:
            sched = parse_schedule(fh.read())
        states = replay(prg, sched, space)
        print("replayed %d steps" % (len(states) - 1))
        print(states[-1].describe() if hasattr(states[-1], "describe")
              else repr(states[-1]))
        return EXIT_SAFE
    res = explore_bounded(prg, phase_bound=args.phase_bound,
                          max_steps=args.max_steps, kind=args.property,
                          space=space)
    if isinstance(res, Safe):
        print("safe within phase bound %d (%d states)"
              % (res.phase_bound, res.states))
        return EXIT_SAFE
    if isinstance(res, Exhausted):
        print("exploration exhausted after %d states" % res.states)
        return EXIT_BOUND
    assert isinstance(res, Violation)
    print("violation: %s" % res.kind)
    print("schedule:")
    sys.stdout.write(format_schedule(res.trace))
    return EXIT_VIOLATION


def cmd_parse(args):
    try:
        prg = parse_file(args.file)
    except ParseError as e:
        print("parse error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    print("parsed %d task(s), %d bool(s)" % (len(prg.tasks), len(prg.bool_vars)))
    if args.dump_ast:
        print(pretty(prg))
    return EXIT_SAFE


def main(argv=None):
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    if args.command == "check":
        return cmd_check(args)
    if args.command == "param":
        return cmd_param(args)
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "parse":
        return cmd_parse(args)
    return EXIT_USAGE


def console_main():
    raise SystemExit(main())
