"""Command line interface.

Commands: parse, run, check, transform, scenario.  Exit codes are a total
function of the outcome: 0 success / all properties hold, 1 syntax or
validation errors, 2 I/O errors, 3 engine errors, 4 a property is violated,
5 a property verdict is unknown.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from importlib import resources
from typing import Optional

import yaml

from .checker import (
    CheckError, check_co, check_ensures, check_invariant, check_transient,
)
from .engine import Engine, ExecError, SchedulerConfig
from .env import EnvHooks, default_run_hooks
from .explore import ExploreBounds, explore
from .instantiate import CompileError, compile_system
from .parser import ParseError, parse_system
from .printer import pretty_print
from .proplang import parse_properties
from .scenario import load_scenario, run_scenario, scenario_from_dict
from .transform import eliminate_reacts_to
from .validator import validate
from .tracefmt import write_trace

EXIT_OK = 0
EXIT_SYNTAX = 1
EXIT_IO = 2
EXIT_ENGINE = 3
EXIT_VIOLATED = 4
EXIT_UNKNOWN = 5


def corpus_dir() -> str:
    override = os.environ.get("MUNITY_CORPUS")
    if override:
        return override
    return str(resources.files("munity").joinpath("corpus"))


def _resolve_input(path: str, suffix: str) -> str:
    """Accept a real path or the bare name of a corpus entry."""
    if os.path.exists(path):
        return path
    candidate = os.path.join(corpus_dir(), path + suffix)
    if os.path.exists(candidate):
        return candidate
    return path


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def parse_weights(text: str) -> dict:
    """--weights p2=2/3,p1=1/3 (or 2=2/3,1=1/3): priority block weights."""
    weights = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        key = key.strip().lstrip("pP")
        weights[int(key)] = Fraction(val.strip())
    return weights


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        if path.endswith((".yaml", ".yml")):
            return yaml.safe_load(fh) or {}
        return json.load(fh)


def merged_option(args, config: dict, name: str, default):
    """Command-line value wins over the config file, which wins over the
    default."""
    val = getattr(args, name, None)
    if val is not None:
        return val
    if name in config:
        return config[name]
    return default


def scheduler_config(args, config: dict) -> SchedulerConfig:
    weights = merged_option(args, config, "weights", None)
    if isinstance(weights, str):
        weights = parse_weights(weights)
    elif isinstance(weights, dict):
        weights = {int(k): Fraction(str(v)) for k, v in weights.items()}
    return SchedulerConfig(
        mode=merged_option(args, config, "mode", "random"),
        block_weights=weights,
        fairness_window=int(merged_option(args, config, "fairness_window", 4)),
        max_reaction_iters=int(merged_option(args, config,
                                             "max_reaction_iters", 10_000)),
        seed=int(merged_option(args, config, "seed", 0)),
        store_full_states=bool(merged_option(args, config, "full_states",
                                             False)),
    )


def cmd_parse(args, config) -> int:
    path = _resolve_input(args.file, ".unity")
    try:
        text = _read(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        sysdef = parse_system(text)
    except ParseError as exc:
        print(f"{path}:{exc}", file=sys.stderr)
        return EXIT_SYNTAX
    diags = validate(sysdef)
    for d in diags:
        print(f"{path}:{d}")
    if any(d.severity == "error" for d in diags):
        return EXIT_SYNTAX
    progs = ", ".join(p.name for p in sysdef.programs)
    print(f"ok: system {sysdef.name} ({len(sysdef.components)} component(s); "
          f"programs: {progs})")
    return EXIT_OK


def cmd_run(args, config) -> int:
    path = _resolve_input(args.file, ".unity")
    try:
        text = _read(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        sysdef = parse_system(text)
        diags = validate(sysdef)
        if any(d.severity == "error" for d in diags):
            for d in diags:
                print(f"{path}:{d}", file=sys.stderr)
            return EXIT_SYNTAX
        compiled = compile_system(sysdef)
    except (ParseError, CompileError) as exc:
        print(f"{path}:{exc}", file=sys.stderr)
        return EXIT_SYNTAX
    cfg = scheduler_config(args, config)
    steps = int(merged_option(args, config, "steps", 1000))
    if args.trace or cfg.store_full_states:
        cfg.store_full_states = True
    engine = Engine(compiled, default_run_hooks(), cfg)
    trace = engine.run(steps)
    trace_path = merged_option(args, config, "trace", None)
    if trace_path:
        write_trace(trace, trace_path, full_states=args.full_states)
        print(f"trace: {trace_path}")
    last = trace.records[-1].digest if trace.records else trace.initial_digest
    print(f"system {sysdef.name}: {len(trace.records)} step(s), "
          f"stop: {trace.stop_reason}, final digest {last}")
    if trace.stop_reason == "error":
        print(f"engine error: {trace.records[-1].error}", file=sys.stderr)
        return EXIT_ENGINE
    return EXIT_OK


def cmd_check(args, config) -> int:
    path = _resolve_input(args.file, ".unity")
    props_path = args.props or os.path.splitext(path)[0] + ".props"
    try:
        text = _read(path)
        props_text = _read(props_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        sysdef = parse_system(text)
        props = parse_properties(props_text, sysdef)
        compiled = compile_system(sysdef)
    except (ParseError, CompileError) as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_SYNTAX
    cfg = scheduler_config(args, config)
    engine = Engine(compiled, EnvHooks(), cfg)
    bounds = ExploreBounds(
        max_states=int(merged_option(args, config, "max_states", 100_000)),
        max_queue=int(merged_option(args, config, "max_queue", 16)),
    )
    ts = explore(engine, bounds)
    print(f"explored {len(ts.states)} state(s)"
          + (" [truncated]" if ts.truncated else ""))
    any_violated = any_unknown = any_error = False
    counterexamples = {}
    for prop in props:
        try:
            if prop.kind == "invariant":
                v = check_invariant(ts, engine, prop.lhs, prop.name)
            elif prop.kind == "co":
                v = check_co(ts, engine, prop.lhs, prop.rhs, prop.name)
            elif prop.kind == "ensures":
                v = check_ensures(ts, engine, prop.lhs, prop.rhs, prop.name)
            elif prop.kind == "transient":
                v = check_transient(ts, engine, prop.lhs, prop.name)
            else:  # leadsto is a trace relation
                print(f"  {prop.kind:9} {prop.name:24} skipped "
                      f"(trace-only relation)")
                continue
        except CheckError as exc:
            print(f"  {prop.kind:9} {prop.name:24} error: {exc}")
            any_error = True
            continue
        print(f"  {prop.kind:9} {prop.name:24} {v}")
        if v.status == "violated":
            any_violated = True
            if v.counterexample:
                counterexamples[prop.name] = v.counterexample
        elif v.status == "unknown":
            any_unknown = True
    if counterexamples:
        cex_path = args.cex or os.path.splitext(props_path)[0] + ".cex.json"
        payload = {name: [{"unit": u, "state": s} for u, s in path_]
                   for name, path_ in counterexamples.items()}
        with open(cex_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
        print(f"counterexamples: {cex_path}")
    if any_violated:
        return EXIT_VIOLATED
    if any_error:
        return EXIT_ENGINE
    if any_unknown:
        return EXIT_UNKNOWN
    return EXIT_OK


def cmd_transform(args, config) -> int:
    path = _resolve_input(args.file, ".unity")
    try:
        text = _read(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        sysdef = parse_system(text)
        diags = validate(sysdef)
        if any(d.severity == "error" for d in diags):
            for d in diags:
                print(f"{path}:{d}", file=sys.stderr)
            return EXIT_SYNTAX
        out_text = pretty_print(eliminate_reacts_to(sysdef))
    except ParseError as exc:
        print(f"{path}:{exc}", file=sys.stderr)
        return EXIT_SYNTAX
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(out_text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(out_text)
    return EXIT_OK


def cmd_scenario(args, config) -> int:
    path = _resolve_input(args.file, ".yaml")
    try:
        sc = load_scenario(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"{path}: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_SYNTAX
    if args.seed is not None:
        sc.seed = int(args.seed)
    try:
        trace, report = run_scenario(sc)
    except ExecError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    trace_path = merged_option(args, config, "trace", None)
    if trace_path:
        write_trace(trace, trace_path, full_states=args.full_states)
        report["trace"] = trace_path
    report_path = merged_option(args, config, "report", None)
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)
        print(f"report: {report_path}")
    for name, verdict in report["verdicts"].items():
        print(f"  {name:32} {verdict}")
    if any(v == "violated" for v in report["verdicts"].values()):
        return EXIT_VIOLATED
    if any(v == "unknown" for v in report["verdicts"].values()):
        return EXIT_UNKNOWN
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="munity",
        description="Interpreter, weakly fair scheduler and property "
                    "checker for prioritized guarded-command systems")
    ap.add_argument("--config", help="JSON or YAML config file; command-line "
                                     "flags override its values")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and validate a system file")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("run", help="execute a system under the scheduler")
    p.add_argument("file")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["random", "deficit"])
    p.add_argument("--weights", help="block weights, e.g. p2=2/3,p1=1/3")
    p.add_argument("--fairness-window", dest="fairness_window", type=int)
    p.add_argument("--trace", help="write the trace as JSON lines")
    p.add_argument("--full-states", dest="full_states", action="store_true",
                   default=None, help="capture complete states in the trace")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="explore and check declared properties")
    p.add_argument("file")
    p.add_argument("--props", help="property file (default: <file>.props)")
    p.add_argument("--max-states", dest="max_states", type=int)
    p.add_argument("--max-queue", dest="max_queue", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["random", "deficit"])
    p.add_argument("--weights")
    p.add_argument("--cex", help="counterexample output file")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("transform",
                       help="eliminate reacts-to into a priority block")
    p.add_argument("file")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("scenario", help="run a scripted scenario")
    p.add_argument("file")
    p.add_argument("--seed", type=int)
    p.add_argument("--trace")
    p.add_argument("--report")
    p.add_argument("--full-states", dest="full_states", action="store_true",
                   default=None)
    p.set_defaults(func=cmd_scenario)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    config = {}
    if args.config:
        try:
            config = load_config_file(args.config)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    try:
        return args.func(args, config)
    except ExecError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
