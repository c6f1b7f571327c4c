"""thingc: command-line front end for TM models."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import Diagnostic, Model, TMError, check_model, has_errors, validate_model
from .dsl import parse_file, serialize
from .events import build_behavior, check_events, compose_events, detect_send_events, has_cycle, weak_components
from .render import (
    export_json, render_behavior_dot, render_model_dot, render_usecase_dot,
)
from .sim import load_scenario_file, occurrence_violations, simulate, trace_to_events
from .transform import reduce_to_use_case, simplify_level1, simplify_level2

CORPUS_DIR = Path(__file__).resolve().parent / "corpus"
GOLDEN_DIR = CORPUS_DIR / "golden"
CORPUS_MODELS = ("book_borrow", "box_arrival", "control_light", "atm")

EXIT_OK, EXIT_ERRORS, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors already; keep that but make it explicit
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------

def _use_color(stream) -> bool:
    mode = os.environ.get("THINGC_COLOR", "auto").lower()
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def report(diags: Sequence[Diagnostic], stream=None) -> None:
    stream = stream or sys.stderr
    color = _use_color(stream)
    for d in diags:
        text = str(d)
        if color:
            code = "31" if d.is_error else "33"
            text = f"\x1b[{code}m{d.severity}\x1b[0m".join(text.split(d.severity, 1))
        print(text, file=stream)


def _stamp_line(prefix: str) -> str:
    now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return f"{prefix} generated {now}\n"


def emit(args, text: str, comment: str = "#") -> None:
    if getattr(args, "stamp", False):
        if comment == "json":
            data = json.loads(text)
            data["generated"] = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
            text = json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        else:
            text = _stamp_line(comment) + text
    if getattr(args, "output", None):
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def resolve(path: str) -> Path:
    """Paths under ``corpus/`` fall back to the bundled corpus."""
    p = Path(path)
    if not p.exists() and p.parts and p.parts[0] == "corpus":
        bundled = CORPUS_DIR.joinpath(*p.parts[1:])
        if bundled.exists():
            return bundled
    return p


def load(args) -> Model:
    """Parse and validate an unsimplified model; warnings go to stderr."""
    m = parse_file(resolve(args.file))
    diags = validate_model(m, lax=args.lax)
    report([d for d in diags if not d.is_error])
    return check_model(m, lax=args.lax)


# ---------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------

def cmd_check(args) -> int:
    m = parse_file(resolve(args.file))
    diags = validate_model(m, lax=args.lax, level=args.level or 0) + check_events(m)
    report(diags)
    if has_errors(diags):
        return EXIT_ERRORS
    if not args.quiet:
        print(f"{m.name}: ok ({len(m.machines)} machines, {len(m.stages)} stages, "
              f"{len(m.arcs)} arcs, {len(m.events)} events)")
    return EXIT_OK


def cmd_fmt(args) -> int:
    m = parse_file(resolve(args.file))
    emit(args, serialize(m))
    return EXIT_OK


def cmd_simplify(args) -> int:
    m = load(args)
    if args.level == 1:
        out = simplify_level1(m)
    else:
        warns: list[Diagnostic] = []
        out = simplify_level2(m, warns)
        report(warns)
    emit(args, export_json(out) if args.json else serialize(out), "json" if args.json else "#")
    return EXIT_OK


def cmd_usecase(args) -> int:
    d = reduce_to_use_case(load(args))
    if args.json:
        emit(args, export_json(d), "json")
    else:
        lines = [f"actor {a}" for a in d.actors] + [f"usecase {u}" for u in d.use_cases]
        lines += [f"{a} -- {u}" for a, u in d.associations]
        emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_events(args) -> int:
    m = load(args)
    diags = check_events(m)
    report(diags)
    if args.json:
        emit(args, export_json(list(m.events), "events"), "json")
    else:
        emit(args, "".join(f"{e.id}\t{e.name}\t{' '.join(e.region)}\n" for e in m.events))
    return EXIT_ERRORS if has_errors(diags) else EXIT_OK


def _compose_all(g, specs):
    for spec in specs or ():
        name, _, members = spec.partition("=")
        if not members:
            raise argparse.ArgumentTypeError(f"--compose expects NAME=E1,E2,..., got {spec!r}")
        g = compose_events(g, [x.strip() for x in members.split(",") if x.strip()], name.strip())
    return g


def cmd_behavior(args) -> int:
    m = load(args)
    g = _compose_all(build_behavior(m), args.compose)
    if args.json:
        emit(args, export_json(g), "json")
        return EXIT_OK
    lines = [f"{a} -> {b}\t{' '.join(g.witnesses.get((a, b), ()))}" for a, b in g.edges]
    comps = weak_components(g)
    lines.append(f"# {len(g.nodes)} events, {len(g.edges)} edges, {len(comps)} components, "
                 f"{'cyclic' if has_cycle(g) else 'acyclic'}")
    emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_sendscan(args) -> int:
    m = load(args)
    if args.level:
        m = simplify_level1(m) if args.level == 1 else simplify_level2(m)
    found = detect_send_events(m)
    if args.json:
        emit(args, export_json(found, "events"), "json")
    else:
        emit(args, "".join(f"{e.id}\t{e.name}\t{' '.join(e.region)}\n" for e in found))
    return EXIT_OK


def cmd_sim(args) -> int:
    m = load(args)
    scen = load_scenario_file(resolve(args.scenario), m)
    trace = simulate(m, scen)
    if args.events:
        occ = trace_to_events(trace, m.events, m)
        bad = occurrence_violations(occ, build_behavior(m))
        for a, b in bad:
            print(f"warning: trace orders {b} before {a} [occurrence-order]", file=sys.stderr)
        if args.json:
            emit(args, export_json(occ, "occurrences"), "json")
        else:
            emit(args, "".join(f"{o.event}\t{o.start}\t{o.end}\n" for o in occ))
        return EXIT_OK
    if args.json:
        emit(args, export_json(trace), "json")
    else:
        emit(args, trace.to_jsonl())
    return EXIT_OK


def cmd_render(args) -> int:
    m = load(args)
    if args.level:
        m = simplify_level1(m) if args.level == 1 else simplify_level2(m)
    if args.what == "model":
        text = render_model_dot(m, m.events if args.overlay else None)
    elif args.what == "behavior":
        text = render_behavior_dot(_compose_all(build_behavior(m), args.compose), m.name)
    else:
        text = render_usecase_dot(reduce_to_use_case(m))
    emit(args, text, "//")
    return EXIT_OK


# ---------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------

def corpus_artifacts(name: str) -> dict[str, str]:
    """Every golden artifact for one bundled model, keyed by golden file name."""
    m = check_model(parse_file(CORPUS_DIR / f"{name}.tm"))
    out = {
        f"{name}.tm": serialize(m),
        f"{name}.level1.tm": serialize(simplify_level1(m)),
        f"{name}.level2.tm": serialize(simplify_level2(m)),
        f"{name}.behavior.json": export_json(build_behavior(m)),
        f"{name}.usecase.json": export_json(reduce_to_use_case(m)),
        f"{name}.sendscan.json": export_json(detect_send_events(m), "events"),
    }
    for scen_path in scenarios_of(name):
        scen = load_scenario_file(scen_path, m)
        trace = simulate(m, scen)
        out[f"{scen_path.stem}.trace.jsonl"] = trace.to_jsonl()
        out[f"{scen_path.stem}.occurrences.json"] = export_json(trace_to_events(trace, m.events, m), "occurrences")
    return out


def _plural(n: int, word: str) -> str:
    return f"{n} {word}" + ("" if n == 1 else "s")


def scenarios_of(name: str) -> list[Path]:
    # "control_light" must not pick up another model's scenarios by prefix
    others = [o for o in CORPUS_MODELS if o != name and o.startswith(name)]
    return [p for p in sorted(CORPUS_DIR.glob(f"{name}*.tms"))
            if not any(p.stem.startswith(o) for o in others)]


def cmd_corpus(args) -> int:
    golden = Path(args.golden) if args.golden else GOLDEN_DIR
    failed = 0
    for name in CORPUS_MODELS:
        try:
            arts = corpus_artifacts(name)
        except TMError as exc:
            report(exc.diagnostics)
            print(f"{name}: FAIL (pipeline error)")
            failed += 1
            continue
        if args.action == "update":
            golden.mkdir(parents=True, exist_ok=True)
            for fname, text in arts.items():
                (golden / fname).write_text(text, encoding="utf-8")
            print(f"{name}: wrote {len(arts)} golden files")
            continue
        diff = [f for f, text in arts.items()
                if not (golden / f).exists() or (golden / f).read_text(encoding="utf-8") != text]
        behavior = json.loads(arts[f"{name}.behavior.json"])
        summary = (f"{len(behavior['nodes'])} events, {len(behavior['edges'])} edges, "
                   f"{len(json.loads(arts[f'{name}.sendscan.json'])['events'])} send events, "
                   f"{_plural(len(scenarios_of(name)), 'scenario')}")
        if diff:
            failed += 1
            print(f"{name}: FAIL ({summary}; mismatched: {', '.join(diff)})")
        else:
            print(f"{name}: ok ({summary}; {len(arts)} artifacts match)")
    return EXIT_ERRORS if failed else EXIT_OK


# ---------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thingc", description="Thinging-machine model toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    def add(name, fn, help_, file=True, level=False, json_=True):
        sp = sub.add_parser(name, help=help_)
        if file:
            sp.add_argument("file", help="model file (.tm)")
        sp.add_argument("--lax", action="store_true", help="downgrade trigger-source violations to warnings")
        if level:
            sp.add_argument("--level", type=int, choices=(1, 2), default=None)
        sp.add_argument("-o", "--output", metavar="PATH")
        if json_:
            sp.add_argument("--json", action="store_true", help="emit JSON")
        sp.add_argument("--stamp", action="store_true", help="add a generation timestamp")
        sp.set_defaults(func=fn)
        return sp

    sp = add("check", cmd_check, "parse and validate a model", level=True, json_=False)
    sp.add_argument("-q", "--quiet", action="store_true")
    add("fmt", cmd_fmt, "print the canonical form of a model", json_=False)
    sp = add("simplify", cmd_simplify, "apply a simplification level")
    sp.add_argument("--level", type=int, choices=(1, 2), required=True)
    add("usecase", cmd_usecase, "reduce a model to a use-case diagram")
    add("events", cmd_events, "list events and check their regions")
    sp = add("behavior", cmd_behavior, "build the behavior graph")
    sp.add_argument("--compose", action="append", metavar="NAME=E1,E2",
                    help="compose events into a mega-event (repeatable)")
    add("sendscan", cmd_sendscan, "detect Release..Receive send events", level=True)
    sp = add("sim", cmd_sim, "simulate a scenario")
    sp.add_argument("scenario", help="scenario file (.tms)")
    sp.add_argument("--events", action="store_true", help="print event occurrences instead of the trace")
    sp = add("render", cmd_render, "emit DOT", level=True, json_=False)
    sp.add_argument("--what", choices=("model", "behavior", "usecase"), default="model")
    sp.add_argument("--overlay", action="store_true", help="draw event regions over the model")
    sp.add_argument("--compose", action="append", metavar="NAME=E1,E2")
    sp = sub.add_parser("corpus", help="bundled corpus operations")
    sp.add_argument("action", choices=("verify", "update"))
    sp.add_argument("--golden", metavar="DIR", help="golden directory (default: bundled)")
    sp.set_defaults(func=cmd_corpus)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except TMError as exc:
        report(exc.diagnostics)
        return EXIT_ERRORS
    except argparse.ArgumentTypeError as exc:
        print(f"thingc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"thingc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


run = main

if __name__ == "__main__":
    sys.exit(main())
