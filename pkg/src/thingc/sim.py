"""
Deterministic token-flow simulation.

Each tick runs three phases:

1. injections from the scenario mint thing instances at Transfer stages;
2. every token that existed before the tick advances one hop along its
   unique outgoing flow arc for its thing, or is consumed if it has none;
3. trigger arcs whose source stage hosted activity this tick are evaluated
   in declaration order.  A firing trigger runs its actions and activates its
   target in the same tick (a Create target mints a new instance); newly
   activated stages are evaluated in the next round.  Each trigger arc fires
   at most once per tick, which bounds cyclic trigger graphs.

Activity means a token arrived at the stage, was minted there, or the stage
was activated by a trigger.  ``now()`` is the current tick.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import (
    ArcKind, Diagnostic, EventDef, Model, SourceSpan, StageKind, TMError,
    error, is_anchor,
)
from .events import BehaviorGraph, strongly_connected
from .expr import evaluate


class ScenarioError(TMError):
    pass


class SimulationError(TMError):
    pass


@dataclass(frozen=True)
class Injection:
    tick: int
    thing: str
    stage: str


@dataclass(frozen=True)
class Scenario:
    name: str
    horizon: int
    injections: tuple[Injection, ...] = ()


@dataclass(frozen=True)
class Step:
    tick: int
    kind: str  # move | trigger | assign | create | consume
    elements: tuple[str, ...]
    thing: Optional[str] = None
    values: tuple[tuple[str, object], ...] = ()

    def to_dict(self) -> dict:
        return {"tick": self.tick, "kind": self.kind, "elements": list(self.elements),
                "thing": self.thing, "values": dict(self.values)}


@dataclass(frozen=True)
class Trace:
    steps: tuple[Step, ...]
    final_state: dict = field(default_factory=dict)

    def to_jsonl(self) -> str:
        lines = [json.dumps(s.to_dict(), sort_keys=True) for s in self.steps]
        lines.append(json.dumps({"final_state": self.final_state}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def assignments(self, var: str) -> list:
        return [dict(s.values)[var] for s in self.steps if s.kind == "assign" and s.elements[-1] == var]


@dataclass(frozen=True)
class EventOccurrence:
    event: str
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("occurrence ends before it starts")


# ---------------------------------------------------------------------
# Scenario files (.tms)
# ---------------------------------------------------------------------

_INJECT_RE = re.compile(r"^at\s+(\d+)\s+inject\s+([A-Za-z_]\w*)\s+into\s+([A-Za-z_]\w*)$")
_HORIZON_RE = re.compile(r"^horizon\s+(\d+)$")


def load_scenario(text: str, m: Optional[Model] = None, file: str = "<string>",
                  name: Optional[str] = None) -> Scenario:
    """
    Parse ``horizon <n>`` and ``at <tick> inject <thing> into <stage>`` lines.

    Stage references are checked against ``m`` when given.
    """
    diags: list[Diagnostic] = []
    horizon = None
    injections = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        span = SourceSpan(file, lineno, 1, lineno, max(len(raw), 1))
        if mh := _HORIZON_RE.match(line):
            horizon = int(mh.group(1))
        elif mi := _INJECT_RE.match(line):
            injections.append((Injection(int(mi.group(1)), mi.group(2), mi.group(3)), span))
        else:
            diags.append(error("syntax-error", f"cannot parse scenario line {line!r}", span))
    if horizon is None and not diags:
        diags.append(error("no-horizon", "scenario declares no horizon", file))
    for inj, span in injections:
        if horizon is not None and inj.tick >= horizon:
            diags.append(error("inject-after-horizon", f"injection at tick {inj.tick} >= horizon {horizon}", span))
        if m is not None:
            stage = m.stage_by_id.get(inj.stage)
            if stage is None:
                diags.append(error("unknown-stage", f"unknown stage {inj.stage!r}", span))
            elif stage.kind is not StageKind.TRANSFER:
                diags.append(error("inject-not-transfer",
                                   f"stage {inj.stage!r} is a {stage.kind.value} stage, not transfer", span))
    if diags:
        raise ScenarioError(diags)
    if name is None:
        name = Path(file).stem if file != "<string>" else "scenario"
    return Scenario(name, horizon, tuple(inj for inj, _ in injections))


def load_scenario_file(path, m: Optional[Model] = None) -> Scenario:
    path = Path(path)
    return load_scenario(path.read_text(encoding="utf-8"), m, file=str(path), name=path.stem)


# ---------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------

@dataclass
class _Token:
    id: str
    thing: str
    stage: str
    born: int


def _routing(m: Model) -> dict[tuple[str, str], object]:
    routes: dict[tuple[str, str], object] = {}
    diags = []
    for a in m.flows():
        if is_anchor(a.source) or is_anchor(a.target):
            continue
        key = (a.source, a.thing)
        if key in routes:
            diags.append(error("nondeterministic-routing",
                               f"stage {a.source!r} has several outgoing flows for {a.thing!r}",
                               a.span if a.span is not None else a.id))
        routes[key] = a
    if diags:
        raise SimulationError(diags)
    return routes


def _minted_things(m: Model, stage_id: str) -> list[str]:
    things = list(dict.fromkeys(a.thing for a in m.flows() if a.source == stage_id))
    if things:
        return things
    stage = m.stage_by_id[stage_id]
    return [stage.label or stage.id]


def simulate(m: Model, s: Scenario, max_steps_per_tick: int = 10_000) -> Trace:
    routes = _routing(m)
    for inj in s.injections:
        st = m.stage_by_id.get(inj.stage)
        if st is None or st.kind is not StageKind.TRANSFER:
            raise ScenarioError([error("inject-not-transfer", f"cannot inject into {inj.stage!r}", inj.stage)])
    env = {v.id: v.initial for v in m.variables}
    triggers = [a for a in m.triggers() if not is_anchor(a.source) and not is_anchor(a.target)]
    tokens: list[_Token] = []
    counters: dict[str, int] = {}
    steps: list[Step] = []

    def mint(thing: str, stage: str, tick: int, how: str) -> Step:
        counters[thing] = counters.get(thing, 0) + 1
        tok = _Token(f"{thing}#{counters[thing]}", thing, stage, tick)
        tokens.append(tok)
        return Step(tick, "create", (stage,), tok.id, (("via", how),))

    for tick in range(s.horizon):
        tick_steps: list[Step] = []
        active: list[str] = []

        def activate(stage: str) -> None:
            if stage not in active:
                active.append(stage)

        for inj in s.injections:
            if inj.tick == tick:
                tick_steps.append(mint(inj.thing, inj.stage, tick, "inject"))
                activate(inj.stage)

        for tok in list(tokens):
            if tok.born == tick:
                continue
            arc = routes.get((tok.stage, tok.thing))
            if arc is None:
                tokens.remove(tok)
                tick_steps.append(Step(tick, "consume", (tok.stage,), tok.id))
                continue
            tick_steps.append(Step(tick, "move", (arc.id, arc.source, arc.target), tok.id))
            tok.stage = arc.target
            activate(arc.target)

        fired: set[str] = set()
        frontier = list(active)
        while frontier:
            current = set(frontier)
            frontier = []
            for arc in triggers:
                if arc.id in fired or arc.source not in current:
                    continue
                if arc.guard is not None and not evaluate(arc.guard, env, tick):
                    continue
                fired.add(arc.id)
                tick_steps.append(Step(tick, "trigger", (arc.id, arc.source, arc.target)))
                for act in arc.actions:
                    env[act.target] = evaluate(act.value, env, tick)
                    tick_steps.append(Step(tick, "assign", (arc.id, act.target), None,
                                           ((act.target, env[act.target]),)))
                if m.stage_by_id[arc.target].kind is StageKind.CREATE:
                    for thing in _minted_things(m, arc.target):
                        tick_steps.append(mint(thing, arc.target, tick, "trigger"))
                if arc.target not in frontier:
                    frontier.append(arc.target)
                if len(tick_steps) > max_steps_per_tick:
                    raise SimulationError([error("divergence",
                                                 f"more than {max_steps_per_tick} steps at tick {tick}", m.name)])
        steps.extend(tick_steps)

    final = {
        "variables": dict(env),
        "tokens": {t.id: t.stage for t in tokens},
    }
    return Trace(tuple(steps), final)


# ---------------------------------------------------------------------
# Event occurrences
# ---------------------------------------------------------------------

def trace_to_events(t: Trace, events: Sequence[EventDef], m: Optional[Model] = None) -> list[EventOccurrence]:
    """
    Occurrences of each event: maximal runs of consecutive ticks whose steps
    touch the event's region.  A move or trigger entering the region from
    outside in a later tick than the current occurrence's start begins a new
    occurrence, so repeated activations are counted separately.

    Sorted by start tick, then by the position of the first touching step.
    """
    found: list[tuple[int, int, EventOccurrence]] = []
    for e in events:
        region = set(e.region)
        stages = {r for r in e.region if m is None or r in m.stage_by_id}
        open_: Optional[list[int]] = None  # [start, end, first step index]
        for i, step in enumerate(t.steps):
            if not region.intersection(step.elements):
                continue
            entering = (step.kind in ("move", "trigger")
                        and step.elements[1] not in stages and step.elements[2] in stages)
            if open_ is not None and (step.tick > open_[1] + 1 or (entering and step.tick > open_[0])):
                found.append((open_[0], open_[2], EventOccurrence(e.id, open_[0], open_[1])))
                open_ = None
            if open_ is None:
                open_ = [step.tick, step.tick, i]
            else:
                open_[1] = step.tick
        if open_ is not None:
            found.append((open_[0], open_[2], EventOccurrence(e.id, open_[0], open_[1])))
    found.sort(key=lambda x: (x[0], x[1]))
    return [occ for _, _, occ in found]


def occurrence_violations(occurrences: Sequence[EventOccurrence], graph: BehaviorGraph) -> list[tuple[str, str]]:
    """
    Behavior edges (A, B) contradicted by the trace: B first occurs before A.
    Edges inside a cycle of the behavior graph impose no order and are skipped.
    """
    first: dict[str, int] = {}
    for occ in occurrences:
        first.setdefault(occ.event, occ.start)
    comp = strongly_connected(graph)
    bad = []
    for a, b in graph.edges:
        if comp[a] == comp[b] or a not in first or b not in first:
            continue
        if first[b] < first[a]:
            bad.append((a, b))
    return bad
