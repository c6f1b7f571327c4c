"""
DOT and JSON emitters.

All output is a pure function of the input structure: identical inputs give
byte-identical text.
"""

from __future__ import annotations

import json
from typing import Optional, Sequence

from .core import (
    Arc, ArcKind, EventDef, Machine, Model, Stage, StageKind, StateVar,
    is_anchor,
)
from .events import BehaviorGraph
from .expr import parse_actions, parse_expr
from .sim import EventOccurrence, Step, Trace
from .transform import UseCaseDiagram

SCHEMA_VERSION = 1

# one style per stage kind; colors are not meaningful beyond telling kinds apart
STAGE_STYLE = {
    StageKind.CREATE: 'shape=box, style="rounded,filled", fillcolor="#e8f4e8"',
    StageKind.PROCESS: 'shape=box, style="filled", fillcolor="#e8eef8"',
    StageKind.RELEASE: 'shape=box, style="filled", fillcolor="#f8f0e0"',
    StageKind.TRANSFER: 'shape=box, style="filled", fillcolor="#f0f0f0"',
    StageKind.RECEIVE: 'shape=box, style="filled", fillcolor="#f8e8e8"',
}


def q(text: str) -> str:
    """Quote a DOT identifier or string."""
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _stage_label(s: Stage) -> str:
    head = s.kind.value.capitalize()
    return f"{head}\n{s.label or s.id}"


def _arc_attrs(a: Arc) -> str:
    if a.kind is ArcKind.FLOW:
        return f"label={q(a.thing)}, style=solid"
    parts = []
    if a.guard is not None:
        parts.append(f"if {a.guard}")
    if a.actions:
        parts.append("; ".join(str(x) for x in a.actions))
    attrs = "style=dashed"
    if parts:
        attrs += f", label={q(chr(10).join(parts))}"
    return attrs


def render_model_dot(m: Model, overlay: Optional[Sequence[EventDef]] = None) -> str:
    """Machines as clusters, stages as nodes, flows solid, triggers dashed.

    Each overlay event becomes a note node named after the event, joined by
    dotted lines to the stages of its region.
    """
    out = [f"digraph {q(m.name)} {{", "  graph [compound=true, rankdir=LR];",
           '  node [fontname="Helvetica"];']
    stages_of: dict[str, list[Stage]] = {mid: [] for mid in m.machine_by_id}
    for s in m.stages:
        stages_of[s.machine].append(s)
    anchored = set()
    for a in m.arcs:
        for end in (a.source, a.target):
            if is_anchor(end):
                anchored.add(end[1:])

    def cluster(mid: str, depth: int) -> None:
        mach = m.machine_by_id[mid]
        pad = "  " * depth
        out.append(f"{pad}subgraph {q('cluster_' + mid)} {{")
        label = mach.display + (" (actor)" if mach.is_actor else "")
        out.append(f"{pad}  label={q(label)};")
        if mid in anchored:
            out.append(f"{pad}  {q('@' + mid)} [label={q(mach.display)}, shape=plaintext];")
        for s in stages_of[mid]:
            out.append(f"{pad}  {q(s.id)} [label={q(_stage_label(s))}, {STAGE_STYLE[s.kind]}];")
        for child in m.children[mid]:
            cluster(child, depth + 1)
        out.append(f"{pad}}}")

    cluster(m.root.id, 1)
    for a in m.arcs:
        out.append(f"  {q(a.source)} -> {q(a.target)} [{_arc_attrs(a)}];")
    for e in overlay or ():
        node = "event_" + e.id
        out.append(f"  {q(node)} [label={q(e.id)}, tooltip={q(e.name)}, shape=note, style=dashed];")
        for r in e.region:
            if r in m.stage_by_id:
                out.append(f"  {q(node)} -> {q(r)} [style=dotted, arrowhead=none];")
    out.append("}")
    return "\n".join(out) + "\n"


def render_behavior_dot(g: BehaviorGraph, name: str = "behavior") -> str:
    """Events as nodes, precedence edges; composed mega-events as clusters."""
    if not g.nodes:
        return f"digraph {q(name)} {{\n}}\n"
    out = [f"digraph {q(name)} {{", "  graph [compound=true];", '  node [shape=ellipse, fontname="Helvetica"];']

    def anchor_node(x: str) -> str:
        # first plain event inside a (possibly nested) mega-event
        while x in g.composed:
            x = g.composed[x][0]
        return x

    def emit(x: str, depth: int) -> None:
        pad = "  " * depth
        if x in g.composed:
            out.append(f"{pad}subgraph {q('cluster_' + x)} {{")
            out.append(f"{pad}  label={q(x)}; style=bold;")
            for member in g.composed[x]:
                emit(member, depth + 1)
            for a, b in g.internal.get(x, ()):
                out.append(f"{pad}  {q(anchor_node(a))} -> {q(anchor_node(b))} [style=dotted];")
            out.append(f"{pad}}}")
        else:
            title = g.names.get(x, x)
            label = x if title == x else f"{x}\n{title}"
            out.append(f"{pad}{q(x)} [label={q(label)}];")

    for x in g.nodes:
        emit(x, 1)
    for a, b in g.edges:
        attrs = []
        if a in g.composed:
            attrs.append(f"ltail={q('cluster_' + a)}")
        if b in g.composed:
            attrs.append(f"lhead={q('cluster_' + b)}")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        out.append(f"  {q(anchor_node(a))} -> {q(anchor_node(b))}{suffix};")
    out.append("}")
    return "\n".join(out) + "\n"


def render_usecase_dot(d: UseCaseDiagram) -> str:
    out = [f"digraph {q(d.name)} {{", "  graph [rankdir=LR];"]
    for a in d.actors:
        out.append(f"  {q('actor:' + a)} [label={q(a)}, shape=plaintext];")
    out.append(f"  subgraph {q('cluster_system')} {{")
    out.append(f"    label={q(d.name)};")
    for u in d.use_cases:
        out.append(f"    {q('uc:' + u)} [label={q(u)}, shape=ellipse];")
    out.append("  }")
    for a, u in d.associations:
        out.append(f"  {q('actor:' + a)} -> {q('uc:' + u)} [arrowhead=none];")
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------

def to_data(obj, kind: Optional[str] = None) -> dict:
    """Schema-versioned plain-data form of a core structure.

    Lists of events or occurrences carry no type when empty; pass ``kind``
    ("events" or "occurrences") to name it.
    """
    if isinstance(obj, Model):
        return {
            "tm_schema": SCHEMA_VERSION, "type": "model", "name": obj.name,
            "machines": [{"id": m.id, "name": m.name, "parent": m.parent, "is_actor": m.is_actor,
                          "usecase": m.usecase} for m in obj.machines],
            "stages": [{"id": s.id, "kind": s.kind.value, "machine": s.machine, "label": s.label}
                       for s in obj.stages],
            "arcs": [_arc_data(a) for a in obj.arcs],
            "variables": [{"id": v.id, "var_type": v.var_type, "enum_values": list(v.enum_values),
                           "initial": v.initial} for v in obj.variables],
            "events": [_event_data(e) for e in obj.events],
        }
    if isinstance(obj, BehaviorGraph):
        return {
            "tm_schema": SCHEMA_VERSION, "type": "behavior",
            "nodes": [{"id": x, "name": obj.names.get(x, x)} for x in obj.nodes],
            "edges": [{"before": a, "after": b, "witness": list(obj.witnesses.get((a, b), ()))}
                      for a, b in obj.edges],
            "composed": {k: list(v) for k, v in obj.composed.items()},
            "internal": {k: [list(e) for e in v] for k, v in obj.internal.items()},
        }
    if isinstance(obj, UseCaseDiagram):
        return {
            "tm_schema": SCHEMA_VERSION, "type": "usecase", "name": obj.name,
            "actors": list(obj.actors), "use_cases": list(obj.use_cases),
            "associations": [list(p) for p in obj.associations],
        }
    if isinstance(obj, Trace):
        return {"tm_schema": SCHEMA_VERSION, "type": "trace",
                "steps": [s.to_dict() for s in obj.steps], "final_state": obj.final_state}
    if isinstance(obj, (list, tuple)):
        items = list(obj)
        if not items and kind is None:
            raise TypeError("cannot tell the type of an empty list; pass kind")
        if kind == "occurrences" or (kind is None and all(isinstance(x, EventOccurrence) for x in items)):
            return {"tm_schema": SCHEMA_VERSION, "type": "occurrences",
                    "occurrences": [{"event": o.event, "start": o.start, "end": o.end} for o in items]}
        if kind == "events" or (kind is None and all(isinstance(x, EventDef) for x in items)):
            return {"tm_schema": SCHEMA_VERSION, "type": "events", "events": [_event_data(e) for e in items]}
    raise TypeError(f"cannot export {type(obj).__name__}")


def _arc_data(a: Arc) -> dict:
    return {"id": a.id, "kind": a.kind.value, "source": a.source, "target": a.target, "thing": a.thing,
            "guard": None if a.guard is None else str(a.guard),
            "actions": [str(x) for x in a.actions]}


def _event_data(e: EventDef) -> dict:
    return {"id": e.id, "name": e.name, "region": list(e.region), "time": e.time}


def export_json(obj, kind: Optional[str] = None) -> str:
    return json.dumps(to_data(obj, kind), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def from_data(data: dict):
    if data.get("tm_schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported tm_schema {data.get('tm_schema')!r}")
    kind = data.get("type")
    if kind == "model":
        return Model(
            data["name"],
            tuple(Machine(m["id"], m["name"], m["parent"], m["is_actor"], m["usecase"]) for m in data["machines"]),
            tuple(Stage(s["id"], StageKind(s["kind"]), s["machine"], s["label"]) for s in data["stages"]),
            tuple(Arc(a["id"], ArcKind(a["kind"]), a["source"], a["target"], a["thing"],
                      None if a["guard"] is None else parse_expr(a["guard"]),
                      parse_actions("; ".join(a["actions"])))
                  for a in data["arcs"]),
            tuple(StateVar(v["id"], v["var_type"], v["initial"], tuple(v["enum_values"]))
                  for v in data["variables"]),
            tuple(_event_from(e) for e in data["events"]),
        )
    if kind == "behavior":
        edges = tuple((e["before"], e["after"]) for e in data["edges"])
        return BehaviorGraph(
            tuple(n["id"] for n in data["nodes"]), edges,
            {(e["before"], e["after"]): tuple(e["witness"]) for e in data["edges"]},
            {k: tuple(v) for k, v in data["composed"].items()},
            {k: tuple(tuple(e) for e in v) for k, v in data["internal"].items()},
            {n["id"]: n["name"] for n in data["nodes"]},
        )
    if kind == "usecase":
        return UseCaseDiagram(data["name"], tuple(data["actors"]), tuple(data["use_cases"]),
                              tuple(tuple(p) for p in data["associations"]))
    if kind == "trace":
        return Trace(tuple(Step(s["tick"], s["kind"], tuple(s["elements"]), s["thing"],
                                tuple(s["values"].items())) for s in data["steps"]),
                     data["final_state"])
    if kind == "occurrences":
        return [EventOccurrence(o["event"], o["start"], o["end"]) for o in data["occurrences"]]
    if kind == "events":
        return [_event_from(e) for e in data["events"]]
    raise ValueError(f"unknown structure type {kind!r}")


def _event_from(e: dict) -> EventDef:
    return EventDef(e["id"], e["name"], tuple(e["region"]), e["time"])


def import_json(text: str):
    return from_data(json.loads(text))
