"""
Events over model regions, behavior graphs, and event composition.

A behavior edge (A, B) exists when an arc runs from a stage of A's region to
a stage of B's region, or when a directed path reaches B's region from A's
passing only through stages that belong to no region.  Each edge keeps the
arc ids of the first such witness found in declaration order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import networkx as nx

from .core import (
    Diagnostic, EventDef, Model, StageKind, TMError, error, flow_chains,
    has_errors, is_anchor, warning,
)


class EventError(TMError):
    pass


# ---------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------

def region_stages(m: Model, e: EventDef) -> list[str]:
    return [r for r in e.region if r in m.stage_by_id]


def check_region(m: Model, e: EventDef, others: Optional[Iterable[EventDef]] = None) -> list[Diagnostic]:
    """Existence and connectivity errors for one event; overlap warnings."""
    loc = e.span if e.span is not None else e.id
    diags: list[Diagnostic] = []
    if not e.region:
        return [error("region-empty", f"event {e.id!r} has an empty region", loc)]
    missing = [r for r in e.region if r not in m.stage_by_id and r not in m.arc_by_id]
    for r in missing:
        diags.append(error("region-dangling", f"event {e.id!r} references unknown element {r!r}", loc))
    if missing:
        return diags

    members = set(e.region)
    links = nx.Graph()
    links.add_nodes_from(e.region)
    for arc in m.arcs:
        ends = [x for x in (arc.source, arc.target) if x in members]
        if arc.id in members:
            links.add_edges_from((arc.id, x) for x in ends)
        elif len(ends) == 2:
            links.add_edge(*ends)
    if not nx.is_connected(links):
        diags.append(error("region-disconnected", f"event {e.id!r} region is not weakly connected", loc))

    if others is None:
        others = m.events
    for other in others:
        if other.id == e.id:
            continue
        shared = [r for r in e.region if r in set(other.region)]
        if shared:
            diags.append(warning("region-overlap",
                                 f"event {e.id!r} shares {', '.join(shared)} with event {other.id!r}", loc))
    return diags


def check_events(m: Model, events: Optional[Sequence[EventDef]] = None) -> list[Diagnostic]:
    events = list(m.events if events is None else events)
    diags = []
    for e in events:
        diags.extend(check_region(m, e, events))
    return diags


# ---------------------------------------------------------------------
# Behavior graph
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class BehaviorGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...] = ()
    witnesses: dict = field(default_factory=dict)  # (before, after) -> arc ids
    composed: dict = field(default_factory=dict)  # mega id -> constituent ids
    internal: dict = field(default_factory=dict)  # mega id -> collapsed edges
    names: dict = field(default_factory=dict)  # node id -> display name

    def __post_init__(self):
        known = set(self.nodes)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a!r}, {b!r}) references an unknown node")

    def successors(self, node: str) -> list[str]:
        return [b for a, b in self.edges if a == node]


def build_behavior(m: Model, events: Optional[Sequence[EventDef]] = None) -> BehaviorGraph:
    events = list(m.events if events is None else events)
    diags = check_events(m, events)
    if has_errors(diags):
        raise EventError([d for d in diags if d.is_error])

    order = {e.id: i for i, e in enumerate(events)}
    owners: dict[str, list[str]] = {}
    for e in events:
        for sid in region_stages(m, e):
            owners.setdefault(sid, []).append(e.id)
    out_arcs: dict[str, list] = {}
    for a in m.arcs:
        if not (is_anchor(a.source) or is_anchor(a.target)):
            out_arcs.setdefault(a.source, []).append(a)

    witnesses: dict[tuple[str, str], tuple[str, ...]] = {}

    def record(srcs: list[str], dsts: list[str], path: tuple[str, ...]) -> None:
        for x in srcs:
            for y in dsts:
                if x != y and (x, y) not in witnesses:
                    witnesses[(x, y)] = path

    for a in m.arcs:
        if is_anchor(a.source) or is_anchor(a.target) or a.source not in owners:
            continue
        if a.target in owners:
            record(owners[a.source], owners[a.target], (a.id,))
            continue
        # walk through unregioned stages
        queue = deque([(a.target, (a.id,))])
        seen = {a.target}
        while queue:
            stage, path = queue.popleft()
            for nxt in out_arcs.get(stage, []):
                if nxt.target in owners:
                    record(owners[a.source], owners[nxt.target], path + (nxt.id,))
                elif nxt.target not in seen:
                    seen.add(nxt.target)
                    queue.append((nxt.target, path + (nxt.id,)))

    edges = sorted(witnesses, key=lambda ab: (order[ab[0]], order[ab[1]]))
    return BehaviorGraph(
        nodes=tuple(e.id for e in events),
        edges=tuple(edges),
        witnesses={ab: witnesses[ab] for ab in edges},
        names={e.id: e.name for e in events},
    )


def check_witnesses(m: Model, g: BehaviorGraph, events: Optional[Sequence[EventDef]] = None) -> list[str]:
    """Re-verify every edge witness against the model; returns problems found."""
    events = {e.id: e for e in (m.events if events is None else events)}
    regioned = {s for e in events.values() for s in region_stages(m, e)}
    problems = []
    for (x, y), path in g.witnesses.items():
        arcs = [m.arc_by_id.get(i) for i in path]
        if not arcs or None in arcs:
            problems.append(f"{x}->{y}: unknown arc in witness")
            continue
        ok = arcs[0].source in region_stages(m, events[x]) and arcs[-1].target in region_stages(m, events[y])
        ok = ok and all(arcs[i].target == arcs[i + 1].source for i in range(len(arcs) - 1))
        ok = ok and all(a.target not in regioned for a in arcs[:-1])
        if not ok:
            problems.append(f"{x}->{y}: witness {list(path)} does not connect the regions")
    return problems


def compose_events(g: BehaviorGraph, members: Iterable[str], name: str) -> BehaviorGraph:
    """Replace ``members`` by one mega-event node; edges are re-anchored."""
    members = list(dict.fromkeys(members))
    if not members:
        raise EventError([error("unknown-member", "composition needs at least one member", name)])
    unknown = [x for x in members if x not in g.nodes]
    if unknown:
        raise EventError([error("unknown-member", f"no event {x!r} in the behavior graph", name) for x in unknown])
    mset = set(members)
    if name in g.nodes and name not in mset:
        raise EventError([error("duplicate-node", f"node {name!r} already exists", name)])

    first = min(g.nodes.index(x) for x in members)
    nodes = [x for i, x in enumerate(g.nodes) if x not in mset or i == first]
    nodes[nodes.index(g.nodes[first])] = name

    def image(x: str) -> str:
        return name if x in mset else x

    edges: list[tuple[str, str]] = []
    witnesses: dict = {}
    internal: list[tuple[str, str]] = []
    for a, b in g.edges:
        ia, ib = image(a), image(b)
        if ia == ib:
            if a != b:
                internal.append((a, b))
            continue
        if (ia, ib) not in witnesses:
            edges.append((ia, ib))
            witnesses[(ia, ib)] = g.witnesses.get((a, b), ())
    index = {x: i for i, x in enumerate(nodes)}
    edges.sort(key=lambda ab: (index[ab[0]], index[ab[1]]))

    composed = {k: v for k, v in g.composed.items()}
    composed[name] = tuple(members)
    inner = dict(g.internal)
    inner[name] = tuple(internal)
    names = {k: v for k, v in g.names.items() if k not in mset}
    names[name] = name
    return BehaviorGraph(tuple(nodes), tuple(edges), {ab: witnesses[ab] for ab in edges},
                         composed, inner, names)


def _digraph(g: BehaviorGraph) -> nx.DiGraph:
    d = nx.DiGraph()
    d.add_nodes_from(g.nodes)
    d.add_edges_from(g.edges)
    return d


def reachable(g: BehaviorGraph, start: str) -> set[str]:
    """Nodes reachable from ``start`` by one or more edges."""
    d = _digraph(g)
    seen = nx.descendants(d, start)
    if any(p in seen or p == start for p in d.predecessors(start)):
        seen.add(start)
    return seen


def strongly_connected(g: BehaviorGraph) -> dict[str, int]:
    """Component index per node (mutual reachability), numbered by first node."""
    owner = {x: frozenset(c) for c in nx.strongly_connected_components(_digraph(g)) for x in c}
    index: dict[frozenset, int] = {}
    return {x: index.setdefault(owner[x], len(index)) for x in g.nodes}


def has_cycle(g: BehaviorGraph) -> bool:
    return not nx.is_directed_acyclic_graph(_digraph(g))


def weak_components(g: BehaviorGraph) -> list[list[str]]:
    order = {x: i for i, x in enumerate(g.nodes)}
    comps = [sorted(c, key=order.__getitem__) for c in nx.weakly_connected_components(_digraph(g))]
    return sorted(comps, key=lambda c: order[c[0]])


# ---------------------------------------------------------------------
# Send events
# ---------------------------------------------------------------------

def detect_send_events(m: Model) -> list[EventDef]:
    """One ``send(thing, src, dst)`` event per Release..Receive chain that
    crosses a machine boundary."""
    out = []
    for chain in flow_chains(m):
        if len(chain) < 2 or m.kind_of(chain[0].target) is not StageKind.RELEASE:
            continue
        src = m.machine_of(chain[0].target)
        dst = m.machine_of(chain[-1].target)
        if src == dst:
            continue
        thing = chain[-1].thing
        region: list[str] = []
        for a in chain[1:]:
            region.extend([a.source, a.id])
        region.append(chain[-1].target)
        out.append(EventDef(f"send{len(out) + 1}", f"send({thing}, {src}, {dst})", tuple(region)))
    return out
