"""
Simplification passes and use-case reduction.

Level 1 removes Release and Transfer stages by splicing each
Release/Transfer chain into one flow arc.  Level 2 additionally erases
Create, Process and Receive stages whose role is implied by arrow endpoints,
re-anchoring their arcs on machine boundaries (``@machine``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import (
    Arc, ArcKind, Diagnostic, Model, ModelError, StageKind, anchor, error,
    flow_relation, is_anchor, warning,
)

_CHAIN = (StageKind.RELEASE, StageKind.TRANSFER)
_ABSORBED = frozenset({
    (StageKind.RECEIVE, StageKind.PROCESS),
    (StageKind.CREATE, StageKind.PROCESS),
})


def _filter_events(m: Model, stage_ids: set[str], arc_ids: set[str]):
    out = []
    for e in m.events:
        region = tuple(r for r in e.region if r in stage_ids or r in arc_ids)
        if region:
            out.append(e if region == e.region else
                       type(e)(e.id, e.name, region, e.time, span=e.span))
    return out


def _check_chains(m: Model) -> None:
    chain_ids = {s.id for s in m.stages if s.kind in _CHAIN}
    fan_in: dict[str, int] = {}
    fan_out: dict[str, int] = {}
    for a in m.flows():
        if a.target in chain_ids:
            fan_in[a.target] = fan_in.get(a.target, 0) + 1
        if a.source in chain_ids:
            fan_out[a.source] = fan_out.get(a.source, 0) + 1
    diags = []
    for sid in sorted(chain_ids, key=lambda s: m.stages.index(m.stage_by_id[s])):
        if fan_in.get(sid, 0) > 1 or fan_out.get(sid, 0) > 1:
            diags.append(error("unspliceable-chain",
                               f"{m.stage_by_id[sid].kind.value} stage {sid!r} branches or merges flows", sid))
    if diags:
        raise ModelError(diags)


def simplify_level1(m: Model) -> Model:
    """Splice every Release/Transfer chain into a single flow arc."""
    if not any(s.kind in _CHAIN for s in m.stages):
        return m
    _check_chains(m)
    out_flow = {a.source: a for a in m.flows() if m.kind_of(a.source) in _CHAIN}
    arcs: list[Arc] = []
    for a in m.arcs:
        src_chain = m.kind_of(a.source) in _CHAIN
        dst_chain = m.kind_of(a.target) in _CHAIN
        if a.kind is ArcKind.TRIGGER:
            if not (src_chain or dst_chain):
                arcs.append(a)
            continue
        if src_chain:
            continue
        if not dst_chain:
            arcs.append(a)
            continue
        path, cur, seen = [a], a.target, {a.target}
        while m.kind_of(cur) in _CHAIN and cur in out_flow:
            nxt = out_flow[cur]
            if nxt.target in seen:
                raise ModelError([error("unspliceable-chain", f"flow chain through {cur!r} loops", a.id)])
            seen.add(nxt.target)
            path.append(nxt)
            cur = nxt.target
        if m.kind_of(cur) in _CHAIN:
            continue  # open chain: the thing leaves the model
        things = {p.thing for p in path}
        if len(things) != 1:
            raise ModelError([error("unspliceable-chain",
                                    f"chain starting at {a.id!r} changes thing: {sorted(things)}", a.id)])
        arcs.append(Arc(a.id, ArcKind.FLOW, a.source, cur, a.thing, span=a.span))
    stages = [s for s in m.stages if s.kind not in _CHAIN]
    events = _filter_events(m, {s.id for s in stages}, {a.id for a in arcs})
    return m.replace(stages=stages, arcs=arcs, events=events)


def retained_stages(m: Model) -> list[str]:
    """Stages level 2 cannot erase: ends of intra-machine flows that are not
    a plain receive-then-process or create-then-process step."""
    keep: set[str] = set()
    for a in m.flows():
        if is_anchor(a.source) or is_anchor(a.target):
            continue
        if m.machine_of(a.source) != m.machine_of(a.target):
            continue
        if (m.kind_of(a.source), m.kind_of(a.target)) not in _ABSORBED:
            keep.update((a.source, a.target))
    return [s.id for s in m.stages if s.id in keep]


def simplify_level2(m: Model, warnings: Optional[list[Diagnostic]] = None) -> Model:
    """
    Erase stages recoverable from arrow endpoints and anchor arcs on machines.

    Non-recoverable stages are kept; a ``stage-retained`` warning for each is
    appended to ``warnings`` when given.
    """
    m = simplify_level1(m)
    keep = set(retained_stages(m))
    if warnings is not None:
        for sid in retained_stages(m):
            warnings.append(warning("stage-retained",
                                    f"{m.stage_by_id[sid].kind.value} stage {sid!r} continues a flow inside "
                                    f"machine {m.stage_by_id[sid].machine!r}; kept", sid))

    def reanchor(ref: str) -> str:
        if is_anchor(ref) or ref in keep:
            return ref
        return anchor(m.stage_by_id[ref].machine)

    arcs: list[Arc] = []
    seen = set()
    for a in m.arcs:
        src, dst = reanchor(a.source), reanchor(a.target)
        if src == dst and is_anchor(src):
            continue
        key = (a.kind, src, dst, a.thing, a.guard, a.actions)
        if key in seen:
            continue
        seen.add(key)
        arcs.append(a if (src, dst) == (a.source, a.target) else
                    Arc(a.id, a.kind, src, dst, a.thing, a.guard, a.actions, span=a.span))
    stages = [s for s in m.stages if s.id in keep]
    events = _filter_events(m, keep, {a.id for a in arcs})
    return m.replace(stages=stages, arcs=arcs, events=events)


def stage_census(m: Model) -> dict[str, int]:
    counts = {k.value: 0 for k in StageKind}
    for s in m.stages:
        counts[s.kind.value] += 1
    return counts


# ---------------------------------------------------------------------
# Use-case reduction
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class UseCaseDiagram:
    name: str
    actors: tuple[str, ...]
    use_cases: tuple[str, ...]
    associations: tuple[tuple[str, str], ...]

    def __post_init__(self):
        for a, u in self.associations:
            if a not in self.actors or u not in self.use_cases:
                raise ValueError(f"association ({a!r}, {u!r}) references an undeclared actor or use case")


def use_case_groups(m: Model) -> list[tuple[str, set[str]]]:
    """(use-case name, machine ids in its subtrees), in declaration order."""
    tagged = [mach for mach in m.machines if mach.usecase is not None]
    groups: dict[str, set[str]] = {}
    if tagged:
        for mach in tagged:
            groups.setdefault(mach.usecase, set()).update(m.subtree(mach.id))
    else:
        for mach in m.top_level():
            if not mach.is_actor:
                groups.setdefault(mach.display, set()).update(m.subtree(mach.id))
    return list(groups.items())


def reduce_to_use_case(m: Model) -> UseCaseDiagram:
    """Collapse a model into actors, use cases, and actor/use-case associations."""
    actors = [mach for mach in m.machines if mach.is_actor]
    if not actors:
        raise ModelError([error("no-actors", "no machine is marked as an actor", m.name)])
    groups = use_case_groups(m)
    links: set[tuple[str, str]] = {(src, dst) for src, _, dst in flow_relation(m)}
    links |= {(m.machine_of(a.source), m.machine_of(a.target)) for a in m.triggers()}
    assoc = []
    for actor in actors:
        tree = m.subtree(actor.id)
        for uc, members in groups:
            if any((x in tree and y in members) or (y in tree and x in members) for x, y in links):
                assoc.append((actor.display, uc))
    return UseCaseDiagram(m.name, tuple(a.display for a in actors), tuple(g for g, _ in groups), tuple(assoc))
