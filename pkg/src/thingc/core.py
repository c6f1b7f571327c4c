"""
Core domain types for TM models and the stage-legality validator.

Models are immutable.  Element collections keep declaration order, which is
the tie-break order used by every downstream pass.

Arc endpoints are stage ids.  Simplified (level 2) models may also anchor an
endpoint at a machine boundary; such endpoints are written ``@<machine id>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

from .expr import Assign, Expr, Name, Value, names


class StageKind(str, Enum):
    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER = "transfer"
    RECEIVE = "receive"


class ArcKind(str, Enum):
    FLOW = "flow"
    TRIGGER = "trigger"


# ---------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    end_line: int
    end_column: int

    def __post_init__(self):
        if (self.end_line, self.end_column) < (self.line, self.column):
            raise ValueError("span end precedes start")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    location: Union[SourceSpan, str]

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def __str__(self) -> str:
        return f"{self.location}: {self.severity}: {self.message} [{self.code}]"


def error(code: str, message: str, location) -> Diagnostic:
    return Diagnostic("error", code, message, location)


def warning(code: str, message: str, location) -> Diagnostic:
    return Diagnostic("warning", code, message, location)


def has_errors(diags: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diags)


class TMError(Exception):
    """An operation failed; ``diagnostics`` lists every problem found."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


class ModelError(TMError):
    pass


# ---------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class Machine:
    id: str
    name: str = ""
    parent: Optional[str] = None
    is_actor: bool = False
    usecase: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    @property
    def display(self) -> str:
        return self.name or self.id


@dataclass(frozen=True)
class Stage:
    id: str
    kind: StageKind
    machine: str
    label: str = ""
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Arc:
    id: str
    kind: ArcKind
    source: str
    target: str
    thing: Optional[str] = None
    guard: Optional[Expr] = None
    actions: tuple[Assign, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    @property
    def is_flow(self) -> bool:
        return self.kind is ArcKind.FLOW


@dataclass(frozen=True)
class StateVar:
    id: str
    var_type: str  # "number" | "enum"
    initial: Value
    enum_values: tuple[str, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def accepts(self, value: Value) -> bool:
        if self.var_type == "number":
            return isinstance(value, int) and not isinstance(value, bool)
        return value in self.enum_values


@dataclass(frozen=True)
class EventDef:
    id: str
    name: str
    region: tuple[str, ...]
    time: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)


Element = Union[Machine, Stage, Arc, StateVar, EventDef]


def is_anchor(ref: str) -> bool:
    return ref.startswith("@")


def anchor(machine_id: str) -> str:
    return "@" + machine_id


# ---------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class Model:
    name: str
    machines: tuple[Machine, ...]
    stages: tuple[Stage, ...] = ()
    arcs: tuple[Arc, ...] = ()
    variables: tuple[StateVar, ...] = ()
    events: tuple[EventDef, ...] = ()

    @cached_property
    def machine_by_id(self) -> dict[str, Machine]:
        return {m.id: m for m in self.machines}

    @cached_property
    def stage_by_id(self) -> dict[str, Stage]:
        return {s.id: s for s in self.stages}

    @cached_property
    def arc_by_id(self) -> dict[str, Arc]:
        return {a.id: a for a in self.arcs}

    @cached_property
    def var_by_id(self) -> dict[str, StateVar]:
        return {v.id: v for v in self.variables}

    @cached_property
    def root(self) -> Machine:
        return next(m for m in self.machines if m.parent is None)

    @cached_property
    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {m.id: [] for m in self.machines}
        for m in self.machines:
            if m.parent is not None:
                out[m.parent].append(m.id)
        return out

    def top_level(self) -> list[Machine]:
        return [self.machine_by_id[c] for c in self.children[self.root.id]]

    def subtree(self, machine_id: str) -> set[str]:
        out, stack = set(), [machine_id]
        while stack:
            mid = stack.pop()
            out.add(mid)
            stack.extend(self.children[mid])
        return out

    def machine_of(self, ref: str) -> str:
        """Machine owning a stage id or an ``@machine`` anchor."""
        if is_anchor(ref):
            return ref[1:]
        return self.stage_by_id[ref].machine

    def kind_of(self, ref: str) -> Optional[StageKind]:
        return None if is_anchor(ref) else self.stage_by_id[ref].kind

    def flows(self) -> list[Arc]:
        return [a for a in self.arcs if a.kind is ArcKind.FLOW]

    def triggers(self) -> list[Arc]:
        return [a for a in self.arcs if a.kind is ArcKind.TRIGGER]

    def replace(self, **changes) -> "Model":
        fields = dict(
            name=self.name, machines=self.machines, stages=self.stages,
            arcs=self.arcs, variables=self.variables, events=self.events,
        )
        fields.update({k: tuple(v) for k, v in changes.items() if k != "name"})
        if "name" in changes:
            fields["name"] = changes["name"]
        return Model(**fields)


def _loc(el: Element) -> Union[SourceSpan, str]:
    return el.span if el.span is not None else el.id


def build_model(name: str, declarations: Iterable[Element]) -> Model:
    """
    Assemble and structurally check a model.

    Raises ModelError listing every duplicate id, dangling reference,
    malformed arc or out-of-domain initial value.
    """
    decls = list(declarations)
    machines = [d for d in decls if isinstance(d, Machine)]
    stages = [d for d in decls if isinstance(d, Stage)]
    arcs = [d for d in decls if isinstance(d, Arc)]
    variables = [d for d in decls if isinstance(d, StateVar)]
    events = [d for d in decls if isinstance(d, EventDef)]
    diags: list[Diagnostic] = []

    for kind, items in (("machine", machines), ("stage", stages), ("arc", arcs),
                        ("variable", variables), ("event", events)):
        seen: set[str] = set()
        for it in items:
            if it.id in seen:
                diags.append(error("duplicate-id", f"duplicate {kind} id {it.id!r}", _loc(it)))
            seen.add(it.id)
    stage_ids = {s.id for s in stages}
    arc_ids = {a.id for a in arcs}
    for a in arcs:
        if a.id in stage_ids:
            diags.append(error("ambiguous-id", f"arc id {a.id!r} is also a stage id", _loc(a)))

    machine_ids = {m.id for m in machines}
    roots = [m for m in machines if m.parent is None]
    if not roots:
        diags.append(error("no-root-machine", "model declares no root machine", name))
    elif len(roots) > 1:
        for m in roots[1:]:
            diags.append(error("multiple-roots", f"second root machine {m.id!r}", _loc(m)))
    parent_of = {m.id: m.parent for m in machines}
    for m in machines:
        if m.parent is not None and m.parent not in machine_ids:
            diags.append(error("dangling-reference", f"unknown parent machine {m.parent!r}", _loc(m)))
            continue
        seen, cur = {m.id}, m.parent
        while cur is not None and cur in parent_of:
            if cur in seen:
                diags.append(error("machine-cycle", f"machine {m.id!r} is nested in itself", _loc(m)))
                break
            seen.add(cur)
            cur = parent_of[cur]

    for s in stages:
        if not isinstance(s.kind, StageKind):
            diags.append(error("unknown-stage-kind", f"unknown stage kind {s.kind!r}", _loc(s)))
        if s.machine not in machine_ids:
            diags.append(error("dangling-reference", f"stage {s.id!r} in unknown machine {s.machine!r}", _loc(s)))

    var_ids = {v.id for v in variables}
    enum_literals = {val for v in variables for val in v.enum_values}
    for v in variables:
        if v.var_type not in ("number", "enum"):
            diags.append(error("bad-var-type", f"unknown variable type {v.var_type!r}", _loc(v)))
        elif v.var_type == "enum" and not v.enum_values:
            diags.append(error("bad-var-type", f"enum {v.id!r} has no values", _loc(v)))
        elif not v.accepts(v.initial):
            diags.append(error("bad-initial", f"initial value {v.initial!r} outside domain of {v.id!r}", _loc(v)))

    for a in arcs:
        for end in (a.source, a.target):
            ok = end[1:] in machine_ids if is_anchor(end) else end in stage_ids
            if not ok:
                diags.append(error("dangling-reference", f"arc {a.id!r} references unknown {end!r}", _loc(a)))
        if a.kind is ArcKind.FLOW:
            if not a.thing:
                diags.append(error("flow-missing-thing", f"flow arc {a.id!r} carries no thing", _loc(a)))
            if a.guard is not None or a.actions:
                diags.append(error("flow-guard", f"flow arc {a.id!r} has a guard or actions", _loc(a)))
        else:
            if a.thing:
                diags.append(error("trigger-thing", f"trigger arc {a.id!r} carries a thing", _loc(a)))
            used = set(names(a.guard)) if a.guard is not None else set()
            for act in a.actions:
                if act.target not in var_ids:
                    diags.append(error("unknown-variable", f"action assigns unknown variable {act.target!r}", _loc(a)))
                used |= names(act.value)
            for n in sorted(used - var_ids - enum_literals):
                diags.append(error("unknown-name", f"name {n!r} is neither a variable nor an enum value", _loc(a)))

    for e in events:
        if not e.region:
            diags.append(error("region-empty", f"event {e.id!r} has an empty region", _loc(e)))
        for ref in e.region:
            if ref not in stage_ids and ref not in arc_ids:
                diags.append(error("region-dangling", f"event {e.id!r} references unknown element {ref!r}", _loc(e)))

    if diags:
        raise ModelError(diags)
    # canonical element order: machines in tree preorder, stages grouped by
    # machine in that order; this is exactly the order the text form can express
    kids: dict[Optional[str], list[Machine]] = {}
    for m in machines:
        kids.setdefault(m.parent, []).append(m)
    ordered: list[Machine] = []
    stack = list(reversed(kids[None]))
    while stack:
        m = stack.pop()
        ordered.append(m)
        stack.extend(reversed(kids.get(m.id, [])))
    rank = {m.id: i for i, m in enumerate(ordered)}
    stages.sort(key=lambda s: rank[s.machine])
    return Model(name, tuple(ordered), tuple(stages), tuple(arcs), tuple(variables), tuple(events))


# ---------------------------------------------------------------------
# Legality
# ---------------------------------------------------------------------

C, P, RL, T, RC = (StageKind.CREATE, StageKind.PROCESS, StageKind.RELEASE,
                   StageKind.TRANSFER, StageKind.RECEIVE)

INTRA_FLOWS = frozenset({
    (T, RC), (RC, P), (RC, RL), (P, RL), (C, P), (C, RL), (RL, T),
})
INTER_FLOWS = frozenset({(T, T)})
TRIGGER_SOURCES = frozenset({P, C})

# After level 1 only the "inner" hops remain, plus direct arrivals.
LEVEL1_INTRA_FLOWS = frozenset({(RC, P), (C, P)})
LEVEL1_DIRECT_TARGETS = frozenset({RC})


def flow_legal(src: StageKind, dst: StageKind, same_machine: bool, level: int = 0) -> bool:
    if level == 0:
        return (src, dst) in (INTRA_FLOWS if same_machine else INTER_FLOWS)
    if RL in (src, dst) or T in (src, dst):
        return False
    if dst in LEVEL1_DIRECT_TARGETS:
        return True
    return same_machine and (src, dst) in LEVEL1_INTRA_FLOWS


def validate_model(m: Model, lax: bool = False, level: int = 0) -> list[Diagnostic]:
    """
    Check every arc against the stage-legality table.

    ``level`` selects the table: 0 for full models, 1 or 2 for simplified
    ones.  Machine-anchored endpoints are always legal.  ``lax`` downgrades
    trigger-source violations to warnings.
    """
    diags = []
    for a in m.arcs:
        src_kind, dst_kind = m.kind_of(a.source), m.kind_of(a.target)
        if a.kind is ArcKind.FLOW:
            if src_kind is None or dst_kind is None:
                if level < 2:
                    diags.append(error("anchor-before-level2",
                                       f"flow {a.id!r} is machine-anchored in a level-{level} model", _loc(a)))
                continue
            same = m.machine_of(a.source) == m.machine_of(a.target)
            if not flow_legal(src_kind, dst_kind, same, level):
                where = "intra-machine" if same else "inter-machine"
                diags.append(error(
                    "illegal-flow-hop",
                    f"{where} flow {a.id!r} {src_kind.value} -> {dst_kind.value} is not allowed",
                    _loc(a)))
        else:
            if src_kind is None:
                if level < 2:
                    diags.append(error("anchor-before-level2",
                                       f"trigger {a.id!r} is machine-anchored in a level-{level} model", _loc(a)))
                continue
            if src_kind not in TRIGGER_SOURCES:
                make = warning if lax else error
                diags.append(make("illegal-trigger-source",
                                  f"trigger {a.id!r} starts at a {src_kind.value} stage", _loc(a)))
    return diags


def check_model(m: Model, lax: bool = False, level: int = 0) -> Model:
    diags = validate_model(m, lax=lax, level=level)
    if has_errors(diags):
        raise ModelError(diags)
    return m


# ---------------------------------------------------------------------
# Flow relation
# ---------------------------------------------------------------------

_CHAIN_KINDS = (RL, T)


def _in_chain(m: Model, ref: str) -> bool:
    return m.kind_of(ref) in _CHAIN_KINDS


def flow_chains(m: Model) -> list[list[Arc]]:
    """
    Every flow path that starts at a non-Release/Transfer endpoint, crosses
    only Release/Transfer stages, and ends at a non-Release/Transfer endpoint.
    Open chains (never reaching such an endpoint) are omitted.
    """
    out_flows: dict[str, list[Arc]] = {}
    for a in m.flows():
        out_flows.setdefault(a.source, []).append(a)
    chains = []
    for a in m.flows():
        if _in_chain(m, a.source):
            continue
        stack = [[a]]
        while stack:
            path = stack.pop(0)
            last = path[-1]
            if not _in_chain(m, last.target):
                chains.append(path)
                continue
            visited = {p.target for p in path[:-1]}
            for nxt in out_flows.get(last.target, []):
                if nxt.target not in visited and nxt.target != last.target:
                    stack.append(path + [nxt])
    return chains


def flow_relation(m: Model) -> list[tuple[str, str, str]]:
    """
    Machine-level flow summary: (source machine, thing, target machine) for
    every chain that crosses a machine boundary, in declaration order, with
    duplicates removed.
    """
    out: list[tuple[str, str, str]] = []
    for chain in flow_chains(m):
        src = m.machine_of(chain[0].source)
        dst = m.machine_of(chain[-1].target)
        if src != dst:
            rel = (src, chain[-1].thing, dst)
            if rel not in out:
                out.append(rel)
    return out
