"""
Textual TM language (``.tm`` files): parser and canonical serializer.

The language is line-oriented.  Machine blocks open with ``{`` at the end
of a ``machine`` line and close with a line holding ``}``::

    model book_borrow
    var light : enum(on, off) = off
    machine World {
      machine Student actor {
        stage create req "request"
      }
    }
    flow request req -> out
    trigger proc -> rec as t1 if light == off do light := on
    event E1 "A student requests a book" region { req, f1 }
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Optional

from .core import (
    Arc, ArcKind, Diagnostic, EventDef, Machine, Model, ModelError, SourceSpan,
    Stage, StageKind, StateVar, TMError, build_model, error,
)
from .expr import ExprError, parse_actions, parse_expr


class ParseError(TMError):
    pass


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#.*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<num>-?\d+)
  | (?P<anchor>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>->|:=|<=|>=|==|!=|[{}():=,;<>+\-*])
""", re.VERBOSE)


class _Tok:
    __slots__ = ("kind", "text", "col", "end")

    def __init__(self, kind: str, text: str, col: int, end: int):
        self.kind, self.text, self.col, self.end = kind, text, col, end

    def __repr__(self) -> str:
        return f"_Tok({self.kind}, {self.text!r})"


class _LineError(Exception):
    def __init__(self, code: str, message: str, col: int, end: Optional[int] = None):
        super().__init__(message)
        self.code, self.message, self.col = code, message, col
        self.end = end if end is not None else col + 1


def _lex(line: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            if line[pos] == '"':
                raise _LineError("lexical-error", "unterminated string", pos, len(line))
            raise _LineError("lexical-error", f"unexpected character {line[pos]!r}", pos)
        kind = m.lastgroup
        if kind == "comment":
            break
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), m.start(), m.end()))
        pos = m.end()
    return toks


class _Line:
    """Cursor over one line's tokens."""

    def __init__(self, text: str, toks: list[_Tok]):
        self.text = text
        self.toks = toks
        self.i = 0

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text and t.kind != "string"

    def next(self, what: str) -> _Tok:
        t = self.peek()
        if t is None:
            raise _LineError("syntax-error", f"expected {what} at end of line", len(self.text.rstrip()))
        self.i += 1
        return t

    def word(self, what: str = "identifier") -> _Tok:
        t = self.next(what)
        if t.kind != "word":
            raise _LineError("syntax-error", f"expected {what}, got {t.text!r}", t.col, t.end)
        return t

    def ref(self) -> _Tok:
        t = self.next("stage id")
        if t.kind not in ("word", "anchor"):
            raise _LineError("syntax-error", f"expected stage id, got {t.text!r}", t.col, t.end)
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next(repr(text))
        if t.text != text or t.kind == "string":
            raise _LineError("syntax-error", f"expected {text!r}, got {t.text!r}", t.col, t.end)
        return t

    def string(self) -> str:
        t = self.next("string")
        if t.kind != "string":
            raise _LineError("syntax-error", f"expected string, got {t.text!r}", t.col, t.end)
        return json.loads(t.text)

    def end(self) -> None:
        t = self.peek()
        if t is not None:
            raise _LineError("syntax-error", f"unexpected {t.text!r}", t.col, t.end)

    def rest_from(self, tok_index: int, stop: Optional[int] = None) -> tuple[str, int]:
        start = self.toks[tok_index].col
        end = self.toks[stop].col if stop is not None else self.toks[-1].end
        return self.text[start:end].strip(), start


_KINDS = {k.value: k for k in StageKind}


def parse(text: str, file: str = "<string>", name: Optional[str] = None) -> Model:
    """
    Parse ``.tm`` source into a Model.

    Raises ParseError carrying every diagnostic found; each line that fails
    to lex or parse is reported and skipped, so independent errors are all
    reported in one run.
    """
    p = _Parser(file)
    p.run(text)
    if p.diags:
        raise ParseError(p.diags)
    model_name = p.model_name or name or (Path(file).stem if file != "<string>" else "model")
    try:
        return build_model(model_name, p.decls)
    except ModelError as exc:
        raise ParseError(exc.diagnostics) from None


def parse_file(path) -> Model:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), file=str(path), name=path.stem)


class _Parser:
    def __init__(self, file: str):
        self.file = file
        self.diags: list[Diagnostic] = []
        self.decls: list = []
        self.stack: list[tuple[str, SourceSpan]] = []
        self.model_name: Optional[str] = None
        self.n_flows = 0
        self.n_triggers = 0

    def span(self, lineno: int, col: int, end: int) -> SourceSpan:
        return SourceSpan(self.file, lineno, col + 1, lineno, max(end, col + 1) + 0)

    def run(self, text: str) -> None:
        for lineno, line in enumerate(text.splitlines(), start=1):
            try:
                toks = _lex(line)
                if toks:
                    self.statement(_Line(line, toks), lineno)
            except _LineError as exc:
                self.diags.append(error(exc.code, exc.message, self.span(lineno, exc.col, exc.end)))
        for mid, span in self.stack:
            self.diags.append(error("unclosed-machine", f"machine {mid!r} is never closed", span))

    def statement(self, ln: _Line, lineno: int) -> None:
        head = ln.peek()
        whole = self.span(lineno, head.col, ln.toks[-1].end)
        if head.text == "}" and head.kind == "punct":
            ln.next("}")
            ln.end()
            if not self.stack:
                raise _LineError("syntax-error", "unmatched '}'", head.col)
            self.stack.pop()
            return
        kw = ln.word("keyword").text
        handler = getattr(self, "st_" + kw, None)
        if handler is None:
            raise _LineError("syntax-error", f"unknown statement {kw!r}", head.col, head.end)
        handler(ln, whole)

    def st_model(self, ln: _Line, span: SourceSpan) -> None:
        self.model_name = ln.word("model name").text
        ln.end()

    def st_machine(self, ln: _Line, span: SourceSpan) -> None:
        mid = ln.word("machine id").text
        actor, name, usecase = False, "", None
        while not ln.at("{"):
            t = ln.word("machine option")
            if t.text == "actor":
                actor = True
            elif t.text == "name":
                name = ln.string()
            elif t.text == "usecase":
                usecase = ln.string()
            else:
                raise _LineError("syntax-error", f"unknown machine option {t.text!r}", t.col, t.end)
        ln.expect("{")
        ln.end()
        parent = self.stack[-1][0] if self.stack else None
        self.decls.append(Machine(mid, name, parent, actor, usecase, span=span))
        self.stack.append((mid, span))

    def st_stage(self, ln: _Line, span: SourceSpan) -> None:
        kt = ln.next("stage kind")
        kind = _KINDS.get(kt.text.lower()) if kt.kind == "word" else None
        if kind is None:
            raise _LineError("unknown-stage-kind", f"unknown stage kind {kt.text!r}", kt.col, kt.end)
        sid = ln.word("stage id").text
        label = ln.string() if ln.peek() is not None else ""
        ln.end()
        if not self.stack:
            raise _LineError("syntax-error", "stage declared outside any machine", 0)
        self.decls.append(Stage(sid, kind, self.stack[-1][0], label, span=span))

    def _endpoints(self, ln: _Line) -> tuple[str, str]:
        src = ln.ref().text
        ln.expect("->")
        dst = ln.ref().text
        return src, dst

    def _arc_id(self, ln: _Line, default: str) -> str:
        if ln.at("as"):
            ln.next("as")
            return ln.word("arc id").text
        return default

    def st_flow(self, ln: _Line, span: SourceSpan) -> None:
        self.n_flows += 1
        thing = ln.ref()
        if thing.kind != "word":
            raise _LineError("syntax-error", "expected thing name", thing.col, thing.end)
        if ln.at("->"):
            raise _LineError("flow-missing-thing", "flow declares no thing name", thing.col, thing.end)
        src, dst = self._endpoints(ln)
        aid = self._arc_id(ln, f"f{self.n_flows}")
        ln.end()
        self.decls.append(Arc(aid, ArcKind.FLOW, src, dst, thing.text, span=span))

    def st_trigger(self, ln: _Line, span: SourceSpan) -> None:
        self.n_triggers += 1
        src, dst = self._endpoints(ln)
        aid = self._arc_id(ln, f"t{self.n_triggers}")
        guard, actions = None, ()
        do_index = next((k for k in range(ln.i, len(ln.toks))
                         if ln.toks[k].kind == "word" and ln.toks[k].text == "do"), None)
        if ln.at("if"):
            start = ln.i + 1
            if start >= len(ln.toks) or start == do_index:
                raise _LineError("syntax-error", "empty guard", ln.toks[ln.i].col)
            text, col = ln.rest_from(start, do_index)
            guard = self._expr(parse_expr, text, col)
            ln.i = do_index if do_index is not None else len(ln.toks)
        if ln.at("do"):
            if ln.i + 1 >= len(ln.toks):
                raise _LineError("syntax-error", "empty action list", ln.toks[ln.i].col)
            text, col = ln.rest_from(ln.i + 1)
            actions = self._expr(parse_actions, text, col)
            ln.i = len(ln.toks)
        ln.end()
        self.decls.append(Arc(aid, ArcKind.TRIGGER, src, dst, None, guard, actions, span=span))

    def _expr(self, fn, text: str, col: int):
        try:
            return fn(text)
        except ExprError as exc:
            raise _LineError("syntax-error", f"bad expression: {exc}", col + exc.column) from None

    def st_var(self, ln: _Line, span: SourceSpan) -> None:
        vid = ln.word("variable id").text
        ln.expect(":")
        tt = ln.word("type")
        values: tuple[str, ...] = ()
        if tt.text == "enum":
            ln.expect("(")
            vals = [ln.word("enum value").text]
            while ln.at(","):
                ln.next(",")
                vals.append(ln.word("enum value").text)
            ln.expect(")")
            values = tuple(vals)
        elif tt.text != "number":
            raise _LineError("syntax-error", f"unknown variable type {tt.text!r}", tt.col, tt.end)
        ln.expect("=")
        it = ln.next("initial value")
        if it.kind == "num":
            initial = int(it.text)
        elif it.kind == "word":
            initial = it.text
        else:
            raise _LineError("syntax-error", f"bad initial value {it.text!r}", it.col, it.end)
        ln.end()
        self.decls.append(StateVar(vid, tt.text, initial, values, span=span))

    def st_event(self, ln: _Line, span: SourceSpan) -> None:
        eid = ln.word("event id").text
        name = ln.string()
        kw = ln.word("'region'")
        if kw.text != "region":
            raise _LineError("syntax-error", f"expected 'region', got {kw.text!r}", kw.col, kw.end)
        ln.expect("{")
        region = []
        while not ln.at("}"):
            region.append(ln.word("region element").text)
            if ln.at(","):
                ln.next(",")
        ln.expect("}")
        time = None
        if ln.at("time"):
            ln.next("time")
            if ln.peek() is None:
                raise _LineError("syntax-error", "empty time annotation", len(ln.text))
            time, _ = ln.rest_from(ln.i)
            ln.i = len(ln.toks)
        ln.end()
        self.decls.append(EventDef(eid, name, tuple(region), time, span=span))


# ---------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------

def _q(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def serialize(m: Model) -> str:
    """Canonical text: vars, machine tree (stages before sub-machines), arcs, events."""
    sections: list[list[str]] = [[f"model {m.name}"]]
    if m.variables:
        sections.append([_var_line(v) for v in m.variables])

    stages_of: dict[str, list[Stage]] = {mid.id: [] for mid in m.machines}
    for s in m.stages:
        stages_of[s.machine].append(s)
    tree: list[str] = []

    def emit(mid: str, depth: int) -> None:
        mach = m.machine_by_id[mid]
        pad = "  " * depth
        head = f"{pad}machine {mach.id}"
        if mach.is_actor:
            head += " actor"
        if mach.name:
            head += f" name {_q(mach.name)}"
        if mach.usecase is not None:
            head += f" usecase {_q(mach.usecase)}"
        tree.append(head + " {")
        for s in stages_of[mid]:
            line = f"{pad}  stage {s.kind.value} {s.id}"
            if s.label:
                line += f" {_q(s.label)}"
            tree.append(line)
        for child in m.children[mid]:
            emit(child, depth + 1)
        tree.append(pad + "}")

    emit(m.root.id, 0)
    sections.append(tree)

    arcs = []
    n_flow = n_trig = 0
    for a in m.arcs:
        if a.kind is ArcKind.FLOW:
            n_flow += 1
            line = f"flow {a.thing} {a.source} -> {a.target}"
            if a.id != f"f{n_flow}":
                line += f" as {a.id}"
        else:
            n_trig += 1
            line = f"trigger {a.source} -> {a.target}"
            if a.id != f"t{n_trig}":
                line += f" as {a.id}"
            if a.guard is not None:
                line += f" if {a.guard}"
            if a.actions:
                line += " do " + "; ".join(str(x) for x in a.actions)
        arcs.append(line)
    if arcs:
        sections.append(arcs)
    if m.events:
        lines = []
        for e in m.events:
            line = f"event {e.id} {_q(e.name)} region {{ {', '.join(e.region)} }}"
            if e.time:
                line += f" time {e.time}"
            lines.append(line)
        sections.append(lines)
    head, *rest = sections
    return head[0] + "\n" + "\n\n".join("\n".join(sec) for sec in rest) + "\n"


def _var_line(v: StateVar) -> str:
    if v.var_type == "enum":
        return f"var {v.id} : enum({', '.join(v.enum_values)}) = {v.initial}"
    return f"var {v.id} : number = {v.initial}"
