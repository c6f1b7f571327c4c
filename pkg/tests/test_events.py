import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thingc.core import EventDef, flow_chains, flow_relation
from thingc.dsl import parse
from thingc.events import (
    BehaviorGraph, EventError, build_behavior, check_events, check_region, check_witnesses,
    compose_events, detect_send_events, has_cycle, reachable, strongly_connected, weak_components,
)
from thingc.transform import simplify_level1

from conftest import MODELS, models

EVENT_COUNTS = {"book_borrow": 4, "box_arrival": 10, "control_light": 11, "atm": 7}


@pytest.mark.parametrize("name", MODELS)
def test_event_counts(corpus, name):
    m = corpus[name]
    assert [e.id for e in m.events] == [f"E{i}" for i in range(1, EVENT_COUNTS[name] + 1)]
    assert [d for d in check_events(m) if d.is_error] == []


def test_book_e1_region_is_clean(book):
    e1 = book.events[0]
    assert {book.stage_by_id[s].kind.value for s in e1.region if s in book.stage_by_id} >= {"create", "transfer"}
    assert check_region(book, e1) == []


def test_region_dangling(book):
    bad = EventDef("X", "ghost", ("req_create", "deleted_stage"))
    assert [d.code for d in check_region(book, bad)] == ["region-dangling"]


def test_region_overlap_is_warning(book):
    a = EventDef("A", "a", ("req_process",))
    b = EventDef("B", "b", ("req_process", "req_receive"))
    diags = check_region(book, a, [a, b])
    assert [(d.severity, d.code) for d in diags] == [("warning", "region-overlap")]


def test_region_disconnected(book):
    e = EventDef("X", "split", ("req_create", "book_receive"))
    assert [d.code for d in check_region(book, e, others=[])] == ["region-disconnected"]


def test_book_behavior_chain(book):
    g = build_behavior(book)
    assert g.nodes == ("E1", "E2", "E3", "E4")
    assert g.edges == (("E1", "E2"), ("E2", "E3"), ("E3", "E4"))
    assert not has_cycle(g)


def test_atm_two_chains(corpus):
    g = build_behavior(corpus["atm"])
    assert weak_components(g) == [["E1", "E2", "E3", "E4"], ["E5", "E6", "E7"]]
    assert g.edges == (("E1", "E2"), ("E2", "E3"), ("E3", "E4"), ("E5", "E6"), ("E6", "E7"))


def test_control_light_cycle(corpus):
    g = build_behavior(corpus["control_light"])
    assert has_cycle(g)
    comp = strongly_connected(g)
    loop = {x for x in g.nodes if comp[x] == comp["E11"]}
    # the hold loop runs brightness recalculation back into turning the light on
    assert {"E4", "E5", "E6", "E8", "E9", "E10", "E11"} <= loop


def test_box_arrival_prose_orderings(corpus):
    g = build_behavior(corpus["box_arrival"])
    for a, b in [("E1", "E2"), ("E2", "E3"), ("E4", "E5"), ("E7", "E10")]:
        assert b in reachable(g, a)
    assert len(weak_components(g)) == 1


@pytest.mark.parametrize("name", MODELS)
def test_witnesses_check_out(corpus, name):
    m = corpus[name]
    g = build_behavior(m)
    assert check_witnesses(m, g) == []
    assert set(g.witnesses) == set(g.edges)
    assert all(a != b for a, b in g.edges)


def test_build_behavior_rejects_bad_regions(book):
    with pytest.raises(EventError):
        build_behavior(book, [EventDef("X", "x", ("nope",))])


def test_compose_full_collapse(book):
    g = compose_events(build_behavior(book), ["E1", "E2", "E3", "E4"], "Borrow Book")
    assert g.nodes == ("Borrow Book",) and g.edges == ()
    assert g.composed == {"Borrow Book": ("E1", "E2", "E3", "E4")}
    assert g.internal["Borrow Book"] == (("E1", "E2"), ("E2", "E3"), ("E3", "E4"))


def test_compose_atm_startup(corpus):
    g = compose_events(build_behavior(corpus["atm"]), ["E1", "E2", "E3", "E4"], "Startup")
    # quotient graph by hand: the startup chain is internal, shutdown untouched
    assert g.nodes == ("Startup", "E5", "E6", "E7")
    assert g.edges == (("E5", "E6"), ("E6", "E7"))


def test_compose_control_light_basic_flow(corpus):
    g = build_behavior(corpus["control_light"])
    big = compose_events(g, ["E1", "E2", "E3", "E4", "E5"], "Control Light")
    assert big.nodes[0] == "Control Light"
    assert ("Control Light", "E6") in big.edges and ("E11", "Control Light") in big.edges
    assert has_cycle(big)


def test_compose_errors(book):
    g = build_behavior(book)
    with pytest.raises(EventError) as info:
        compose_events(g, ["E1", "E9"], "X")
    assert info.value.codes == ["unknown-member"]
    with pytest.raises(EventError) as info:
        compose_events(g, ["E1", "E2"], "E3")
    assert info.value.codes == ["duplicate-node"]


def test_repeated_composition(book):
    g = compose_events(build_behavior(book), ["E1", "E2"], "Ask")
    g = compose_events(g, ["Ask", "E3"], "Handle")
    assert g.nodes == ("Handle", "E4") and g.edges == (("Handle", "E4"),)
    assert g.composed["Handle"] == ("Ask", "E3")


def test_behavior_graph_rejects_unknown_edge():
    with pytest.raises(ValueError):
        BehaviorGraph(("A",), (("A", "B"),))


def test_send_events_book(book):
    found = detect_send_events(book)
    assert [e.name for e in found] == ["send(request, Student, Library)", "send(book, Library, Student)"]
    for e in found:
        assert check_region(book, e, others=[]) == []


@pytest.mark.parametrize("name", MODELS)
def test_send_events_vanish_after_level1(corpus, name):
    m = corpus[name]
    assert detect_send_events(m) != []
    assert detect_send_events(simplify_level1(m)) == []


def test_box_arrival_send_count(corpus):
    m = corpus["box_arrival"]
    crossing = [c for c in flow_chains(m) if m.machine_of(c[0].source) != m.machine_of(c[-1].target)]
    assert len(detect_send_events(m)) == len(crossing) == len(flow_relation(m))


# ---------------------------------------------------------------------
# composition preserves reachability
# ---------------------------------------------------------------------

@st.composite
def graphs(draw):
    n = draw(st.integers(1, 7))
    nodes = tuple(f"N{i}" for i in range(n))
    pairs = draw(st.lists(st.tuples(st.sampled_from(nodes), st.sampled_from(nodes)), unique=True, max_size=12))
    edges = tuple(p for p in pairs if p[0] != p[1])
    members = draw(st.lists(st.sampled_from(nodes), min_size=1, unique=True))
    return BehaviorGraph(nodes, edges), members


def _reach_through(g, members, x, y):
    """Oracle: y reachable from x in g, where passing through any member
    counts as entering the composite (members are mutually connected)."""
    mset = set(members)
    frontier, seen = [x], {x}
    while frontier:
        cur = frontier.pop()
        nxts = [b for a, b in g.edges if a == cur]
        if cur in mset:
            nxts += [b for a, b in g.edges if a in mset]
        for b in nxts:
            if b == y:
                return True
            if b not in seen:
                seen.add(b)
                frontier.append(b)
    return False


@settings(max_examples=300)
@given(graphs())
def test_composition_preserves_reachability(case):
    g, members = case
    h = compose_events(g, members, "MEGA")
    outside = [x for x in g.nodes if x not in members]
    for x in outside:
        for y in outside:
            if x != y:
                assert (y in reachable(h, x)) == _reach_through(g, members, x, y)
        assert ("MEGA" in reachable(h, x)) == any(_reach_through(g, members, x, m) for m in members)


@settings(max_examples=200)
@given(models())
def test_random_witnesses(m):
    g = build_behavior(m)
    assert check_witnesses(m, g) == []
