import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thingc.core import StageKind
from thingc.dsl import parse
from thingc.events import build_behavior
from thingc.sim import (
    EventOccurrence, Injection, Scenario, ScenarioError, SimulationError, Trace,
    load_scenario, load_scenario_file, occurrence_violations, simulate, trace_to_events,
)

from conftest import CORPUS, models

INTRA = {("transfer", "receive"), ("receive", "process"), ("receive", "release"),
         ("process", "release"), ("create", "process"), ("create", "release"),
         ("release", "transfer")}


def scenario(m, name):
    return load_scenario_file(CORPUS / f"{name}.tms", m)


def triangle_wave(start, n, rate=10, lo=10, hi=100):
    """Brightness under a held button: climb by ``rate`` to ``hi``, then fall
    to ``lo``, reversing at each bound."""
    out, b, up = [], start, True
    for _ in range(n):
        b = min(hi, b + rate) if up else max(lo, b - rate)
        if b >= hi:
            up = False
        elif b <= lo:
            up = True
        out.append(b)
    return out


# ---------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------

def test_horizon_only():
    s = load_scenario("horizon 10\n")
    assert s == Scenario("scenario", 10, ())


def test_press_scenario(corpus):
    s = scenario(corpus["control_light"], "control_light_press")
    assert s.horizon == 30
    assert [i.tick for i in s.injections] == [0, 1, 2, 3, 4]
    assert {(i.thing, i.stage) for i in s.injections} == {("signal", "press_out")}


@pytest.mark.parametrize("text, code", [
    ("horizon 10\nat 0 inject request into req_process\n", "inject-not-transfer"),
    ("horizon 10\nat 0 inject request into nowhere\n", "unknown-stage"),
    ("horizon 10\nat 12 inject request into req_out\n", "inject-after-horizon"),
    ("at 0 inject request into req_out\n", "no-horizon"),
    ("horizon ten\n", "syntax-error"),
])
def test_scenario_errors(book, text, code):
    with pytest.raises(ScenarioError) as info:
        load_scenario(text, book)
    assert code in info.value.codes


# ---------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------

def test_empty_scenario(corpus):
    m = corpus["control_light"]
    t = simulate(m, Scenario("idle", 20))
    assert t.steps == ()
    assert t.final_state["variables"] == {v.id: v.initial for v in m.variables}


def test_book_hand_trace(book):
    t = simulate(book, scenario(book, "book_borrow"))
    moves = [(s.tick, s.elements[0]) for s in t.steps if s.kind == "move"]
    # request: req_out -> req_in -> req_receive -> req_process, then the book's four hops
    assert moves == [(1, "f3"), (2, "f4"), (3, "f5"), (4, "f6"), (5, "f7"), (6, "f8"), (7, "f9")]
    fired = [s.elements[0] for s in t.steps if s.kind == "trigger"]
    assert fired == ["t1", "t2"]
    created = [(s.elements[0], s.thing) for s in t.steps if s.kind == "create"]
    assert created.count(("record_create", "record#1")) == 1
    assert ("book_create", "book#1") in created
    assert ("move", ("f9", "book_in", "book_receive")) in [(s.kind, s.elements) for s in t.steps]


def test_control_light_hold_triangle(corpus):
    m = corpus["control_light"]
    t = simulate(m, scenario(m, "control_light_hold"))
    levels = t.assignments("brightness")
    assert levels == triangle_wave(50, 8) == [60, 70, 80, 90, 100, 90, 80, 70]
    assert t.final_state["variables"]["light"] == "on"
    occ = trace_to_events(t, m.events, m)
    assert sum(o.event == "E11" for o in occ) == len(levels)


def test_control_light_press(corpus):
    m = corpus["control_light"]
    t = simulate(m, scenario(m, "control_light_press"))
    assert t.assignments("brightness") == triangle_wave(50, 3)


def test_control_light_tap_toggles(corpus):
    m = corpus["control_light"]
    t = simulate(m, scenario(m, "control_light_tap"))
    assert t.assignments("light") == ["on", "off"]
    assert t.assignments("brightness") == []


def test_nondeterministic_routing():
    m = parse("machine R {\n stage create c\n stage process p\n stage release r\n}\n"
              "flow x c -> p\nflow x c -> r\n")
    with pytest.raises(SimulationError) as info:
        simulate(m, Scenario("s", 3))
    assert info.value.codes == ["nondeterministic-routing"]


def test_divergence_bound(corpus):
    m = corpus["control_light"]
    with pytest.raises(SimulationError) as info:
        simulate(m, scenario(m, "control_light_hold"), max_steps_per_tick=3)
    assert info.value.codes == ["divergence"]


def test_trigger_without_flow_mints_labelled_thing():
    m = parse('machine R {\n stage process p\n stage create c "ticket"\n stage transfer door\n'
              ' stage receive got\n}\nflow x door -> got\nflow x got -> p\ntrigger p -> c\n')
    t = simulate(m, Scenario("s", 5, (Injection(0, "x", "door"),)))
    assert [s.thing for s in t.steps if s.kind == "create"] == ["x#1", "ticket#1"]


# ---------------------------------------------------------------------
# trace invariants
# ---------------------------------------------------------------------

ALL_SCENARIOS = [("book_borrow", "book_borrow"), ("box_arrival", "box_arrival"),
                 ("control_light", "control_light_hold"), ("control_light", "control_light_press"),
                 ("control_light", "control_light_tap"), ("atm", "atm_on_off")]


def check_trace(m, t):
    ticks = [s.tick for s in t.steps]
    assert ticks == sorted(ticks)
    created = [s.thing for s in t.steps if s.kind == "create"]
    assert len(created) == len(set(created))
    born = set()
    for s in t.steps:
        if s.kind == "create":
            born.add(s.thing)
        elif s.kind in ("move", "consume"):
            assert s.thing in born
        if s.kind == "move":
            a, b = m.stage_by_id[s.elements[1]], m.stage_by_id[s.elements[2]]
            pair = (a.kind.value, b.kind.value)
            assert pair in INTRA if a.machine == b.machine else pair == ("transfer", "transfer")


@pytest.mark.parametrize("model, scen", ALL_SCENARIOS)
def test_trace_invariants(corpus, model, scen):
    m = corpus[model]
    s = scenario(m, scen)
    t = simulate(m, s)
    check_trace(m, t)
    assert simulate(m, s).to_jsonl() == t.to_jsonl()
    occ = trace_to_events(t, m.events, m)
    assert occurrence_violations(occ, build_behavior(m)) == []


def test_book_occurrence_order(book):
    t = simulate(book, scenario(book, "book_borrow"))
    assert [o.event for o in trace_to_events(t, book.events, book)] == ["E1", "E2", "E3", "E4"]


def test_atm_on_off_order(corpus):
    m = corpus["atm"]
    t = simulate(m, scenario(m, "atm_on_off"))
    occ = trace_to_events(t, m.events, m)
    assert [o.event for o in occ] == ["E1", "E2", "E3", "E4", "E5", "E6", "E7"]
    assert max(o.end for o in occ[:4]) < min(o.start for o in occ[4:])


def test_empty_trace_no_occurrences(book):
    assert trace_to_events(Trace(()), book.events, book) == []


def test_occurrence_bounds():
    with pytest.raises(ValueError):
        EventOccurrence("E1", 4, 2)


def test_jsonl_shape(book):
    t = simulate(book, scenario(book, "book_borrow"))
    lines = t.to_jsonl().splitlines()
    assert len(lines) == len(t.steps) + 1
    assert lines[-1].startswith('{"final_state"')


@settings(max_examples=150)
@given(models(), st.data())
def test_random_simulation_invariants(m, data):
    doors = [s.id for s in m.stages if s.kind is StageKind.TRANSFER]
    injections = []
    if doors:
        for _ in range(data.draw(st.integers(0, 4))):
            stage = data.draw(st.sampled_from(doors))
            things = [a.thing for a in m.flows() if a.source == stage] or ["x"]
            injections.append(Injection(data.draw(st.integers(0, 9)), things[0], stage))
    s = Scenario("random", 12, tuple(sorted(injections, key=lambda i: i.tick)))
    t = simulate(m, s)
    check_trace(m, t)
    assert simulate(m, s) == t
