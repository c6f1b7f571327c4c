import random
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from thingc.core import (
    Arc, ArcKind, EventDef, Machine, Stage, StageKind, StateVar, build_model,
)
from thingc.dsl import parse_file
from thingc.expr import parse_actions, parse_expr

CORPUS = Path(__file__).resolve().parents[1] / "src" / "thingc" / "corpus"
GOLDEN = CORPUS / "golden"
MODELS = ("book_borrow", "box_arrival", "control_light", "atm")

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus():
    return {name: parse_file(CORPUS / f"{name}.tm") for name in MODELS}


@pytest.fixture
def book(corpus):
    return corpus["book_borrow"]


C, P, RL, T, RC = (StageKind.CREATE, StageKind.PROCESS, StageKind.RELEASE,
                   StageKind.TRANSFER, StageKind.RECEIVE)
THINGS = ("box", "form", "signal", "request", "book", "cart")


def random_model(rng: random.Random):
    """A random valid model: inter-machine send chains (some bouncing back to
    their origin machine), intra-machine create/receive-then-process steps,
    open chains, guarded triggers, and single-stage events."""
    n = rng.randint(1, 4)
    decls = [Machine("Root")]
    mids = [f"M{i}" for i in range(n)]
    for mid in mids:
        decls.append(Machine(mid, parent="Root", is_actor=rng.random() < 0.5))
    if n > 1 and rng.random() < 0.5:
        decls.append(Machine("Sub", parent=mids[0]))
        mids.append("Sub")
    stages: list = []
    arcs: list = []
    counter = {"s": 0, "f": 0, "t": 0}

    def stage(kind, mid):
        counter["s"] += 1
        s = Stage(f"s{counter['s']}", kind, mid)
        stages.append(s)
        return s.id

    def flow(thing, a, b):
        counter["f"] += 1
        arcs.append(Arc(f"f{counter['f']}", ArcKind.FLOW, a, b, thing))

    sources = []  # stages allowed to source triggers
    for _ in range(rng.randint(0, 5)):
        thing = rng.choice(THINGS)
        src = rng.choice(mids)
        origin_kind = rng.choice((C, P))
        origin = stage(origin_kind, src)
        if origin_kind is P:
            feed = stage(C, src)
            flow(thing, feed, origin)
            sources.append(feed)
        sources.append(origin)
        shape = rng.choice(("send", "send", "local", "open"))
        if shape == "local" or n == 1:
            if origin_kind is C:
                sink = stage(P, src)
                flow(thing, origin, sink)
                sources.append(sink)
            continue
        rel = stage(RL, src)
        flow(thing, origin, rel)
        if shape == "open":
            continue
        out = stage(T, src)
        flow(thing, rel, out)
        cur, cur_m = out, src
        for _ in range(rng.randint(1, 3)):
            cur_m = rng.choice([x for x in mids if x != cur_m])
            nxt = stage(T, cur_m)
            flow(thing, cur, nxt)
            cur = nxt
        rcv = stage(RC, cur_m)
        flow(thing, cur, rcv)
        if rng.random() < 0.5:
            proc = stage(P, cur_m)
            flow(thing, rcv, proc)
            sources.append(proc)

    variables = []
    if rng.random() < 0.5:
        variables.append(StateVar("v", "number", rng.randint(-5, 5)))
    all_stages = [s.id for s in stages]
    if sources:
        for _ in range(rng.randint(0, 3)):
            guard, actions = None, ()
            if variables and rng.random() < 0.5:
                guard = parse_expr(f"v < {rng.randint(0, 9)}")
                actions = parse_actions("v := v + 1")
            counter["t"] += 1
            arcs.append(Arc(f"t{counter['t']}", ArcKind.TRIGGER, rng.choice(sources), rng.choice(all_stages),
                            None, guard, actions))

    picked = rng.sample(all_stages, min(len(all_stages), rng.randint(0, 3)))
    events = [EventDef(f"E{i + 1}", f"event {i + 1}", (sid,)) for i, sid in enumerate(picked)]
    return build_model("random", decls + stages + arcs + variables + events)


def models():
    # one draw per example keeps generation cheap enough for 1000-model runs
    return st.integers(0, 2**32 - 1).map(lambda seed: random_model(random.Random(seed)))
